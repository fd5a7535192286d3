#include "krr/csv.hpp"
#include "krr/dataspec.hpp"
#include "krr/fit.hpp"
#include "krr/simulator.hpp"
#include "krr/spectrum.hpp"
#include "krr/theory.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

    /// Fresh scratch directory per test.
    class CliTest : public ::testing::Test {
    protected:
        void SetUp() override {
            const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
            dir_ = fs::temp_directory_path() /
                   ("krr_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
            fs::remove_all(dir_);
            fs::create_directories(dir_);
        }
        void TearDown() override {
            if (!HasFailure()) { fs::remove_all(dir_); }
        }

        /// Runs the CLI inside the scratch directory and returns its exit status.
        int krr(const std::string& args, const std::string& env = "") {
            const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" KRR_CLI_PATH "' " + args + " > '" +
                                    (dir_ / "stdout.txt").string() + "' 2> '" + (dir_ / "stderr.txt").string() + "'";
            const int status = std::system(cmd.c_str());
            return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        }

        std::string slurp(const fs::path& name) const {
            std::ifstream in(dir_ / name, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        krr::csv::Table table(const fs::path& name) const { return krr::csv::read_file((dir_ / name).string()); }
        nlohmann::json json(const fs::path& name) const { return nlohmann::json::parse(slurp(name)); }

        void write(const fs::path& name, const std::string& text) const {
            std::ofstream out(dir_ / name, std::ios::binary);
            out << text;
        }

        fs::path dir_;
    };

    // ------------------------------------------------------------------ theory

    TEST_F(CliTest, TheoryTwoRowsMatchEngineAndSlope) {
        ASSERT_EQ(krr("theory --alpha 2 --r 0.5 --sigma 0 --lam 0 --p 100000 --n 100,1000"), 0) << slurp("stderr.txt");
        const auto t = table("theory.csv");
        ASSERT_EQ(t.rows.size(), 2u);
        const auto total = t.numeric_column("total");
        const krr::Spectrum s = krr::power_law_spectrum({2.0, 0.5, 100000});
        EXPECT_EQ(total[0], krr::theory::excess_error_closed(100.0, 0.0, 0.0, s).total);
        EXPECT_EQ(total[1], krr::theory::excess_error_closed(1000.0, 0.0, 0.0, s).total);
        EXPECT_NEAR(std::log10(total[1] / total[0]), -2.0, 0.1);
        EXPECT_EQ(t.rows[0][t.require_column("regime")], "GreenNoiselessUnreg");
    }

    TEST_F(CliTest, TheoryNoiselessHasZeroNoiseColumn) {
        ASSERT_EQ(krr("theory --sigma 0 --lam 0.001 --n 10,100,1000"), 0) << slurp("stderr.txt");
        for (double v : table("theory.csv").numeric_column("noise_variance")) { EXPECT_EQ(v, 0.0); }
    }

    TEST_F(CliTest, TheoryDecayAtAlphaEqualsFixedLambdaEquivalent) {
        ASSERT_EQ(krr("theory --alpha 2 --r 0.5 --sigma 0.1 --ell 2 --lambda0 0.01 --n 100,1000 --out ell.csv"), 0);
        const auto by_ell = table("ell.csv");
        for (std::size_t i = 0; i < by_ell.rows.size(); ++i) {
            const double n = krr::csv::parse_number(by_ell.rows[i][0]);
            const std::string lam = krr::csv::format_number(0.01 * std::pow(n, -2.0));
            ASSERT_EQ(krr("theory --alpha 2 --r 0.5 --sigma 0.1 --lam " + lam + " --n " + by_ell.rows[i][0] +
                          " --out fixed.csv"),
                      0);
            const auto fixed = table("fixed.csv");
            for (const char* col : {"lambda", "sample_variance", "noise_variance", "total", "z"}) {
                EXPECT_EQ(fixed.rows[0][fixed.require_column(col)], by_ell.rows[i][by_ell.require_column(col)]) << col;
            }
        }
    }

    TEST_F(CliTest, LamAndEllTogetherIsUsageError) {
        EXPECT_EQ(krr("theory --lam 0.1 --ell 1"), 2);
        EXPECT_EQ(krr("simulate --lam 0.1 --ell 1 --n 8 --trials 1 --p 50"), 2);
        EXPECT_EQ(krr("simulate --grid-search --lam 0.1 --n 8 --trials 1 --p 50"), 2);
        EXPECT_FALSE(fs::exists(dir_ / "theory.csv"));
    }

    TEST_F(CliTest, UsageErrors) {
        EXPECT_EQ(krr(""), 2);
        EXPECT_EQ(krr("nonsense"), 2);
        EXPECT_EQ(krr("theory --alpha -1"), 2);
        EXPECT_EQ(krr("theory --n 10,abc"), 2);
        EXPECT_EQ(krr("theory --help"), 0);
    }

    // ---------------------------------------------------------------- simulate

    TEST_F(CliTest, SimulateIsReproducible) {
        const std::string base = "simulate --p 500 --sigma 0.5 --lam 0.01 --n 16,64 --trials 1 --seed 42 ";
        ASSERT_EQ(krr(base + "--out a.csv"), 0) << slurp("stderr.txt");
        ASSERT_EQ(krr(base + "--out b.csv"), 0);
        EXPECT_EQ(slurp("a.csv"), slurp("b.csv"));

        const std::string many = "simulate --p 500 --sigma 0.5 --ell 1 --lambda0 0.1 --n 16,64 --trials 12 --seed 9 ";
        ASSERT_EQ(krr(many + "--threads 1 --out t1.csv"), 0);
        ASSERT_EQ(krr(many + "--threads 5 --out t5.csv"), 0);
        EXPECT_EQ(slurp("t1.csv"), slurp("t5.csv"));
        EXPECT_NE(slurp("t1.csv"), slurp("a.csv"));
    }

    TEST_F(CliTest, SimulateDeskScaleAgreesWithTheory) {
        for (const char* sigma : {"0", "0.5"}) {
            ASSERT_EQ(krr(std::string("simulate --alpha 2 --r 0.5 --p 4000 --lam 0 --n 32,64,128 --trials 60 --seed 3 "
                                      "--sigma ") +
                          sigma),
                      0)
                << slurp("stderr.txt");
            const auto curve = [&] {
                std::ifstream in(dir_ / "simulate.csv");
                return krr::sim::read_learning_curve_csv(in);
            }();
            ASSERT_EQ(curve.rows.size(), 3u);
            for (const auto& row : curve.rows) {
                const double se = row.std_excess / std::sqrt(static_cast<double>(row.trials));
                const double tol = std::max(3.0 * se, 0.1 * row.theory_excess);
                EXPECT_NEAR(row.mean_excess, row.theory_excess, tol) << "sigma=" << sigma << " n=" << row.n;
            }
        }
    }

    TEST_F(CliTest, SimulateGridSearchRuns) {
        ASSERT_EQ(krr("simulate --p 300 --sigma 0.5 --grid-search --lambda-grid=-6,0,1 --folds 3 --n 40 --trials 2"), 0)
            << slurp("stderr.txt");
        const auto t = table("simulate.csv");
        ASSERT_EQ(t.rows.size(), 1u);
        EXPECT_EQ(t.rows[0][t.require_column("regime")].rfind("optimal-", 0), 0u);
    }

    // ----------------------------------------------------------- phase-diagram

    TEST_F(CliTest, PhaseDiagramDefaultsShowFourRegions) {
        ASSERT_EQ(krr("phase-diagram"), 0) << slurp("stderr.txt");
        const auto t = table("phase_diagram.csv");
        EXPECT_EQ(t.rows.size(), 41u * 34u);
        std::map<std::string, int> counts;
        for (const auto& row : t.rows) { ++counts[row[t.require_column("region")].substr(0, 5)]; }
        for (const char* region : {"Green", "RedNo", "BlueN", "Orang"}) { EXPECT_GT(counts[region], 0) << region; }
        EXPECT_TRUE(fs::exists(dir_ / "phase_diagram_lines.csv"));
    }

    TEST_F(CliTest, PhaseDiagramSmallPrefactorTiltsRegularizationLine) {
        ASSERT_EQ(krr("phase-diagram --lambda0 1e-4 --sigma 1e-5"), 0) << slurp("stderr.txt");
        const auto lines = table("phase_diagram_lines.csv");
        std::set<std::string> reg_ells;
        for (const auto& row : lines.rows) {
            if (row[0] == "regularization") { reg_ells.insert(row[2]); }
        }
        EXPECT_GT(reg_ells.size(), 1u);

        ASSERT_EQ(krr("phase-diagram --sigma 1e-5 --out unit.csv"), 0);
        std::set<std::string> unit_ells;
        for (const auto& row : table("unit_lines.csv").rows) {
            if (row[0] == "regularization") { unit_ells.insert(row[2]); }
        }
        EXPECT_EQ(unit_ells.size(), 1u);
    }

    TEST_F(CliTest, PhaseDiagramSingleCell) {
        ASSERT_EQ(krr("phase-diagram --n-min 100 --n-max 100 --n-points 1 --ell-min 1 --ell-max 1 --ell-points 1 "
                      "--no-inf"),
                  0)
            << slurp("stderr.txt");
        EXPECT_EQ(table("phase_diagram.csv").rows.size(), 1u);
    }

    // ---------------------------------------------------------------- estimate

    TEST_F(CliTest, EstimateRecoversPlantedExponents) {
        const auto data = krr::data::planted_power_law_data(2000, 2000, 2.0, 0.5, 0.0, 77);
        {
            std::ofstream out(dir_ / "planted.csv", std::ios::binary);
            krr::data::write_dataset_csv(out, data);
        }
        ASSERT_EQ(krr("estimate planted.csv --kernel linear --decomposition"), 0) << slurp("stderr.txt");
        const auto j = json("estimate.json");
        EXPECT_NEAR(j.at("alpha_hat").get<double>() / 2.0, 1.0, 0.10);
        EXPECT_NEAR(j.at("r_hat").get<double>() / 0.5, 1.0, 0.15);
        const double a = j.at("alpha_hat").get<double>(), r = j.at("r_hat").get<double>();
        const auto& ex = j.at("predicted_exponents");
        EXPECT_DOUBLE_EQ(ex.at("green").get<double>(), 2.0 * a * std::min(r, 1.0));
        EXPECT_EQ(ex.at("red").get<double>(), 0.0);
        EXPECT_EQ(j.at("n_tot").get<std::size_t>(), 2000u);
        EXPECT_TRUE(fs::exists(dir_ / "estimate_tails.csv"));
        EXPECT_TRUE(fs::exists(dir_ / "estimate_decomposition.csv"));
        EXPECT_EQ(table("estimate_tails.csv").rows.size(), 2001u);
    }

    TEST_F(CliTest, EstimateMissingLabelIsSchemaError) {
        write("nolabel.csv", "x1,x2\n1,2\n3,4\n5,7\n");
        EXPECT_EQ(krr("estimate nolabel.csv"), 4);
        EXPECT_NE(slurp("stderr.txt").find("label"), std::string::npos);
        EXPECT_EQ(krr("estimate missing.csv"), 4);
    }

    TEST_F(CliTest, EstimateRefusesAboveCapWithoutSubsample) {
        const auto data = krr::data::planted_power_law_data(300, 20, 1.5, 0.5, 0.1, 5);
        {
            std::ofstream out(dir_ / "big.csv", std::ios::binary);
            krr::data::write_dataset_csv(out, data);
        }
        EXPECT_EQ(krr("estimate big.csv --max-rows 200"), 4);
        EXPECT_NE(slurp("stderr.txt").find("--subsample"), std::string::npos);
        EXPECT_FALSE(fs::exists(dir_ / "estimate.json"));

        ASSERT_EQ(krr("estimate big.csv --max-rows 200 --subsample --seed 1 --capacity-range 2,50 "
                      "--source-range 2,50 --out s1.json"),
                  0)
            << slurp("stderr.txt");
        ASSERT_EQ(krr("estimate big.csv --max-rows 200 --subsample --seed 1 --capacity-range 2,50 "
                      "--source-range 2,50 --out s2.json"),
                  0);
        EXPECT_EQ(json("s1.json").at("n_tot").get<std::size_t>(), 200u);
        EXPECT_TRUE(json("s1.json").at("subsampled").get<bool>());
        EXPECT_EQ(slurp("s1_tails.csv"), slurp("s2_tails.csv"));
    }

    // --------------------------------------------------------------- fit-slope

    TEST_F(CliTest, FitSlopeSyntheticCurves) {
        write("power.csv", "n,total\n10,0.01\n100,0.0001\n1000,0.000001\n10000,0.00000001\n");
        ASSERT_EQ(krr("fit-slope power.csv"), 0) << slurp("stderr.txt");
        EXPECT_NEAR(json("fit_slope.json").at("slope").get<double>(), -2.0, 1e-12);

        write("flat.csv", "n,mean_excess\n10,0.3\n20,0.3\n40,0.3\n80,0.3\n");
        ASSERT_EQ(krr("fit-slope --curve flat.csv --out flat.json"), 0);
        EXPECT_EQ(json("flat.json").at("slope").get<double>(), 0.0);

        ASSERT_EQ(krr("fit-slope power.csv --n-min 50 --n-max 50000 --out win.json"), 0);
        EXPECT_EQ(json("win.json").at("points").get<std::size_t>(), 3u);
    }

    TEST_F(CliTest, FitSlopeTwoPointWindowIsDegenerate) {
        write("two.csv", "n,total\n10,1\n100,0.1\n");
        EXPECT_EQ(krr("fit-slope two.csv"), 3);
        EXPECT_NE(slurp("stderr.txt").find("window"), std::string::npos);
        write("noerr.csv", "n,foo\n10,1\n100,0.1\n1000,0.01\n");
        EXPECT_EQ(krr("fit-slope noerr.csv"), 4);
    }

    // ---------------------------------------------------------- optimal-lambda

    TEST_F(CliTest, OptimalLambdaMatchesEngine) {
        ASSERT_EQ(krr("optimal-lambda --alpha 2 --r 0.5 --sigma 0.5 --p 20000 --n 1000,10000 --lambda-grid=-8,1,0.05"),
                  0)
            << slurp("stderr.txt");
        const auto t = table("optimal_lambda.csv");
        ASSERT_EQ(t.rows.size(), 2u);
        const krr::Spectrum s = krr::power_law_spectrum({2.0, 0.5, 20000});
        const auto grid = krr::fit::log_grid(-8.0, 1.0, 0.05);
        const auto lam = t.numeric_column("lambda_star");
        const auto ex = t.numeric_column("excess_star");
        const auto direct = krr::theory::optimal_lambda(1000.0, 0.5, s, grid);
        EXPECT_EQ(lam[0], direct.lam_star);
        EXPECT_EQ(ex[0], direct.excess_star);
        EXPECT_LT(lam[1], lam[0]);
        for (const auto& row : t.rows) { EXPECT_EQ(row[t.require_column("at_grid_edge")], "0"); }
    }

    // ---------------------------------------------------- config and manifests

    TEST_F(CliTest, ConfigSuppliesFlagsAndFlagsOverride) {
        write("cfg.json", R"({"alpha": 1.5, "r": 0.25, "sigma": 0.1, "lam": 0.001, "n": [100, 1000]})");
        ASSERT_EQ(krr("theory --config cfg.json --out from_cfg.csv"), 0) << slurp("stderr.txt");
        ASSERT_EQ(krr("theory --alpha 1.5 --r 0.25 --sigma 0.1 --lam 0.001 --n 100,1000 --out direct.csv"), 0);
        EXPECT_EQ(slurp("from_cfg.csv"), slurp("direct.csv"));

        ASSERT_EQ(krr("theory --config cfg.json --alpha 2 --out override.csv"), 0);
        EXPECT_EQ(json("override.csv.manifest.json").at("parameters").at("alpha"), "2");

        // A schedule chosen on the command line replaces the one in the file.
        ASSERT_EQ(krr("theory --config cfg.json --ell 1 --out by_ell.csv"), 0) << slurp("stderr.txt");
        EXPECT_FALSE(json("by_ell.csv.manifest.json").at("parameters").contains("lam"));

        write("bad.json", "{not json");
        EXPECT_EQ(krr("theory --config bad.json"), 4);
    }

    TEST_F(CliTest, ManifestRerunIsByteIdentical) {
        ASSERT_EQ(krr("simulate --p 400 --sigma 0.5 --ell 0.5 --lambda0 0.1 --n 20,40 --trials 6 --seed 11 --threads 3 "
                      "--out run/curve.csv"),
                  0)
            << slurp("stderr.txt");
        const auto manifest = json("run/curve.csv.manifest.json");
        EXPECT_EQ(manifest.at("command"), "simulate");
        EXPECT_EQ(manifest.at("master_seed").get<std::uint64_t>(), 11u);
        EXPECT_EQ(manifest.at("version"), KRR_VERSION_STRING);
        EXPECT_EQ(manifest.at("outputs").at(0), "run/curve.csv");
        EXPECT_GE(manifest.at("wall_seconds").get<double>(), 0.0);

        const std::string first = slurp("run/curve.csv");
        fs::remove(dir_ / "run/curve.csv");
        ASSERT_EQ(krr("simulate --config run/curve.csv.manifest.json --threads 1"), 0) << slurp("stderr.txt");
        EXPECT_EQ(slurp("run/curve.csv"), first);
    }

    TEST_F(CliTest, OutputDirectoryFromEnvironment) {
        ASSERT_EQ(krr("theory --n 100", "KRR_OUTPUT_DIR=envout"), 0) << slurp("stderr.txt");
        EXPECT_TRUE(fs::exists(dir_ / "envout/theory.csv"));
        EXPECT_TRUE(fs::exists(dir_ / "envout/theory.csv.manifest.json"));
        ASSERT_EQ(krr("theory --n 100 --out-dir flagout", "KRR_OUTPUT_DIR=envout"), 0);
        EXPECT_TRUE(fs::exists(dir_ / "flagout/theory.csv"));
    }

}  // namespace
