#include "cli_support.hpp"

#include "krr/csv.hpp"
#include "krr/dataspec.hpp"
#include "krr/errors.hpp"
#include "krr/fit.hpp"
#include "krr/regimes.hpp"
#include "krr/simulator.hpp"
#include "krr/spectrum.hpp"
#include "krr/theory.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#ifndef KRR_VERSION
#define KRR_VERSION "0.0.0"
#endif

namespace krr::cli {

    namespace {

        /// Input exceeds the dense eigendecomposition cap.
        class DataCapExceeded : public Error {
        public:
            using Error::Error;
        };

        struct OutputOptions {
            std::string out;
            std::string out_dir = default_output_dir().string();
        };

        void add_output_options(CLI::App* sub, OutputOptions& o, const std::string& what) {
            sub->add_option("--out", o.out, "Output path for the " + what);
            sub->add_option("--out-dir", o.out_dir, "Directory for default output names (env KRR_OUTPUT_DIR)");
        }

        /// Lambda schedule flags shared by theory and simulate.
        struct ScheduleOptions {
            std::optional<double> lam;
            std::string ell;
            double lambda0 = 1.0;
        };

        void add_schedule_options(CLI::App* sub, ScheduleOptions& s, CLI::Option** lam_opt, CLI::Option** ell_opt) {
            *lam_opt = sub->add_option("--lam", s.lam, "Fixed ridge lambda");
            *ell_opt = sub->add_option("--ell", s.ell, "Decay exponent: lambda = lambda0 n^-ell ('inf' for ridgeless)");
            sub->add_option("--lambda0", s.lambda0, "Prefactor of the power-law schedule");
            (*lam_opt)->excludes(*ell_opt);
        }

        /// Regime query for a fixed or power-law lambda at sample size n.
        regimes::RegimeQuery regime_query(double alpha, double r, double sigma, const ScheduleOptions& s, double n) {
            regimes::RegimeQuery q{alpha, r, sigma, regimes::Decay::infinite(), 1.0, n};
            if (!s.ell.empty()) {
                q.ell = regimes::Decay::parse(s.ell);
                q.lambda0 = s.lambda0;
            } else if (s.lam && *s.lam > 0.0) {
                q.ell = regimes::Decay::finite(0.0);
                q.lambda0 = *s.lam;
            }
            return q;
        }

        double lambda_at(const ScheduleOptions& s, double n) {
            if (!s.ell.empty()) { return regimes::Decay::parse(s.ell).lambda_at(s.lambda0, n); }
            return s.lam.value_or(0.0);
        }

        std::vector<double> lambda_grid_from(const std::string& text) {
            if (text.empty()) { return sim::default_lambda_grid(); }
            const auto v = parse_list(text, "--lambda-grid");
            if (v.size() != 3) { throw InvalidParameter("--lambda-grid expects lo_exp,hi_exp,step"); }
            return fit::log_grid(v[0], v[1], v[2]);
        }

        std::ifstream open_input(const std::string& path) {
            std::ifstream in(path, std::ios::binary);
            if (!in) { throw IoError("cannot open '" + path + "'"); }
            return in;
        }

        // ---------------------------------------------------------------- theory

        struct TheoryArgs {
            double alpha = 2.0;
            double r = 0.5;
            double sigma = 0.0;
            std::size_t p = kTheoryP;
            std::string n = "100,1000,10000";
            ScheduleOptions schedule;
            OutputOptions output;
        };

        std::vector<std::string> run_theory(const TheoryArgs& a) {
            const Spectrum spectrum = power_law_spectrum({a.alpha, a.r, a.p});
            const auto ns = parse_list(a.n, "--n");
            const auto path = resolve_output(a.output.out, a.output.out_dir, "theory.csv");
            write_file(path, [&](std::ostream& out) {
                csv::write_row(out, {"n", "lambda", "sample_variance", "noise_variance", "total", "z", "regime"});
                for (double n : ns) {
                    if (!(n > 0.0)) { throw InvalidParameter("--n: sample sizes must be positive"); }
                    const double lam = lambda_at(a.schedule, n);
                    const auto e = theory::excess_error_closed(n, lam, a.sigma, spectrum);
                    const auto label = regimes::classify(regime_query(a.alpha, a.r, a.sigma, a.schedule, n));
                    csv::write_row(out, {csv::format_number(n), csv::format_number(lam),
                                         csv::format_number(e.sample_variance), csv::format_number(e.noise_variance),
                                         csv::format_number(e.total), csv::format_number(e.z),
                                         regimes::label_name(label)});
                }
            });
            return {path.string()};
        }

        // -------------------------------------------------------------- simulate

        struct SimulateArgs {
            double alpha = 2.0;
            double r = 0.5;
            double sigma = 0.0;
            std::size_t p = 4000;
            std::size_t theory_p = 0;
            std::string n = "32,64,128,256,512,1024";
            int trials = 10;
            std::uint64_t seed = 0;
            unsigned threads = 0;
            bool grid_search = false;
            std::string lambda_grid;
            int folds = 5;
            ScheduleOptions schedule;
            OutputOptions output;
        };

        std::vector<std::string> run_simulate(const SimulateArgs& a) {
            sim::SimConfig cfg{.spectrum = power_law_spectrum({a.alpha, a.r, a.p}),
                               .n_values = parse_size_list(a.n, "--n"),
                               .sigma = a.sigma,
                               .schedule = sim::FixedLambda{a.schedule.lam.value_or(0.0)},
                               .trials = a.trials,
                               .master_seed = a.seed,
                               .theory_spectrum = std::nullopt,
                               .exponents = PowerLawParams{a.alpha, a.r, a.p},
                               .threads = a.threads};
            if (a.theory_p > 0) { cfg.theory_spectrum = power_law_spectrum({a.alpha, a.r, a.theory_p}); }
            if (a.grid_search) {
                cfg.schedule = sim::GridSearchLambda{lambda_grid_from(a.lambda_grid), a.folds};
            } else if (!a.schedule.ell.empty()) {
                cfg.schedule = sim::PowerLawLambda{a.schedule.lambda0, regimes::Decay::parse(a.schedule.ell)};
            }
            const auto curve = sim::learning_curve(cfg);
            const auto path = resolve_output(a.output.out, a.output.out_dir, "simulate.csv");
            write_file(path, [&](std::ostream& out) { sim::write_learning_curve_csv(out, curve); });
            return {path.string()};
        }

        // --------------------------------------------------------- phase-diagram

        struct PhaseArgs {
            double alpha = 2.0;
            double r = 0.5;
            double sigma = 0.1;
            double lambda0 = 1.0;
            double n_min = 1.0;
            double n_max = 1e10;
            std::size_t n_points = 41;
            double ell_min = 0.0;
            double ell_max = 4.0;
            std::size_t ell_points = 33;
            bool no_inf = false;
            OutputOptions output;
        };

        std::vector<std::string> run_phase_diagram(const PhaseArgs& a) {
            const auto n_grid = fit::logspace(a.n_min, a.n_max, a.n_points);
            if (a.ell_points == 0 || !(a.ell_max >= a.ell_min)) { throw InvalidParameter("invalid ell grid"); }
            std::vector<regimes::Decay> ell_grid;
            for (std::size_t i = 0; i < a.ell_points; ++i) {
                const double t = a.ell_points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(a.ell_points - 1);
                ell_grid.push_back(regimes::Decay::finite(a.ell_min + t * (a.ell_max - a.ell_min)));
            }
            if (!a.no_inf) { ell_grid.push_back(regimes::Decay::infinite()); }

            const auto diagram = regimes::phase_diagram(a.alpha, a.r, a.sigma, a.lambda0, n_grid, ell_grid);
            const auto grid_path = resolve_output(a.output.out, a.output.out_dir, "phase_diagram.csv");
            const auto lines_path = sibling(grid_path, "_lines.csv");
            write_file(grid_path, [&](std::ostream& out) { regimes::write_phase_grid_csv(out, diagram); });
            write_file(lines_path, [&](std::ostream& out) { regimes::write_crossover_lines_csv(out, diagram.lines); });

            std::map<std::string, std::size_t> counts;
            for (const auto& cell : diagram.cells) { ++counts[regimes::to_string(cell.label.region)]; }
            for (const auto& [region, count] : counts) { std::cout << region << ' ' << count << '\n'; }
            return {grid_path.string(), lines_path.string()};
        }

        // -------------------------------------------------------------- estimate

        struct EstimateArgs {
            std::string dataset;
            std::string kernel = "rbf";
            double gamma = 1.0;
            int degree = 5;
            std::string capacity_range;
            std::string source_range;
            std::size_t max_rows = 8000;
            bool subsample = false;
            std::uint64_t seed = 0;
            std::optional<double> ell;
            bool decomposition = false;
            OutputOptions output;
        };

        data::IndexRange range_from(const std::string& text, data::IndexRange fallback, const std::string& what) {
            if (text.empty()) { return fallback; }
            const auto v = parse_size_list(text, what);
            if (v.size() != 2 || v[0] > v[1]) { throw InvalidParameter(what + " expects first,last"); }
            return {v[0], v[1]};
        }

        data::TabularData take_rows(const data::TabularData& in, std::vector<std::size_t> rows) {
            data::TabularData out;
            out.feature_names = in.feature_names;
            out.features.resize(static_cast<Eigen::Index>(rows.size()), in.features.cols());
            Eigen::VectorXd labels(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto src = static_cast<Eigen::Index>(rows[i]);
                out.features.row(static_cast<Eigen::Index>(i)) = in.features.row(src);
                labels[static_cast<Eigen::Index>(i)] = (*in.labels)[src];
            }
            out.labels = labels;
            return out;
        }

        std::vector<std::string> run_estimate(const EstimateArgs& a, nlohmann::json& summary) {
            auto in = open_input(a.dataset);
            data::TabularData table = data::read_dataset_csv(in);
            if (!table.labels) { throw SchemaError("'" + a.dataset + "' has no label column 'y'"); }

            const auto total_rows = static_cast<std::size_t>(table.features.rows());
            if (a.max_rows == 0) { throw InvalidParameter("--max-rows must be positive"); }
            bool subsampled = false;
            if (total_rows > a.max_rows) {
                if (!a.subsample) {
                    throw DataCapExceeded("dataset has " + std::to_string(total_rows) + " rows, above the cap of " +
                                          std::to_string(a.max_rows) + "; pass --subsample or raise --max-rows");
                }
                std::vector<std::size_t> rows(total_rows);
                std::iota(rows.begin(), rows.end(), std::size_t{0});
                std::mt19937_64 rng(a.seed);
                std::shuffle(rows.begin(), rows.end(), rng);
                rows.resize(a.max_rows);
                std::sort(rows.begin(), rows.end());
                table = take_rows(table, std::move(rows));
                subsampled = true;
            }

            data::KernelSpec kernel{data::kernel_kind_from_string(a.kernel), a.gamma, a.degree};
            kernel.validate();
            const auto K = data::gram_matrix(table.features, kernel);
            const auto dec = data::feature_decomposition(K, *table.labels);
            const auto tails = data::cumulative_tails(dec);
            const auto fallback = data::default_fit_range(dec.n_tot);
            const auto cap_range = range_from(a.capacity_range, fallback, "--capacity-range");
            const auto src_range = range_from(a.source_range, fallback, "--source-range");
            const auto est = data::estimate_alpha_r(tails, cap_range, src_range);

            const double m = std::min(est.r_hat, 1.0);
            const double noisy_ell = est.alpha_hat / (1.0 + 2.0 * est.alpha_hat * m);
            const double ell = a.ell.value_or(noisy_ell);
            summary = {
                {"dataset", a.dataset},
                {"n_tot", dec.n_tot},
                {"rows_in_file", total_rows},
                {"subsampled", subsampled},
                {"kernel", {{"kind", data::to_string(kernel.kind)}, {"gamma", kernel.gamma}, {"degree", kernel.degree}}},
                {"alpha_hat", est.alpha_hat},
                {"r_hat", est.r_hat},
                {"r2_capacity", est.r2_capacity},
                {"r2_source", est.r2_source},
                {"fit_range_capacity", {est.fit_range_capacity.first, est.fit_range_capacity.last}},
                {"fit_range_source", {est.fit_range_source.first, est.fit_range_source.last}},
                {"warnings", est.warnings},
                {"eigen_floor",
                 {{"floor", dec.floor}, {"excluded_modes", dec.excluded_modes.size()}, {"eigensolver", dec.eigensolver}}},
                {"predicted_exponents",
                 {{"green", regimes::green_exponent(est.alpha_hat, est.r_hat)},
                  {"red", 0.0},
                  {"ell", ell},
                  {"blue", regimes::blue_exponent(ell, est.r_hat)},
                  {"orange", regimes::orange_exponent(est.alpha_hat, ell)},
                  {"optimal_noisy_ell", noisy_ell},
                  {"optimal_noisy", 2.0 * est.alpha_hat * m / (1.0 + 2.0 * est.alpha_hat * m)}}},
            };

            const auto json_path = resolve_output(a.output.out, a.output.out_dir, "estimate.json");
            const auto tails_path = sibling(json_path, "_tails.csv");
            write_file(json_path, [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
            write_file(tails_path, [&](std::ostream& out) { data::write_tails_csv(out, tails); });
            std::vector<std::string> outputs{json_path.string(), tails_path.string()};
            if (a.decomposition) {
                const auto dec_path = sibling(json_path, "_decomposition.csv");
                write_file(dec_path, [&](std::ostream& out) { data::write_decomposition_csv(out, dec); });
                outputs.push_back(dec_path.string());
            }
            return outputs;
        }

        // ------------------------------------------------------------- fit-slope

        struct FitSlopeArgs {
            std::string curve;
            std::string x_column = "n";
            std::string y_column;
            double n_min = 0.0;
            double n_max = std::numeric_limits<double>::infinity();
            OutputOptions output;
        };

        std::vector<std::string> run_fit_slope(const FitSlopeArgs& a, nlohmann::json& summary) {
            auto in = open_input(a.curve);
            const auto table = csv::read(in);
            std::string y_name = a.y_column;
            if (y_name.empty()) {
                for (const char* candidate : {"mean_excess", "total", "theory_excess", "excess"}) {
                    if (table.column(candidate) >= 0) {
                        y_name = candidate;
                        break;
                    }
                }
                if (y_name.empty()) { throw SchemaError("no error column found; pass --y-column"); }
            }
            const auto xs = table.numeric_column(a.x_column);
            const auto ys = table.numeric_column(y_name);
            std::vector<double> x, y;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (xs[i] >= a.n_min && xs[i] <= a.n_max) {
                    x.push_back(xs[i]);
                    y.push_back(ys[i]);
                }
            }
            const auto f = fit::loglog(x, y);
            summary = {{"curve", a.curve},        {"x_column", a.x_column}, {"y_column", y_name},
                       {"slope", f.slope},        {"intercept", f.intercept}, {"slope_stderr", f.slope_stderr},
                       {"r2", f.r2},              {"points", f.points},       {"x_first", x.front()},
                       {"x_last", x.back()}};
            const auto path = resolve_output(a.output.out, a.output.out_dir, "fit_slope.json");
            write_file(path, [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
            std::cout << "slope " << csv::format_number(f.slope) << '\n';
            return {path.string()};
        }

        // -------------------------------------------------------- optimal-lambda

        struct OptimalArgs {
            double alpha = 2.0;
            double r = 0.5;
            double sigma = 0.5;
            std::size_t p = kTheoryP;
            std::string n = "10000,100000,1000000";
            std::string lambda_grid = "-12,2,0.02";
            OutputOptions output;
        };

        std::vector<std::string> run_optimal_lambda(const OptimalArgs& a) {
            const Spectrum spectrum = power_law_spectrum({a.alpha, a.r, a.p});
            const auto ns = parse_list(a.n, "--n");
            const auto grid = lambda_grid_from(a.lambda_grid);
            const auto path = resolve_output(a.output.out, a.output.out_dir, "optimal_lambda.csv");
            write_file(path, [&](std::ostream& out) {
                csv::write_row(out, {"n", "lambda_star", "excess_star", "at_grid_edge", "optimal_phase"});
                for (double n : ns) {
                    if (!(n > 0.0)) { throw InvalidParameter("--n: sample sizes must be positive"); }
                    const auto opt = theory::optimal_lambda(n, a.sigma, spectrum, grid);
                    const bool edge = opt.lam_star == grid.front() || opt.lam_star == grid.back();
                    const auto phase = regimes::optimal_decay(a.alpha, a.r, a.sigma, n).phase;
                    csv::write_row(out, {csv::format_number(n), csv::format_number(opt.lam_star),
                                         csv::format_number(opt.excess_star), edge ? "1" : "0",
                                         regimes::to_string(phase)});
                }
            });
            return {path.string()};
        }

        void add_spectrum_options(CLI::App* sub, double& alpha, double& r, double& sigma, std::size_t& p) {
            sub->add_option("--alpha", alpha, "Capacity exponent")->check(CLI::PositiveNumber);
            sub->add_option("--r", r, "Source exponent")->check(CLI::PositiveNumber);
            sub->add_option("--sigma", sigma, "Label noise standard deviation")->check(CLI::NonNegativeNumber);
            sub->add_option("--p", p, "Number of spectrum modes")->check(CLI::PositiveNumber);
        }

    }  // namespace

    int run(int argc, char** argv) {
        CLI::App app{"Kernel ridge regression learning curves: theory, simulation, regimes and spectra", "krr"};
        app.set_version_flag("--version", KRR_VERSION);
        app.require_subcommand(1);
        app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
        app.set_config();  // disables the built-in TOML reader; --config is handled before parsing

        auto add_config_option = [](CLI::App* sub) {
            sub->add_option("--config", "JSON file supplying any flag; explicit flags take precedence");
        };

        TheoryArgs theory_args;
        auto* theory_cmd = app.add_subcommand("theory", "Closed-form learning curve");
        add_spectrum_options(theory_cmd, theory_args.alpha, theory_args.r, theory_args.sigma, theory_args.p);
        theory_cmd->add_option("--n", theory_args.n, "Comma-separated sample sizes");
        CLI::Option *theory_lam = nullptr, *theory_ell = nullptr;
        add_schedule_options(theory_cmd, theory_args.schedule, &theory_lam, &theory_ell);
        add_output_options(theory_cmd, theory_args.output, "curve CSV");
        add_config_option(theory_cmd);

        SimulateArgs sim_args;
        auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo learning curve with theory column");
        add_spectrum_options(sim_cmd, sim_args.alpha, sim_args.r, sim_args.sigma, sim_args.p);
        sim_cmd->add_option("--theory-p", sim_args.theory_p, "Modes for the theory column (0: same as --p)");
        sim_cmd->add_option("--n", sim_args.n, "Comma-separated sample sizes");
        sim_cmd->add_option("--trials", sim_args.trials, "Trials per sample size")->check(CLI::PositiveNumber);
        sim_cmd->add_option("--seed", sim_args.seed, "Master seed");
        sim_cmd->add_option("--threads", sim_args.threads, "Worker threads (0: hardware concurrency)");
        CLI::Option *sim_lam = nullptr, *sim_ell = nullptr;
        add_schedule_options(sim_cmd, sim_args.schedule, &sim_lam, &sim_ell);
        auto* sim_grid = sim_cmd->add_flag("--grid-search", sim_args.grid_search, "Select lambda by k-fold CV");
        sim_grid->excludes(sim_lam)->excludes(sim_ell);
        sim_cmd->add_option("--lambda-grid", sim_args.lambda_grid, "CV grid as lo_exp,hi_exp,step (log10)");
        sim_cmd->add_option("--folds", sim_args.folds, "CV folds")->check(CLI::Range(2, 1000));
        add_output_options(sim_cmd, sim_args.output, "curve CSV");
        add_config_option(sim_cmd);

        PhaseArgs phase_args;
        auto* phase_cmd = app.add_subcommand("phase-diagram", "Regime labels over an (n, ell) grid");
        phase_cmd->add_option("--alpha", phase_args.alpha, "Capacity exponent")->check(CLI::PositiveNumber);
        phase_cmd->add_option("--r", phase_args.r, "Source exponent")->check(CLI::PositiveNumber);
        phase_cmd->add_option("--sigma", phase_args.sigma, "Noise level")->check(CLI::NonNegativeNumber);
        phase_cmd->add_option("--lambda0", phase_args.lambda0, "Schedule prefactor")->check(CLI::PositiveNumber);
        phase_cmd->add_option("--n-min", phase_args.n_min, "Smallest n");
        phase_cmd->add_option("--n-max", phase_args.n_max, "Largest n");
        phase_cmd->add_option("--n-points", phase_args.n_points, "Log-spaced n points");
        phase_cmd->add_option("--ell-min", phase_args.ell_min, "Smallest ell");
        phase_cmd->add_option("--ell-max", phase_args.ell_max, "Largest ell");
        phase_cmd->add_option("--ell-points", phase_args.ell_points, "Linearly spaced ell points");
        phase_cmd->add_flag("--no-inf", phase_args.no_inf, "Omit the ridgeless (ell = inf) row");
        add_output_options(phase_cmd, phase_args.output, "grid CSV (lines go to <stem>_lines.csv)");
        add_config_option(phase_cmd);

        EstimateArgs est_args;
        auto* est_cmd = app.add_subcommand("estimate", "Capacity and source exponents of a labelled dataset");
        est_cmd->add_option("dataset,--dataset", est_args.dataset, "CSV with feature columns and label column y")
            ->required();
        est_cmd->add_option("--kernel", est_args.kernel, "rbf, polynomial or linear");
        est_cmd->add_option("--gamma", est_args.gamma, "RBF width or polynomial scale");
        est_cmd->add_option("--degree", est_args.degree, "Polynomial degree");
        est_cmd->add_option("--capacity-range", est_args.capacity_range, "Fit range first,last for the capacity tail");
        est_cmd->add_option("--source-range", est_args.source_range, "Fit range first,last for the source tail");
        est_cmd->add_option("--max-rows", est_args.max_rows, "Cap on rows for the dense eigendecomposition");
        est_cmd->add_flag("--subsample", est_args.subsample, "Subsample rows above the cap");
        est_cmd->add_option("--seed", est_args.seed, "Subsampling seed");
        est_cmd->add_option("--ell", est_args.ell, "Decay exponent for the blue/orange predictions");
        est_cmd->add_flag("--decomposition", est_args.decomposition, "Also write <stem>_decomposition.csv");
        add_output_options(est_cmd, est_args.output, "estimate JSON (tails go to <stem>_tails.csv)");
        add_config_option(est_cmd);

        FitSlopeArgs fit_args;
        auto* fit_cmd = app.add_subcommand("fit-slope", "Log-log slope of a learning-curve CSV");
        fit_cmd->add_option("curve,--curve", fit_args.curve, "Curve CSV")->required();
        fit_cmd->add_option("--x-column", fit_args.x_column, "Sample-size column");
        fit_cmd->add_option("--y-column", fit_args.y_column, "Error column (default: first known error column)");
        fit_cmd->add_option("--n-min", fit_args.n_min, "Window lower bound");
        fit_cmd->add_option("--n-max", fit_args.n_max, "Window upper bound");
        add_output_options(fit_cmd, fit_args.output, "slope JSON");
        add_config_option(fit_cmd);

        OptimalArgs opt_args;
        auto* opt_cmd = app.add_subcommand("optimal-lambda", "Theory-optimal lambda per sample size");
        add_spectrum_options(opt_cmd, opt_args.alpha, opt_args.r, opt_args.sigma, opt_args.p);
        opt_cmd->add_option("--n", opt_args.n, "Comma-separated sample sizes");
        opt_cmd->add_option("--lambda-grid", opt_args.lambda_grid, "Search grid as lo_exp,hi_exp,step (log10)");
        add_output_options(opt_cmd, opt_args.output, "CSV");
        add_config_option(opt_cmd);

        std::vector<std::string> args(argv + 1, argv + argc);
        try {
            args = inject_config(args);
            std::reverse(args.begin(), args.end());
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? kOk : kUsage;
        } catch (const std::exception& e) {
            std::cerr << "krr: " << e.what() << '\n';
            return exit_code_for(e);
        }

        const auto start = std::chrono::steady_clock::now();
        try {
            CLI::App* sub = app.get_subcommands().front();
            RunManifest manifest;
            manifest.command = sub->get_name();
            manifest.version = KRR_VERSION;
            nlohmann::json summary;
            if (sub == theory_cmd) {
                manifest.outputs = run_theory(theory_args);
            } else if (sub == sim_cmd) {
                manifest.master_seed = sim_args.seed;
                manifest.outputs = run_simulate(sim_args);
            } else if (sub == phase_cmd) {
                manifest.outputs = run_phase_diagram(phase_args);
            } else if (sub == est_cmd) {
                manifest.master_seed = est_args.seed;
                manifest.outputs = run_estimate(est_args, summary);
            } else if (sub == fit_cmd) {
                manifest.outputs = run_fit_slope(fit_args, summary);
            } else {
                manifest.outputs = run_optimal_lambda(opt_args);
            }
            manifest.parameters = collect_parameters(*sub);
            manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_manifest(manifest.outputs.front(), manifest);
        } catch (const std::exception& e) {
            std::cerr << "krr: " << e.what() << '\n';
            return exit_code_for(e);
        }
        return kOk;
    }

}  // namespace krr::cli

int main(int argc, char** argv) { return krr::cli::run(argc, argv); }
