#include "krr/simulator.hpp"

#include "krr/csv.hpp"
#include "krr/errors.hpp"
#include "krr/fit.hpp"
#include "krr/theory.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

namespace krr::sim {

    namespace {
        std::uint64_t splitmix64(std::uint64_t x) {
            x += 0x9E3779B97F4A7C15ULL;
            x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
            x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
            return x ^ (x >> 31);
        }

        // Cholesky solve of a symmetric system; with allow_jitter, retries once with a
        // diagonal shift when the factorization is not positive definite.
        Eigen::VectorXd spd_solve(Eigen::MatrixXd A, const Eigen::VectorXd& b, bool allow_jitter, double jitter) {
            Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(A);
            auto healthy = [&]() {
                if (llt.info() != Eigen::Success) { return false; }
                const auto d = llt.matrixLLT().diagonal();
                const double lo = d.minCoeff(), hi = d.maxCoeff();
                return lo > 0.0 && lo * lo > 1e-15 * hi * hi;
            };
            if (healthy()) { return llt.solve(b); }
            if (!allow_jitter) { throw SingularSystem("ridge system is not positive definite"); }
            const double shift = jitter * A.trace() / static_cast<double>(A.rows());
            if (!(shift > 0.0)) { throw SingularSystem("ridge system is singular (zero trace)"); }
            A.diagonal().array() += shift;
            llt.compute(A);
            if (llt.info() != Eigen::Success) { throw SingularSystem("ridge system singular beyond jitter"); }
            return llt.solve(b);
        }

        double median(std::vector<double> v) {
            std::sort(v.begin(), v.end());
            const std::size_t h = v.size() / 2;
            return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
        }
    }  // namespace

    Eigen::VectorXd teacher_vector(const Spectrum& spectrum) { return spectrum.teacher_sq().array().sqrt(); }

    Dataset sample_dataset(const Spectrum& spectrum, std::size_t n, double sigma, std::uint64_t seed) {
        if (n < 1) { throw InvalidParameter("n must be >= 1"); }
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        const auto p = static_cast<Eigen::Index>(spectrum.size());
        const auto rows = static_cast<Eigen::Index>(n);
        const Eigen::VectorXd scale = spectrum.eigenvalues().array().sqrt();
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        Dataset ds;
        ds.features.resize(rows, p);
        for (Eigen::Index mu = 0; mu < rows; ++mu) {
            for (Eigen::Index k = 0; k < p; ++k) { ds.features(mu, k) = scale[k] * normal(rng); }
        }
        ds.labels = ds.features * teacher_vector(spectrum);
        for (Eigen::Index mu = 0; mu < rows; ++mu) { ds.labels[mu] += sigma * normal(rng); }
        return ds;
    }

    Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lam,
                              const RidgeOptions& options) {
        if (!(lam >= 0.0) || !std::isfinite(lam)) { throw InvalidParameter("lam must be finite and >= 0"); }
        if (X.rows() != y.size() || X.rows() == 0) { throw InvalidParameter("features and labels disagree"); }
        const auto n = X.rows();
        const auto p = X.cols();
        const double shift = static_cast<double>(n) * lam;
        RidgeRoute route = options.route;
        if (route == RidgeRoute::Auto) { route = n < p ? RidgeRoute::Dual : RidgeRoute::Primal; }
        const bool jitter = lam == 0.0;
        if (route == RidgeRoute::Dual) {
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
            K.selfadjointView<Eigen::Lower>().rankUpdate(X);
            K.diagonal().array() += shift;
            const Eigen::VectorXd a = spd_solve(std::move(K), y, jitter, options.jitter);
            return X.transpose() * a;
        }
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
        C.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
        C.diagonal().array() += shift;
        return spd_solve(std::move(C), X.transpose() * y, jitter, options.jitter);
    }

    double excess_error_empirical(const Eigen::VectorXd& w, const Spectrum& spectrum) {
        if (static_cast<std::size_t>(w.size()) != spectrum.size()) {
            throw InvalidParameter("weight length differs from spectrum size");
        }
        const auto& lam = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        double s = 0.0;
        for (Eigen::Index k = w.size() - 1; k >= 0; --k) {
            const double d = w[k] - std::sqrt(th[k]);
            s += lam[k] * d * d;
        }
        return s;
    }

    std::vector<double> default_lambda_grid() {
        std::vector<double> grid{0.0};
        for (long j = 0;; ++j) {
            const double e = -10.0 + 0.026 * static_cast<double>(j);
            if (e >= 5.0) { break; }
            grid.push_back(std::pow(10.0, e));
        }
        return grid;
    }

    void SimConfig::validate() const {
        if (trials < 1) { throw InvalidParameter("trials must be >= 1"); }
        if (n_values.empty()) { throw InvalidParameter("n_values must be non-empty"); }
        for (const auto n : n_values) {
            if (n < 1) { throw InvalidParameter("all n must be >= 1"); }
        }
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        if (const auto* pl = std::get_if<PowerLawLambda>(&schedule); pl && !(pl->lambda0 > 0.0)) {
            throw InvalidParameter("lambda0 must be > 0");
        }
        if (const auto* f = std::get_if<FixedLambda>(&schedule); f && !(f->lam >= 0.0)) {
            throw InvalidParameter("lam must be >= 0");
        }
        if (const auto* g = std::get_if<GridSearchLambda>(&schedule)) {
            if (g->grid.empty()) { throw InvalidParameter("grid-search lambda grid is empty"); }
            if (g->k_folds < 2) { throw InvalidParameter("k_folds must be >= 2"); }
        }
    }

    std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t n, std::uint64_t trial) {
        std::uint64_t s = splitmix64(master_seed);
        s = splitmix64(s ^ n);
        return splitmix64(s ^ (trial * 0xD1B54A32D192ED03ULL));
    }

    double grid_search_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const double> lam_grid,
                              int k_folds) {
        if (k_folds < 2) { throw InvalidParameter("k_folds must be >= 2"); }
        if (lam_grid.empty()) { throw InvalidParameter("lambda grid is empty"); }
        if (X.rows() != y.size()) { throw InvalidParameter("features and labels disagree"); }
        const Eigen::Index n = X.rows();
        if (n < k_folds) { throw InsufficientData("grid search needs at least k_folds samples"); }
        const Eigen::Index p = X.cols();
        std::vector<double> mse(lam_grid.size(), 0.0);

        for (int f = 0; f < k_folds; ++f) {
            const Eigen::Index v0 = n * f / k_folds;
            const Eigen::Index v1 = n * (f + 1) / k_folds;
            const Eigen::Index nv = v1 - v0;
            const Eigen::Index nt = n - nv;
            Eigen::MatrixXd Xt(nt, p);
            Eigen::VectorXd yt(nt);
            Xt.topRows(v0) = X.topRows(v0);
            Xt.bottomRows(n - v1) = X.bottomRows(n - v1);
            yt.head(v0) = y.head(v0);
            yt.tail(n - v1) = y.tail(n - v1);
            const auto Xv = X.middleRows(v0, nv);
            const auto yv = y.segment(v0, nv);

            // Predictions are M diag(1 / (d + nt lam)) c in the eigenbasis of the training system.
            Eigen::MatrixXd M;
            Eigen::VectorXd c;
            Eigen::VectorXd d;
            if (nt < p) {
                Eigen::MatrixXd K = Xt * Xt.transpose();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
                d = es.eigenvalues();
                M = (Xv * Xt.transpose()) * es.eigenvectors();
                c = es.eigenvectors().transpose() * yt;
            } else {
                Eigen::MatrixXd C = Xt.transpose() * Xt;
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
                d = es.eigenvalues();
                M = Xv * es.eigenvectors();
                c = es.eigenvectors().transpose() * (Xt.transpose() * yt);
            }
            const double cutoff = 1e-12 * std::max(d.maxCoeff(), 0.0);
            for (std::size_t i = 0; i < lam_grid.size(); ++i) {
                const double shift = static_cast<double>(nt) * lam_grid[i];
                Eigen::VectorXd coef(d.size());
                for (Eigen::Index j = 0; j < d.size(); ++j) {
                    const double den = d[j] + shift;
                    coef[j] = (shift == 0.0 && d[j] <= cutoff) ? 0.0 : c[j] / den;
                }
                const Eigen::VectorXd resid = M * coef - yv;
                mse[i] += resid.squaredNorm() / static_cast<double>(nv) / static_cast<double>(k_folds);
            }
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < lam_grid.size(); ++i) {
            if (mse[i] < mse[best] || (mse[i] == mse[best] && lam_grid[i] > lam_grid[best])) { best = i; }
        }
        return lam_grid[best];
    }

    LearningCurve learning_curve(const SimConfig& config) {
        config.validate();
        std::vector<std::size_t> ns = config.n_values;
        std::sort(ns.begin(), ns.end());
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
        const auto trials = static_cast<std::size_t>(config.trials);

        struct Outcome {
            double excess = 0.0;
            double lam = 0.0;
            bool failed = false;
        };
        std::vector<Outcome> outcomes(ns.size() * trials);

        auto lam_for = [&](std::size_t n, const Dataset& ds) -> double {
            return std::visit(
                [&](const auto& s) -> double {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, FixedLambda>) {
                        return s.lam;
                    } else if constexpr (std::is_same_v<T, PowerLawLambda>) {
                        return s.ell.lambda_at(s.lambda0, static_cast<double>(n));
                    } else {
                        return grid_search_lambda(ds.features, ds.labels, s.grid, s.k_folds);
                    }
                },
                config.schedule);
        };

        auto run_task = [&](std::size_t task) {
            const std::size_t ni = task / trials;
            const std::size_t t = task % trials;
            const std::size_t n = ns[ni];
            Outcome& out = outcomes[task];
            try {
                const auto ds = sample_dataset(config.spectrum, n, config.sigma, trial_seed(config.master_seed, n, t));
                out.lam = lam_for(n, ds);
                const auto w = ridge_fit(ds.features, ds.labels, out.lam);
                out.excess = excess_error_empirical(w, config.spectrum);
                out.failed = !std::isfinite(out.excess);
            } catch (const NumericalError&) {
                out.failed = true;
            } catch (const InsufficientData&) { out.failed = true; }
        };

        unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
        workers = static_cast<unsigned>(std::min<std::size_t>(workers, outcomes.size()));
        if (workers <= 1) {
            for (std::size_t i = 0; i < outcomes.size(); ++i) { run_task(i); }
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&]() {
                    for (std::size_t i = next.fetch_add(1); i < outcomes.size(); i = next.fetch_add(1)) { run_task(i); }
                });
            }
            for (auto& th : pool) { th.join(); }
        }

        const Spectrum& theory_spec = config.theory_spectrum ? *config.theory_spectrum : config.spectrum;
        LearningCurve curve;
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            const double n = static_cast<double>(ns[ni]);
            CurveRow row;
            row.n = ns[ni];
            std::vector<double> values;
            std::vector<double> lams;
            for (std::size_t t = 0; t < trials; ++t) {
                const auto& o = outcomes[ni * trials + t];
                if (o.failed) {
                    ++row.failed_trials;
                    continue;
                }
                values.push_back(o.excess);
                lams.push_back(o.lam);
            }
            if (static_cast<double>(row.failed_trials) > 0.1 * static_cast<double>(trials)) {
                throw NumericalError("too many failed trials at n = " + std::to_string(row.n) + " (" +
                                     std::to_string(row.failed_trials) + " of " + std::to_string(trials) + ")");
            }
            row.trials = static_cast<int>(values.size());
            double sum = 0.0;
            for (const double v : values) { sum += v; }
            row.mean_excess = sum / static_cast<double>(values.size());
            double ss = 0.0;
            for (const double v : values) { ss += (v - row.mean_excess) * (v - row.mean_excess); }
            row.std_excess = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
            row.lam = median(lams);

            try {
                if (const auto* g = std::get_if<GridSearchLambda>(&config.schedule)) {
                    row.theory_excess = theory::optimal_lambda(n, config.sigma, theory_spec, g->grid).excess_star;
                } else {
                    const double lam = std::holds_alternative<FixedLambda>(config.schedule)
                                           ? std::get<FixedLambda>(config.schedule).lam
                                           : std::get<PowerLawLambda>(config.schedule).ell.lambda_at(
                                                 std::get<PowerLawLambda>(config.schedule).lambda0, n);
                    row.theory_excess = theory::excess_error_closed(n, lam, config.sigma, theory_spec).total;
                }
            } catch (const NumericalError&) { row.theory_excess = std::numeric_limits<double>::quiet_NaN(); }

            if (!config.exponents) {
                row.regime = "unlabeled";
            } else {
                const auto& ex = *config.exponents;
                if (std::holds_alternative<GridSearchLambda>(config.schedule)) {
                    row.regime = "optimal-" + regimes::to_string(regimes::optimal_decay(ex.alpha, ex.r, config.sigma, n).phase);
                } else {
                    regimes::RegimeQuery q{ex.alpha, ex.r, config.sigma, regimes::Decay::infinite(), 1.0, n};
                    if (const auto* f = std::get_if<FixedLambda>(&config.schedule)) {
                        if (f->lam > 0.0) {
                            q.ell = regimes::Decay::finite(0.0);
                            q.lambda0 = f->lam;
                        }
                    } else {
                        const auto& pl = std::get<PowerLawLambda>(config.schedule);
                        q.ell = pl.ell;
                        q.lambda0 = pl.lambda0;
                    }
                    row.regime = regimes::label_name(regimes::classify(q));
                }
            }
            curve.rows.push_back(std::move(row));
        }
        return curve;
    }

    SlopeFit fit_decay_exponent(const LearningCurve& curve, std::size_t first, std::size_t last) {
        if (first >= last || last > curve.rows.size()) { throw DegenerateWindow("window outside the curve"); }
        std::vector<double> x, y;
        for (std::size_t i = first; i < last; ++i) {
            x.push_back(static_cast<double>(curve.rows[i].n));
            y.push_back(curve.rows[i].mean_excess);
        }
        const auto f = fit::loglog(x, y, 3);
        return {f.slope, f.slope_stderr};
    }

    void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve) {
        csv::write_row(out, {"n", "lambda", "mean_excess", "std_excess", "trials", "theory_excess", "regime"});
        for (const auto& r : curve.rows) {
            csv::write_row(out, {std::to_string(r.n), csv::format_number(r.lam), csv::format_number(r.mean_excess),
                                 csv::format_number(r.std_excess), std::to_string(r.trials),
                                 csv::format_number(r.theory_excess), r.regime});
        }
    }

    LearningCurve read_learning_curve_csv(std::istream& in) {
        const auto table = csv::read(in);
        const auto cn = table.require_column("n");
        const auto cl = table.require_column("lambda");
        const auto cm = table.require_column("mean_excess");
        const auto cs = table.require_column("std_excess");
        const auto ct = table.require_column("trials");
        const auto cth = table.require_column("theory_excess");
        const auto cr = table.require_column("regime");
        LearningCurve curve;
        for (const auto& row : table.rows) {
            CurveRow r;
            const double n = csv::parse_number(row[cn]);
            if (!(n >= 1.0) || n != std::floor(n)) { throw SchemaError("n must be a positive integer"); }
            r.n = static_cast<std::size_t>(n);
            r.lam = csv::parse_number(row[cl]);
            r.mean_excess = csv::parse_number(row[cm]);
            r.std_excess = csv::parse_number(row[cs]);
            r.trials = static_cast<int>(csv::parse_number(row[ct]));
            r.theory_excess = csv::parse_number(row[cth]);
            r.regime = row[cr];
            curve.rows.push_back(std::move(r));
        }
        return curve;
    }

}  // namespace krr::sim
