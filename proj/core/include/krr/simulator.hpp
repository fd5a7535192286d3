#pragma once

#include "krr/regimes.hpp"
#include "krr/spectrum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace krr::sim {

    struct Dataset {
        Eigen::MatrixXd features;  ///< n x p, row mu is u_mu ~ N(0, diag lambda)
        Eigen::VectorXd labels;    ///< y = u . theta + sigma N(0, 1)
    };

    /// Teacher vector with positive entries sqrt(theta_k^2).
    Eigen::VectorXd teacher_vector(const Spectrum& spectrum);

    /// Draws features row by row, then the label noise, from a mt19937_64 seeded with seed.
    Dataset sample_dataset(const Spectrum& spectrum, std::size_t n, double sigma, std::uint64_t seed);

    enum class RidgeRoute { Auto, Primal, Dual };

    struct RidgeOptions {
        RidgeRoute route = RidgeRoute::Auto;
        /// Jitter relative to trace / size added when the lam = 0 system is not positive definite.
        double jitter = 1e-12;
    };

    /// Minimizer of (1/n)||Psi w - y||^2 + lam ||w||^2. Auto picks the dual n x n system when n < p.
    /// With lam = 0 the interpolating (minimum-norm) solution is returned.
    Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels, double lam,
                              const RidgeOptions& options = {});

    /// Population excess error sum_k lambda_k (w_k - theta_k)^2.
    double excess_error_empirical(const Eigen::VectorXd& w, const Spectrum& spectrum);

    struct FixedLambda {
        double lam = 0.0;
    };
    struct PowerLawLambda {
        double lambda0 = 1.0;
        regimes::Decay ell = regimes::Decay::infinite();
    };
    struct GridSearchLambda {
        std::vector<double> grid;
        int k_folds = 5;
    };
    using LambdaSchedule = std::variant<FixedLambda, PowerLawLambda, GridSearchLambda>;

    /// {0} together with 10^e for e = -10, -9.974, ... below 5.
    std::vector<double> default_lambda_grid();

    struct SimConfig {
        Spectrum spectrum;
        std::vector<std::size_t> n_values;
        double sigma = 0.0;
        LambdaSchedule schedule = FixedLambda{};
        int trials = 1;
        std::uint64_t master_seed = 0;
        /// Spectrum for the theory column; the simulation spectrum when empty.
        std::optional<Spectrum> theory_spectrum;
        /// Power-law exponents used to attach regime labels; labels read "unlabeled" when empty.
        std::optional<PowerLawParams> exponents;
        /// Worker threads for trials; 0 picks the hardware concurrency.
        unsigned threads = 0;

        void validate() const;
    };

    struct CurveRow {
        std::size_t n = 0;
        /// Regularization used; the median of the per-trial choices under grid search.
        double lam = 0.0;
        double mean_excess = 0.0;
        double std_excess = 0.0;
        int trials = 0;
        int failed_trials = 0;
        double theory_excess = 0.0;
        std::string regime;
    };

    struct LearningCurve {
        std::vector<CurveRow> rows;
    };

    /// Trial seed from (master, n, trial) through a splitmix64 chain.
    std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t n, std::uint64_t trial);

    /// Runs all trials, reducing per-n statistics in trial order. Throws NumericalError when more
    /// than 10% of the trials at some n fail.
    LearningCurve learning_curve(const SimConfig& config);

    /// k-fold cross-validated choice over contiguous folds; ties go to the larger lam.
    double grid_search_lambda(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                              std::span<const double> lam_grid, int k_folds = 5);

    struct SlopeFit {
        double slope = 0.0;
        double stderr_ = 0.0;
    };

    /// OLS of log mean_excess on log n over rows [first, last).
    SlopeFit fit_decay_exponent(const LearningCurve& curve, std::size_t first, std::size_t last);

    /// CSV with header n,lambda,mean_excess,std_excess,trials,theory_excess,regime.
    void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve);
    LearningCurve read_learning_curve_csv(std::istream& in);

}  // namespace krr::sim
