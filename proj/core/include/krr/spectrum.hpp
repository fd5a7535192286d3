#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>

namespace krr {

    /// Power-law ansatz: lambda_k = k^-alpha, theta_k^2 lambda_k = k^(-1-2 r alpha).
    struct PowerLawParams {
        double alpha = 2.0;
        double r = 0.5;
        std::size_t p = 10000;

        void validate() const;
    };

    /// Default truncations for simulation-facing and theory-facing calls.
    inline constexpr std::size_t kSimulationP = 10000;
    inline constexpr std::size_t kTheoryP = 100000;

    /// Covariance eigenvalues with squared teacher weights.
    class Spectrum {
    public:
        /// Throws InvalidParameter unless eigenvalues are positive, non-increasing,
        /// and teacher_sq is non-negative of equal length.
        Spectrum(Eigen::VectorXd eigenvalues, Eigen::VectorXd teacher_sq);

        [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
        [[nodiscard]] const Eigen::VectorXd& teacher_sq() const { return teacher_sq_; }
        [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(eigenvalues_.size()); }

    private:
        Eigen::VectorXd eigenvalues_;
        Eigen::VectorXd teacher_sq_;
    };

    Spectrum power_law_spectrum(const PowerLawParams& params);

    /// theta^T Sigma theta, summed from the smallest term upward.
    double rho(const Spectrum& spectrum);

    enum class ConditionVerdict { Satisfied, SatisfiedAtBoundary, Violated };

    std::string to_string(ConditionVerdict verdict);

    /// Diagnostic on finite-p proxies of tr Sigma^(1/alpha) and ||Sigma^(1/2-r) theta||^2.
    ///
    /// The growth estimate is log10 of the ratio between the partial-sum increments over
    /// the last two decades of indices: negative for convergent tails, about zero for
    /// logarithmic divergence, positive for power divergence.
    struct SourceCapacityReport {
        double capacity_growth = 0.0;
        double source_growth = 0.0;
        ConditionVerdict capacity = ConditionVerdict::Satisfied;
        ConditionVerdict source = ConditionVerdict::Satisfied;
        ConditionVerdict overall = ConditionVerdict::Satisfied;
        bool bounded = true;
    };

    SourceCapacityReport check_source_capacity(const Spectrum& spectrum, double alpha, double r,
                                               double growth_threshold = 0.05);

    /// CSV with header k,eigenvalue,teacher_sq.
    void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);
    Spectrum read_spectrum_csv(std::istream& in);

}  // namespace krr
