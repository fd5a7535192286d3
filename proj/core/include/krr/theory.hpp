#pragma once

#include "krr/spectrum.hpp"

#include <span>

namespace krr::theory {

    enum class ZBranch { Regularization, Spectral };

    struct ZOptions {
        double tol = 1e-12;
        int max_iter = 300;
        int max_expansions = 64;
    };

    /// Root of z = n lam + (z/n) sum_k lam_k / (z/n + lam_k).
    struct ZSolution {
        double z = 0.0;
        double residual = 0.0;
        ZBranch branch = ZBranch::Spectral;
        int iterations = 0;
    };

    /// Brent bracketing in log z. The lower end is max(n lam, tiny); the upper end is
    /// pushed out with doubling log-steps until the sign flips.
    ZSolution solve_z(double n, double lam, const Spectrum& spectrum, const ZOptions& options = {});

    /// Continuum approximation z = n lam + (z/n)^(1-1/alpha) int_{(z/n)^(1/alpha)}^inf dx/(1+x^alpha)
    /// for the pure power law with unit prefactor. Diagnostic only.
    double solve_z_continuum(double n, double lam, double alpha);

    struct ErrorDecomposition {
        double sample_variance = 0.0;
        double noise_variance = 0.0;
        double total = 0.0;
        double z = 0.0;
    };

    /// Excess error eps_g - sigma^2 split into sample and noise variance terms.
    ErrorDecomposition excess_error_closed(double n, double lam, double sigma, const Spectrum& spectrum,
                                           const ZOptions& options = {});

    /// Full generalization error eps_g including the noise floor.
    double generalization_error_closed(double n, double lam, double sigma, const Spectrum& spectrum,
                                       const ZOptions& options = {});

    struct FixedPointOptions {
        double damping = 0.5;
        double tol = 1e-10;
        long max_iter = 100000;
    };

    struct FixedPointState {
        double V = 0.0;
        double q = 0.0;
        double m = 0.0;
        double V_hat = 0.0;
        double q_hat = 0.0;
        double m_hat = 0.0;
        double rho = 0.0;
        /// rho - 2m + q, accumulated mode by mode.
        double excess = 0.0;
        /// Regularization used in the iteration; differs from the request only when lam = 0 and p > n.
        double effective_lam = 0.0;
        bool converged = false;
        long iterations = 0;
        double residual = 0.0;
    };

    /// Damped iteration of the six order-parameter equations starting from V = q = m = 0.
    /// p is the dimension of the spectrum. Throws NegativeExcess when the result is below -tol.
    FixedPointState solve_fixed_point(double n, double lam, double sigma, const Spectrum& spectrum,
                                      const FixedPointOptions& options = {});

    struct OptimalLambda {
        double lam_star = 0.0;
        double excess_star = 0.0;
    };

    /// Grid minimizer of the closed-form excess error; ties go to the larger lam.
    /// Grid points whose evaluation fails numerically are skipped.
    OptimalLambda optimal_lambda(double n, double sigma, const Spectrum& spectrum, std::span<const double> lam_grid,
                                 const ZOptions& options = {});

}  // namespace krr::theory
