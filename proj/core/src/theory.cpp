#include "krr/theory.hpp"

#include "krr/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace krr::theory {

    namespace {
        constexpr double kTinyZ = 1e-300;

        void check_common(double n, double lam) {
            if (!(n >= 1.0) || !std::isfinite(n)) { throw InvalidParameter("n must be >= 1"); }
            if (!(lam >= 0.0) || !std::isfinite(lam)) { throw InvalidParameter("lam must be finite and >= 0"); }
        }

        struct RootResult {
            double z;
            int iterations;
        };

        // Root of an increasing function G(z) = g(z) / z, searched in u = log z by Brent's method.
        // Stops once |G| <= tol, which bounds the residual |g| by tol * z.
        template<typename Fn>
        RootResult log_brent(Fn G, double z_lo, const ZOptions& opt) {
            double a = std::log(z_lo);
            double fa = G(z_lo);
            if (fa == 0.0) { return {z_lo, 0}; }
            if (fa > 0.0) { throw NoBracket("z-equation has no sign change above the lower bracket"); }
            double step = 1.0;
            double b = a + step;
            double fb = G(std::exp(b));
            int expansions = 0;
            while (fb < 0.0) {
                if (++expansions > opt.max_expansions) {
                    throw NoBracket("z-equation upper bracket not found within the expansion limit");
                }
                a = b;
                fa = fb;
                step *= 2.0;
                b = a + step;
                fb = G(std::exp(b));
            }

            const double eps = std::numeric_limits<double>::epsilon();
            double c = a, fc = fa;
            double d = b - a, e = d;
            for (int it = 1; it <= opt.max_iter; ++it) {
                if ((fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0)) {
                    c = a;
                    fc = fa;
                    d = e = b - a;
                }
                if (std::abs(fc) < std::abs(fb)) {
                    a = b;
                    b = c;
                    c = a;
                    fa = fb;
                    fb = fc;
                    fc = fa;
                }
                const double tol1 = 2.0 * eps * std::abs(b) + 1e-300;
                const double xm = 0.5 * (c - b);
                if (std::abs(fb) <= opt.tol) { return {std::exp(b), it}; }
                if (std::abs(xm) <= tol1) {
                    throw NonConvergence("z-equation bracket collapsed above tolerance (relative residual " +
                                         std::to_string(std::abs(fb)) + ")");
                }
                if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
                    const double s = fb / fa;
                    double p, q;
                    if (a == c) {
                        p = 2.0 * xm * s;
                        q = 1.0 - s;
                    } else {
                        const double qq = fa / fc;
                        const double r = fb / fc;
                        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
                    }
                    if (p > 0.0) { q = -q; }
                    p = std::abs(p);
                    if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                        e = d;
                        d = p / q;
                    } else {
                        d = xm;
                        e = d;
                    }
                } else {
                    d = xm;
                    e = d;
                }
                a = b;
                fa = fb;
                b += std::abs(d) > tol1 ? d : std::copysign(tol1, xm);
                fb = G(std::exp(b));
            }
            throw NonConvergence("z-equation did not converge within max_iter");
        }

        // sum_k lam_k / (t + lam_k), smallest terms first.
        double spectral_sum(const Eigen::VectorXd& lam, double t) {
            double s = 0.0;
            for (Eigen::Index k = lam.size() - 1; k >= 0; --k) { s += lam[k] / (t + lam[k]); }
            return s;
        }
    }  // namespace

    ZSolution solve_z(double n, double lam, const Spectrum& spectrum, const ZOptions& options) {
        check_common(n, lam);
        const auto& ev = spectrum.eigenvalues();
        const double reg = n * lam;
        auto G = [&](double z) { return 1.0 - reg / z - spectral_sum(ev, z / n) / n; };
        const auto root = log_brent(G, std::max(reg, kTinyZ), options);
        ZSolution sol;
        sol.z = root.z;
        sol.residual = std::abs(root.z * G(root.z));
        sol.iterations = root.iterations;
        sol.branch = reg >= root.z - reg ? ZBranch::Regularization : ZBranch::Spectral;
        return sol;
    }

    double solve_z_continuum(double n, double lam, double alpha) {
        check_common(n, lam);
        if (!(alpha > 1.0)) { throw InvalidParameter("alpha must be > 1"); }
        boost::math::quadrature::exp_sinh<double> integrator;
        // int_1^inf du / (1 + t u^alpha) replaces sum_k 1 / (1 + t k^alpha).
        auto J = [&](double t) {
            return integrator.integrate([&](double u) { return 1.0 / (1.0 + t * std::pow(u, alpha)); }, 1.0,
                                        std::numeric_limits<double>::infinity());
        };
        const double reg = n * lam;
        auto G = [&](double z) { return 1.0 - reg / z - J(z / n) / n; };
        ZOptions opt;
        opt.tol = 1e-10;
        return log_brent(G, std::max(reg, 1e-200), opt).z;
    }

    ErrorDecomposition excess_error_closed(double n, double lam, double sigma, const Spectrum& spectrum,
                                           const ZOptions& options) {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) { throw InvalidParameter("sigma must be >= 0"); }
        const auto zs = solve_z(n, lam, spectrum, options);
        const auto& ev = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        const double t = zs.z / n;
        double b = 0.0;
        double s = 0.0;
        for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
            const double den = (t + ev[k]) * (t + ev[k]);
            b += th[k] * ev[k] / den;
            s += ev[k] * ev[k] / den;
        }
        b *= t * t;
        s /= n;
        const double denom = 1.0 - s;
        if (!(denom > 0.0)) {
            throw DegenerateDenominator("closed-form denominator 1 - S is not positive (S = " + std::to_string(s) +
                                        ")");
        }
        ErrorDecomposition out;
        out.z = zs.z;
        out.sample_variance = b / denom;
        out.noise_variance = sigma * sigma * s / denom;
        out.total = out.sample_variance + out.noise_variance;
        return out;
    }

    double generalization_error_closed(double n, double lam, double sigma, const Spectrum& spectrum,
                                       const ZOptions& options) {
        const auto zs = solve_z(n, lam, spectrum, options);
        const auto& ev = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        const double t = zs.z / n;
        double b = 0.0;
        double s = 0.0;
        for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
            const double den = (t + ev[k]) * (t + ev[k]);
            b += th[k] * ev[k] / den;
            s += ev[k] * ev[k] / den;
        }
        const double denom = 1.0 - s / n;
        if (!(denom > 0.0)) { throw DegenerateDenominator("closed-form denominator 1 - S is not positive"); }
        return (t * t * b + sigma * sigma) / denom;
    }

    FixedPointState solve_fixed_point(double n, double lam, double sigma, const Spectrum& spectrum,
                                      const FixedPointOptions& options) {
        check_common(n, lam);
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        if (!(options.damping > 0.0 && options.damping <= 1.0)) {
            throw InvalidParameter("damping must lie in (0, 1]");
        }
        if (!(options.tol > 0.0) || options.max_iter < 1) { throw InvalidParameter("invalid fixed-point options"); }

        const auto& ev = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        const double p = static_cast<double>(spectrum.size());
        const double alpha_n = n / p;
        const double s2 = sigma * sigma;

        // With lam = 0 and p > n the conjugates flow to zero; a vanishing stand-in keeps
        // them representable. It sits far below the lower bound lam_min (p - n) / n of z/n.
        double lam_eff = lam;
        if (lam == 0.0 && p > n) { lam_eff = 1e-14 * ev[ev.size() - 1] * (p - n) / n; }
        const double reg = n * lam_eff;

        FixedPointState st;
        st.rho = rho(spectrum);
        st.effective_lam = lam_eff;
        double e = st.rho;
        st.V_hat = alpha_n;
        st.m_hat = alpha_n;
        st.q_hat = alpha_n * (st.rho + s2);

        const double a = options.damping;
        auto relax = [a](double old_v, double new_v) { return (1.0 - a) * old_v + a * new_v; };
        auto rel_change = [](double old_v, double new_v) {
            const double scale = std::max(std::abs(old_v), std::abs(new_v));
            return scale > 0.0 ? std::abs(new_v - old_v) / scale : 0.0;
        };

        for (long it = 1; it <= options.max_iter; ++it) {
            double sV = 0.0, sM = 0.0, sQ1 = 0.0, sQ2 = 0.0, sE = 0.0;
            for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
                const double l = ev[k];
                const double d = reg + p * st.V_hat * l;
                const double d2 = d * d;
                const double resid = (reg + p * (st.V_hat - st.m_hat) * l) / d;
                sV += l / d;
                sM += th[k] * l * l / d;
                sQ1 += l * l / d2;
                sQ2 += th[k] * l * l * l / d2;
                sE += th[k] * l * resid * resid;
            }
            const double V_new = relax(st.V, sV);
            const double m_new = relax(st.m, p * st.m_hat * sM);
            const double q_new = relax(st.q, p * st.q_hat * sQ1 + p * p * st.m_hat * st.m_hat * sQ2);
            const double e_new = relax(e, sE + p * st.q_hat * sQ1);

            const double one_v = 1.0 + V_new;
            const double Vh_new = relax(st.V_hat, alpha_n / one_v);
            const double mh_new = relax(st.m_hat, alpha_n / one_v);
            const double qh_new = relax(st.q_hat, alpha_n * (e_new + s2) / (one_v * one_v));

            const double change = std::max({rel_change(st.V, V_new), rel_change(st.m, m_new),
                                            rel_change(st.q, q_new), rel_change(e, e_new),
                                            rel_change(st.V_hat, Vh_new), rel_change(st.m_hat, mh_new),
                                            rel_change(st.q_hat, qh_new)});
            st.V = V_new;
            st.m = m_new;
            st.q = q_new;
            e = e_new;
            st.V_hat = Vh_new;
            st.m_hat = mh_new;
            st.q_hat = qh_new;
            st.iterations = it;
            st.residual = change;
            if (!std::isfinite(change)) { break; }
            if (change <= options.tol) {
                st.converged = true;
                break;
            }
        }
        st.excess = e;
        if (st.converged && e < -options.tol * std::max(1.0, st.rho)) {
            throw NegativeExcess("fixed point produced a negative excess error");
        }
        return st;
    }

    OptimalLambda optimal_lambda(double n, double sigma, const Spectrum& spectrum, std::span<const double> lam_grid,
                                 const ZOptions& options) {
        if (lam_grid.empty()) { throw InvalidParameter("lambda grid is empty"); }
        bool found = false;
        OptimalLambda best;
        for (const double lam : lam_grid) {
            if (!(lam >= 0.0)) { throw InvalidParameter("lambda grid entries must be >= 0"); }
            double total;
            try {
                total = excess_error_closed(n, lam, sigma, spectrum, options).total;
            } catch (const NumericalError&) { continue; }
            if (!found || total < best.excess_star || (total == best.excess_star && lam > best.lam_star)) {
                best = {lam, total};
                found = true;
            }
        }
        if (!found) { throw NumericalError("every lambda grid point failed to evaluate"); }
        return best;
    }

}  // namespace krr::theory
