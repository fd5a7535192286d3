#include "krr/regimes.hpp"

#include "krr/csv.hpp"
#include "krr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace krr::regimes {

    namespace {
        constexpr double kInf = std::numeric_limits<double>::infinity();

        double m_of(double r) { return std::min(r, 1.0); }

        // log of the lower edge of the regularized branch; +inf when never regularized.
        double log_reg_start(double alpha, const Decay& ell, double lambda0) {
            if (ell.is_infinite() || ell.value() >= alpha) { return kInf; }
            return -std::log(lambda0) / (alpha - ell.value());
        }

        // 2 ln(sigma / lambda0^(m + 1/(2 alpha))).
        double log_reg_noise_ratio(double alpha, double r, double sigma, double lambda0) {
            return 2.0 * std::log(sigma) - (2.0 * m_of(r) + 1.0 / alpha) * std::log(lambda0);
        }

        double reg_kappa(double alpha, double r, double ell) { return 1.0 - ell * (2.0 * m_of(r) + 1.0 / alpha); }

        void check_exponents(double alpha, double r) {
            if (!(alpha > 1.0) || !std::isfinite(alpha)) { throw InvalidParameter("alpha must be > 1"); }
            if (!(r >= 0.0) || !std::isfinite(r)) { throw InvalidParameter("r must be >= 0"); }
        }
    }  // namespace

    Decay Decay::finite(double ell) {
        if (std::isnan(ell)) { throw InvalidParameter("decay must not be NaN"); }
        if (std::isinf(ell)) {
            if (ell > 0) { return infinite(); }
            throw InvalidParameter("decay must not be -inf");
        }
        return Decay(ell);
    }

    Decay Decay::parse(const std::string& text) {
        if (text == "inf" || text == "+inf" || text == "infinity") { return infinite(); }
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) { throw InvalidParameter("bad decay '" + text + "'"); }
            return finite(v);
        } catch (const std::logic_error&) { throw InvalidParameter("bad decay '" + text + "'"); }
    }

    double Decay::value() const {
        if (!ell_) { throw InvalidParameter("decay is infinite"); }
        return *ell_;
    }

    double Decay::lambda_at(double lambda0, double n) const {
        if (!ell_) { return 0.0; }
        return lambda0 * std::pow(n, -*ell_);
    }

    std::string Decay::to_string() const { return ell_ ? csv::format_number(*ell_) : "inf"; }

    std::string to_string(Region region) {
        switch (region) {
            case Region::GreenNoiselessUnreg: return "GreenNoiselessUnreg";
            case Region::RedNoisyUnreg: return "RedNoisyUnreg";
            case Region::BlueNoiselessReg: return "BlueNoiselessReg";
            case Region::OrangeNoisyReg: return "OrangeNoisyReg";
        }
        return "unknown";
    }

    Region region_from_string(const std::string& name) {
        for (const auto r : {Region::GreenNoiselessUnreg, Region::RedNoisyUnreg, Region::BlueNoiselessReg,
                             Region::OrangeNoisyReg}) {
            if (to_string(r) == name) { return r; }
        }
        throw SchemaError("unknown region '" + name + "'");
    }

    std::string label_name(const RegimeLabel& label) {
        return label.over_regularized ? to_string(label.region) + "/over-regularized" : to_string(label.region);
    }

    double green_exponent(double alpha, double r) { return 2.0 * alpha * m_of(r); }
    double blue_exponent(double ell, double r) { return 2.0 * ell * m_of(r); }
    double orange_exponent(double alpha, double ell) { return (alpha - ell) / alpha; }

    void RegimeQuery::validate() const {
        check_exponents(alpha, r);
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) { throw InvalidParameter("sigma must be >= 0"); }
        if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) { throw InvalidParameter("lambda0 must be > 0"); }
        if (!(n >= 1.0) || !std::isfinite(n)) { throw InvalidParameter("n must be >= 1"); }
    }

    RegimeLabel classify(const RegimeQuery& q) {
        q.validate();
        const double m = m_of(q.r);
        const double ln_n = std::log(q.n);
        const double ln_sigma = std::log(q.sigma);
        RegimeLabel label;
        if (ln_n < log_reg_start(q.alpha, q.ell, q.lambda0)) {
            const bool noisy = 2.0 * ln_sigma >= -2.0 * q.alpha * m * ln_n;
            label.region = noisy ? Region::RedNoisyUnreg : Region::GreenNoiselessUnreg;
            label.exponent = noisy ? 0.0 : green_exponent(q.alpha, q.r);
            return label;
        }
        const double ell = q.ell.value();
        if (ell < 0.0) {
            label.region = Region::BlueNoiselessReg;
            label.exponent = 0.0;
            label.over_regularized = true;
            return label;
        }
        const bool noisy =
            log_reg_noise_ratio(q.alpha, q.r, q.sigma, q.lambda0) >= reg_kappa(q.alpha, q.r, ell) * ln_n;
        label.region = noisy ? Region::OrangeNoisyReg : Region::BlueNoiselessReg;
        label.exponent = noisy ? orange_exponent(q.alpha, ell) : blue_exponent(ell, q.r);
        return label;
    }

    std::vector<double> noise_crossovers(double alpha, double r, double sigma, Decay ell, double lambda0) {
        check_exponents(alpha, r);
        if (!(lambda0 > 0.0)) { throw InvalidParameter("lambda0 must be > 0"); }
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        std::vector<double> out;
        if (sigma == 0.0) { return out; }
        const double m = m_of(r);
        const double ln_start = log_reg_start(alpha, ell, lambda0);
        if (m > 0.0) {
            const double ln_nu = -std::log(sigma) / (alpha * m);
            if (ln_nu > 0.0 && ln_nu < ln_start) { out.push_back(std::exp(ln_nu)); }
        }
        if (std::isfinite(ln_start) && ell.value() >= 0.0) {
            const double kappa = reg_kappa(alpha, r, ell.value());
            if (kappa != 0.0) {
                const double ln_nr = log_reg_noise_ratio(alpha, r, sigma, lambda0) / kappa;
                if (ln_nr > std::max(0.0, ln_start)) { out.push_back(std::exp(ln_nr)); }
            }
        }
        return out;
    }

    std::optional<double> noise_crossover_n(double alpha, double r, double sigma, Decay ell, double lambda0) {
        const auto all = noise_crossovers(alpha, r, sigma, ell, lambda0);
        if (all.empty()) { return std::nullopt; }
        return all.front();
    }

    std::optional<double> regularization_crossover_n(double alpha, Decay ell, double lambda0) {
        if (!(alpha > 1.0)) { throw InvalidParameter("alpha must be > 1"); }
        if (!(lambda0 > 0.0)) { throw InvalidParameter("lambda0 must be > 0"); }
        if (ell.is_infinite() || ell.value() >= alpha || lambda0 > 1.0) { return std::nullopt; }
        return std::pow(lambda0, -1.0 / (alpha - ell.value()));
    }

    std::string to_string(OptimalPhase phase) {
        switch (phase) {
            case OptimalPhase::Noiseless: return "noiseless";
            case OptimalPhase::Transition: return "transition";
            case OptimalPhase::Noisy: return "noisy";
        }
        return "unknown";
    }

    OptimalDecay optimal_decay(double alpha, double r, double sigma, double n) {
        check_exponents(alpha, r);
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        if (!(n >= 1.0)) { throw InvalidParameter("n must be >= 1"); }
        const double m = m_of(r);
        const double am = alpha * m;
        OptimalDecay out;
        if (sigma == 0.0 || am == 0.0) {
            out.n_star_1 = sigma == 0.0 ? kInf : (sigma >= 1.0 ? 1.0 : kInf);
        } else {
            out.n_star_1 = std::pow(sigma, -1.0 / am);
        }
        out.n_star_2 = sigma == 0.0 ? kInf : std::pow(sigma, -std::max(2.0, am > 0.0 ? 1.0 / am : kInf));
        if (sigma >= 1.0) { out.n_star_2 = std::min(out.n_star_2, 1.0); }
        const double ell_noisy = alpha / (1.0 + 2.0 * am);
        if (n < out.n_star_1) {
            out.phase = OptimalPhase::Noiseless;
            out.ell_lower = alpha;
            out.ell_upper = kInf;
            out.exponent = 2.0 * am;
        } else if (n >= out.n_star_2) {
            out.phase = OptimalPhase::Noisy;
            out.ell_lower = out.ell_upper = ell_noisy;
            out.exponent = 2.0 * am / (1.0 + 2.0 * am);
        } else {
            out.phase = OptimalPhase::Transition;
            const double ell_c = n > 1.0 ? (1.0 - 2.0 * std::log(sigma) / std::log(n)) * ell_noisy : alpha;
            out.ell_lower = out.ell_upper = std::min(ell_c, alpha);
            out.exponent = 2.0 * out.ell_lower * m;
        }
        return out;
    }

    PhaseDiagram phase_diagram(double alpha, double r, double sigma, double lambda0, std::span<const double> n_grid,
                               std::span<const Decay> ell_grid) {
        check_exponents(alpha, r);
        if (n_grid.empty() || ell_grid.empty()) { throw InvalidParameter("phase diagram grids must be non-empty"); }
        if (!std::is_sorted(n_grid.begin(), n_grid.end())) { throw InvalidParameter("n grid must be sorted"); }
        PhaseDiagram out;
        out.cells.reserve(n_grid.size() * ell_grid.size());
        for (const auto& ell : ell_grid) {
            for (const double n : n_grid) {
                RegimeQuery q{alpha, r, sigma, ell, lambda0, n};
                out.cells.push_back({n, ell, classify(q)});
            }
        }
        const double n_lo = n_grid.front();
        const double n_hi = n_grid.back();
        auto in_range = [&](double n) { return n >= n_lo && n <= n_hi; };
        for (const auto& ell : ell_grid) {
            const double ell_v = ell.is_infinite() ? kInf : ell.value();
            for (const double n : noise_crossovers(alpha, r, sigma, ell, lambda0)) {
                if (in_range(n)) { out.lines.noise_line.push_back({n, ell_v}); }
            }
        }
        if (lambda0 >= 1.0) {
            // Boundary sits at n <= 1 for every ell < alpha, leaving the horizontal ell = alpha line.
            for (const double n : n_grid) { out.lines.reg_line.push_back({n, alpha}); }
        } else {
            for (const auto& ell : ell_grid) {
                const auto nb = regularization_crossover_n(alpha, ell, lambda0);
                if (nb && in_range(*nb)) { out.lines.reg_line.push_back({*nb, ell.value()}); }
            }
            std::sort(out.lines.reg_line.begin(), out.lines.reg_line.end(),
                      [](const LinePoint& a, const LinePoint& b) { return a.n < b.n; });
        }
        const double am = alpha * m_of(r);
        out.lines.optimal_ell = alpha / (1.0 + 2.0 * am);
        out.lines.optimal_exponent = 2.0 * am / (1.0 + 2.0 * am);
        return out;
    }

    void write_phase_grid_csv(std::ostream& out, const PhaseDiagram& diagram) {
        csv::write_row(out, {"n", "ell", "region", "exponent"});
        for (const auto& c : diagram.cells) {
            csv::write_row(out, {csv::format_number(c.n), c.ell.to_string(), label_name(c.label),
                                 csv::format_number(c.label.exponent)});
        }
    }

    void write_crossover_lines_csv(std::ostream& out, const CrossoverLines& lines) {
        csv::write_row(out, {"line_id", "n", "ell"});
        for (const auto& p : lines.noise_line) {
            csv::write_row(out, {"noise", csv::format_number(p.n), csv::format_number(p.ell)});
        }
        for (const auto& p : lines.reg_line) {
            csv::write_row(out, {"regularization", csv::format_number(p.n), csv::format_number(p.ell)});
        }
    }

}  // namespace krr::regimes
