#include "krr/spectrum.hpp"

#include "krr/csv.hpp"
#include "krr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace krr {

    void PowerLawParams::validate() const {
        if (!(alpha > 1.0) || !std::isfinite(alpha)) {
            throw InvalidParameter("power law requires alpha > 1");
        }
        if (!(r >= 0.0) || !std::isfinite(r)) { throw InvalidParameter("power law requires r >= 0"); }
        if (p < 1) { throw InvalidParameter("power law requires p >= 1"); }
    }

    Spectrum::Spectrum(Eigen::VectorXd eigenvalues, Eigen::VectorXd teacher_sq)
        : eigenvalues_(std::move(eigenvalues)), teacher_sq_(std::move(teacher_sq)) {
        if (eigenvalues_.size() == 0) { throw InvalidParameter("spectrum must be non-empty"); }
        if (eigenvalues_.size() != teacher_sq_.size()) {
            throw InvalidParameter("eigenvalue and teacher lengths differ");
        }
        for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
            const double lam = eigenvalues_[k];
            if (!(lam > 0.0) || !std::isfinite(lam)) {
                throw InvalidParameter("eigenvalues must be finite and strictly positive");
            }
            if (k > 0 && lam > eigenvalues_[k - 1]) {
                throw InvalidParameter("eigenvalues must be non-increasing");
            }
            if (!(teacher_sq_[k] >= 0.0) || !std::isfinite(teacher_sq_[k])) {
                throw InvalidParameter("teacher_sq must be finite and non-negative");
            }
        }
    }

    Spectrum power_law_spectrum(const PowerLawParams& params) {
        params.validate();
        const auto p = static_cast<Eigen::Index>(params.p);
        Eigen::VectorXd lam(p);
        Eigen::VectorXd theta_sq(p);
        const double teacher_exp = params.alpha - 1.0 - 2.0 * params.r * params.alpha;
        for (Eigen::Index i = 0; i < p; ++i) {
            const double k = static_cast<double>(i + 1);
            lam[i] = std::pow(k, -params.alpha);
            theta_sq[i] = std::pow(k, teacher_exp);
        }
        return {std::move(lam), std::move(theta_sq)};
    }

    double rho(const Spectrum& spectrum) {
        const auto& lam = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        double sum = 0.0;
        for (Eigen::Index k = lam.size() - 1; k >= 0; --k) { sum += th[k] * lam[k]; }
        return sum;
    }

    std::string to_string(ConditionVerdict verdict) {
        switch (verdict) {
            case ConditionVerdict::Satisfied: return "satisfied";
            case ConditionVerdict::SatisfiedAtBoundary: return "satisfied at boundary";
            case ConditionVerdict::Violated: return "violated";
        }
        return "unknown";
    }

    namespace {
        struct Growth {
            double value;
            ConditionVerdict verdict;
        };

        // Increments of partial sums over the last two decades of the index range.
        template<typename Term>
        Growth tail_growth(std::size_t p, Term term, double threshold) {
            if (p < 100) { return {-INFINITY, ConditionVerdict::Satisfied}; }
            const std::size_t k2 = p / 10;
            const std::size_t k1 = p / 100;
            double inc_last = 0.0;
            double inc_prev = 0.0;
            for (std::size_t k = p; k > k2; --k) { inc_last += term(k - 1); }
            for (std::size_t k = k2; k > k1; --k) { inc_prev += term(k - 1); }
            if (inc_last <= 0.0) { return {-INFINITY, ConditionVerdict::Satisfied}; }
            if (inc_prev <= 0.0) { return {INFINITY, ConditionVerdict::Violated}; }
            const double g = std::log10(inc_last / inc_prev);
            if (g < -threshold) { return {g, ConditionVerdict::Satisfied}; }
            if (g <= threshold) { return {g, ConditionVerdict::SatisfiedAtBoundary}; }
            return {g, ConditionVerdict::Violated};
        }
    }  // namespace

    SourceCapacityReport check_source_capacity(const Spectrum& spectrum, double alpha, double r,
                                               double growth_threshold) {
        if (!(alpha > 0.0)) { throw InvalidParameter("alpha must be positive"); }
        const auto& lam = spectrum.eigenvalues();
        const auto& th = spectrum.teacher_sq();
        const auto cap = tail_growth(
            spectrum.size(), [&](std::size_t i) { return std::pow(lam[static_cast<Eigen::Index>(i)], 1.0 / alpha); },
            growth_threshold);
        const auto src = tail_growth(
            spectrum.size(),
            [&](std::size_t i) {
                const auto k = static_cast<Eigen::Index>(i);
                return std::pow(lam[k], 1.0 - 2.0 * r) * th[k];
            },
            growth_threshold);
        SourceCapacityReport report;
        report.capacity_growth = cap.value;
        report.source_growth = src.value;
        report.capacity = cap.verdict;
        report.source = src.verdict;
        report.overall = std::max(cap.verdict, src.verdict);
        report.bounded = report.overall != ConditionVerdict::Violated;
        return report;
    }

    void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
        csv::write_row(out, {"k", "eigenvalue", "teacher_sq"});
        for (Eigen::Index k = 0; k < spectrum.eigenvalues().size(); ++k) {
            csv::write_row(out, {std::to_string(k + 1), csv::format_number(spectrum.eigenvalues()[k]),
                                 csv::format_number(spectrum.teacher_sq()[k])});
        }
    }

    Spectrum read_spectrum_csv(std::istream& in) {
        const auto table = csv::read(in);
        const auto lam = table.numeric_column("eigenvalue");
        const auto th = table.numeric_column("teacher_sq");
        try {
            return {Eigen::Map<const Eigen::VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size())),
                    Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()))};
        } catch (const InvalidParameter& e) { throw SchemaError(std::string("invalid spectrum: ") + e.what()); }
    }

}  // namespace krr
