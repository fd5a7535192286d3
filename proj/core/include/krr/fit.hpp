#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace krr::fit {

    struct LineFit {
        double slope = 0.0;
        double intercept = 0.0;
        double slope_stderr = 0.0;
        /// Coefficient of determination; 1 when y is constant and exactly fitted.
        double r2 = 1.0;
        std::size_t points = 0;
    };

    /// Ordinary least squares y = intercept + slope x. Needs at least 2 distinct x.
    LineFit ols(std::span<const double> x, std::span<const double> y);

    /// OLS of log y on log x. Needs at least min_points entries, all positive.
    LineFit loglog(std::span<const double> x, std::span<const double> y, std::size_t min_points = 3);

    /// count points spaced evenly in log10 between lo and hi (inclusive).
    std::vector<double> logspace(double lo, double hi, std::size_t count);

    /// Points 10^(lo_exp + j step) for j = 0.. while the exponent stays <= hi_exp (+ tiny slack).
    std::vector<double> log_grid(double lo_exp, double hi_exp, double step);

}  // namespace krr::fit
