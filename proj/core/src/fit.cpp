#include "krr/fit.hpp"

#include "krr/errors.hpp"

#include <cmath>

namespace krr::fit {

    LineFit ols(std::span<const double> x, std::span<const double> y) {
        if (x.size() != y.size()) { throw InvalidParameter("ols: x and y lengths differ"); }
        const std::size_t n = x.size();
        if (n < 2) { throw DegenerateWindow("ols: need at least 2 points"); }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = x[i] - mx;
            const double dy = y[i] - my;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        if (!(sxx > 0.0)) { throw DegenerateWindow("ols: x values are all equal"); }
        LineFit f;
        f.points = n;
        f.slope = sxy / sxx;
        f.intercept = my - f.slope * mx;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            sse += r * r;
        }
        f.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
        f.r2 = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
        return f;
    }

    LineFit loglog(std::span<const double> x, std::span<const double> y, std::size_t min_points) {
        if (x.size() != y.size()) { throw InvalidParameter("loglog: x and y lengths differ"); }
        if (x.size() < min_points) {
            throw DegenerateWindow("loglog: window has " + std::to_string(x.size()) + " points, need " +
                                   std::to_string(min_points));
        }
        std::vector<double> lx(x.size()), ly(y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] > 0.0) || !(y[i] > 0.0)) { throw DegenerateWindow("loglog: non-positive value in window"); }
            lx[i] = std::log(x[i]);
            ly[i] = std::log(y[i]);
        }
        return ols(lx, ly);
    }

    std::vector<double> logspace(double lo, double hi, std::size_t count) {
        if (!(lo > 0.0) || !(hi >= lo) || count == 0) { throw InvalidParameter("logspace: invalid range"); }
        std::vector<double> out(count);
        if (count == 1) {
            out[0] = lo;
            return out;
        }
        const double a = std::log10(lo), b = std::log10(hi);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
        }
        out.front() = lo;
        out.back() = hi;
        return out;
    }

    std::vector<double> log_grid(double lo_exp, double hi_exp, double step) {
        if (!(step > 0.0) || !(hi_exp >= lo_exp)) { throw InvalidParameter("log_grid: invalid range"); }
        std::vector<double> out;
        for (long j = 0;; ++j) {
            const double e = lo_exp + step * static_cast<double>(j);
            if (e > hi_exp + 1e-9 * step) { break; }
            out.push_back(std::pow(10.0, e));
        }
        return out;
    }

}  // namespace krr::fit
