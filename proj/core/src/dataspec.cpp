#include "krr/dataspec.hpp"

#include "krr/csv.hpp"
#include "krr/errors.hpp"
#include "krr/fit.hpp"
#include "krr/simulator.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>

namespace krr::data {

    std::string to_string(KernelKind kind) {
        switch (kind) {
            case KernelKind::Rbf: return "rbf";
            case KernelKind::Polynomial: return "polynomial";
            case KernelKind::Linear: return "linear";
        }
        return "unknown";
    }

    KernelKind kernel_kind_from_string(const std::string& name) {
        if (name == "rbf") { return KernelKind::Rbf; }
        if (name == "polynomial" || name == "poly") { return KernelKind::Polynomial; }
        if (name == "linear") { return KernelKind::Linear; }
        throw InvalidParameter("unknown kernel '" + name + "'");
    }

    void KernelSpec::validate() const {
        if (kind != KernelKind::Linear && !(gamma > 0.0)) { throw InvalidParameter("kernel gamma must be > 0"); }
        if (kind == KernelKind::Polynomial && degree < 1) { throw InvalidParameter("polynomial degree must be >= 1"); }
    }

    double KernelSpec::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y) const {
        switch (kind) {
            case KernelKind::Rbf: return std::exp(-0.5 * gamma * (x - y).squaredNorm());
            case KernelKind::Polynomial: return std::pow(1.0 + gamma * x.dot(y), degree);
            case KernelKind::Linear: return x.dot(y);
        }
        return 0.0;
    }

    Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& data, const KernelSpec& kernel) {
        kernel.validate();
        if (data.rows() == 0 || data.cols() == 0) { throw InvalidParameter("data must be non-empty"); }
        const Eigen::Index n = data.rows();
        if (kernel.kind != KernelKind::Rbf) {
            // Inner products through a blocked rank update of the lower triangle, then mirrored.
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
            K.selfadjointView<Eigen::Lower>().rankUpdate(data);
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = j; i < n; ++i) {
                    double v = K(i, j);
                    if (kernel.kind == KernelKind::Polynomial) { v = std::pow(1.0 + kernel.gamma * v, kernel.degree); }
                    K(i, j) = v;
                    K(j, i) = v;
                }
            }
            return K;
        }
        const Eigen::MatrixXd cols = data.transpose();
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                const double v = kernel.evaluate(cols.col(i), cols.col(j));
                K(i, j) = v;
                K(j, i) = v;
            }
        }
        return K;
    }

    double eigen_probe_residual(const Eigen::MatrixXd& A, const SymmetricEigen& eig) {
        const Eigen::Index n = A.rows();
        if (n == 0) { return 0.0; }
        std::mt19937_64 rng(0x5eed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double scale = std::max(A.norm(), std::numeric_limits<double>::min());
        double worst = 0.0;
        for (int probe = 0; probe < 3; ++probe) {
            const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng); });
            const Eigen::VectorXd vx = eig.vectors * x;
            const double eq = (A * vx - eig.vectors * eig.values.cwiseProduct(x)).norm() / (scale * x.norm());
            const double orth = (eig.vectors.transpose() * vx - x).norm() / x.norm();
            worst = std::max({worst, eq, orth});
            if (!std::isfinite(worst)) { return std::numeric_limits<double>::infinity(); }
        }
        return worst;
    }

    SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& A) {
        if (A.rows() != A.cols()) { throw InvalidParameter("matrix must be square"); }
        SymmetricEigen out;
        out.vectors = A;
        out.values.resize(A.rows());
        out.solver = "lapack-dsyevd";
        const auto n = static_cast<lapack_int>(A.rows());
        const lapack_int info =
            LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.values.data());
        const double tol = 1e-10 * std::sqrt(static_cast<double>(std::max<lapack_int>(n, 1)));
        if (info == 0 && eigen_probe_residual(A, out) <= tol) { return out; }

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        if (es.info() != Eigen::Success) { throw NumericalError("symmetric eigensolver failed"); }
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
        out.solver = "eigen";
        return out;
    }

    FeatureDecomposition feature_decomposition(const Eigen::MatrixXd& K, const Eigen::VectorXd& labels,
                                               const DecompositionOptions& options) {
        if (K.rows() != K.cols() || K.rows() == 0) { throw InvalidParameter("Gram matrix must be square and non-empty"); }
        if (labels.size() != K.rows()) { throw InvalidParameter("label count differs from Gram size"); }
        const Eigen::Index n = K.rows();
        const double nd = static_cast<double>(n);
        const Eigen::MatrixXd A = (0.5 / nd) * (K + K.transpose());
        const auto es = symmetric_eigen(A);

        FeatureDecomposition out;
        out.eigensolver = es.solver;
        out.n_tot = static_cast<std::size_t>(n);
        out.eigenvalues = es.values.reverse();
        out.phi = es.vectors.rowwise().reverse() * std::sqrt(nd);
        const double top = out.eigenvalues[0];
        if (!(top > 0.0)) { throw IndefiniteMatrix("Gram matrix has no positive eigenvalue"); }
        if (out.eigenvalues[n - 1] < -options.indefinite_tol * top) {
            throw IndefiniteMatrix("Gram matrix is indefinite (min eigenvalue " +
                                   csv::format_number(out.eigenvalues[n - 1]) + ")");
        }
        out.floor = options.relative_floor * top;
        out.theta_star = Eigen::VectorXd::Zero(n);
        const Eigen::VectorXd proj = out.phi.transpose() * labels / nd;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (out.eigenvalues[k] <= out.floor) {
                out.excluded_modes.push_back(static_cast<std::size_t>(k));
                out.eigenvalues[k] = std::max(out.eigenvalues[k], 0.0);
                continue;
            }
            out.theta_star[k] = proj[k] / std::sqrt(out.eigenvalues[k]);
        }
        return out;
    }

    Spectrum to_spectrum(const FeatureDecomposition& d) {
        std::vector<double> lam, th;
        for (Eigen::Index k = 0; k < d.eigenvalues.size(); ++k) {
            if (d.eigenvalues[k] > d.floor) {
                lam.push_back(d.eigenvalues[k]);
                th.push_back(d.theta_star[k] * d.theta_star[k]);
            }
        }
        const auto m = static_cast<Eigen::Index>(lam.size());
        return {Eigen::Map<Eigen::VectorXd>(lam.data(), m), Eigen::Map<Eigen::VectorXd>(th.data(), m)};
    }

    Tails cumulative_tails(const Eigen::VectorXd& eigenvalues, const Eigen::VectorXd& theta_sq) {
        if (eigenvalues.size() != theta_sq.size()) { throw InvalidParameter("tail inputs differ in length"); }
        const Eigen::Index n = eigenvalues.size();
        Tails t;
        t.capacity.resize(n + 1);
        t.source.resize(n + 1);
        t.capacity[n] = 0.0;
        t.source[n] = 0.0;
        for (Eigen::Index k = n - 1; k >= 0; --k) {
            t.capacity[k] = t.capacity[k + 1] + std::max(eigenvalues[k], 0.0);
            t.source[k] = t.source[k + 1] + std::max(eigenvalues[k], 0.0) * theta_sq[k];
        }
        return t;
    }

    Tails cumulative_tails(const FeatureDecomposition& d) {
        return cumulative_tails(d.eigenvalues, d.theta_star.array().square().matrix());
    }

    IndexRange default_fit_range(std::size_t n_tot) {
        const double n = static_cast<double>(n_tot);
        IndexRange r;
        r.first = static_cast<std::size_t>(std::ceil(std::pow(n, 0.1)));
        r.last = static_cast<std::size_t>(std::floor(std::pow(n, 0.6)));
        r.first = std::max<std::size_t>(r.first, 1);
        r.last = std::min(std::max(r.last, r.first), n_tot);
        return r;
    }

    namespace {
        fit::LineFit tail_fit(const Eigen::VectorXd& tail, IndexRange range, const char* name) {
            const auto len = static_cast<std::size_t>(tail.size());
            if (range.first < 1 || range.last < range.first || range.last > len) {
                throw DegenerateWindow(std::string(name) + " fit range outside the tail");
            }
            std::vector<double> x, y;
            for (std::size_t k = range.first; k <= range.last; ++k) {
                const double v = tail[static_cast<Eigen::Index>(k - 1)];
                if (v > 0.0) {
                    x.push_back(static_cast<double>(k));
                    y.push_back(v);
                }
            }
            if (x.size() < 5) {
                throw DegenerateWindow(std::string(name) + " fit range has fewer than 5 positive entries");
            }
            return fit::loglog(x, y, 5);
        }
    }  // namespace

    CapacitySourceEstimate estimate_alpha_r(const Tails& tails, IndexRange capacity_range, IndexRange source_range) {
        const auto cap = tail_fit(tails.capacity, capacity_range, "capacity");
        const auto src = tail_fit(tails.source, source_range, "source");
        CapacitySourceEstimate est;
        est.fit_range_capacity = capacity_range;
        est.fit_range_source = source_range;
        est.alpha_hat = 1.0 - cap.slope;
        est.r_hat = -src.slope / (2.0 * est.alpha_hat);
        est.r2_capacity = cap.r2;
        est.r2_source = src.r2;
        if (cap.r2 < 0.95) { est.warnings.push_back("capacity fit r^2 below 0.95"); }
        if (src.r2 < 0.95) { est.warnings.push_back("source fit r^2 below 0.95"); }
        if (est.alpha_hat <= 1.0) { est.warnings.push_back("alpha estimate at or below the boundary value 1"); }
        return est;
    }

    LabeledRows ingest_binary_labels(std::size_t row_count, std::span<const std::size_t> class_a,
                                     std::span<const std::size_t> class_b, double sigma, std::uint64_t seed) {
        if (!(sigma >= 0.0)) { throw InvalidParameter("sigma must be >= 0"); }
        std::set<std::size_t> a(class_a.begin(), class_a.end());
        std::set<std::size_t> b(class_b.begin(), class_b.end());
        for (const auto r : a) {
            if (b.count(r)) { throw InvalidParameter("class row sets overlap at row " + std::to_string(r)); }
        }
        std::set<std::size_t> all(a);
        all.insert(b.begin(), b.end());
        if (!all.empty() && *all.rbegin() >= row_count) { throw InvalidParameter("class row index out of range"); }
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        LabeledRows out;
        out.rows.assign(all.begin(), all.end());
        out.labels.resize(static_cast<Eigen::Index>(out.rows.size()));
        for (std::size_t i = 0; i < out.rows.size(); ++i) {
            const double base = a.count(out.rows[i]) ? 1.0 : -1.0;
            out.labels[static_cast<Eigen::Index>(i)] = base + sigma * normal(rng);
        }
        return out;
    }

    TabularData read_dataset_csv(std::istream& in) {
        const auto table = csv::read(in);
        TabularData out;
        std::vector<std::size_t> feature_cols;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c] == "y") { continue; }
            feature_cols.push_back(c);
            out.feature_names.push_back(table.header[c]);
        }
        if (feature_cols.empty()) { throw SchemaError("dataset has no feature columns"); }
        if (table.rows.empty()) { throw SchemaError("dataset has no rows"); }
        const auto rows = static_cast<Eigen::Index>(table.rows.size());
        out.features.resize(rows, static_cast<Eigen::Index>(feature_cols.size()));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < feature_cols.size(); ++j) {
                out.features(i, static_cast<Eigen::Index>(j)) =
                    csv::parse_number(table.rows[static_cast<std::size_t>(i)][feature_cols[j]]);
            }
        }
        if (table.column("y") >= 0) {
            const auto y = table.numeric_column("y");
            out.labels = Eigen::Map<const Eigen::VectorXd>(y.data(), rows);
        }
        return out;
    }

    void write_dataset_csv(std::ostream& out, const TabularData& data) {
        std::vector<std::string> header = data.feature_names;
        if (header.empty()) {
            for (Eigen::Index j = 0; j < data.features.cols(); ++j) { header.push_back("x" + std::to_string(j + 1)); }
        }
        if (data.labels) { header.emplace_back("y"); }
        csv::write_row(out, header);
        for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
            std::vector<std::string> row;
            for (Eigen::Index j = 0; j < data.features.cols(); ++j) { row.push_back(csv::format_number(data.features(i, j))); }
            if (data.labels) { row.push_back(csv::format_number((*data.labels)[i])); }
            csv::write_row(out, row);
        }
    }

    void write_decomposition_csv(std::ostream& out, const FeatureDecomposition& d) {
        csv::write_row(out, {"k", "eigenvalue", "theta_star"});
        for (Eigen::Index k = 0; k < d.eigenvalues.size(); ++k) {
            csv::write_row(out, {std::to_string(k + 1), csv::format_number(d.eigenvalues[k]),
                                 csv::format_number(d.theta_star[k])});
        }
    }

    void write_tails_csv(std::ostream& out, const Tails& t) {
        csv::write_row(out, {"k", "cap_tail", "src_tail"});
        for (Eigen::Index k = 0; k < t.capacity.size(); ++k) {
            csv::write_row(out, {std::to_string(k + 1), csv::format_number(t.capacity[k]), csv::format_number(t.source[k])});
        }
    }

    Tails read_tails_csv(std::istream& in) {
        const auto table = csv::read(in);
        const auto cap = table.numeric_column("cap_tail");
        const auto src = table.numeric_column("src_tail");
        Tails t;
        t.capacity = Eigen::Map<const Eigen::VectorXd>(cap.data(), static_cast<Eigen::Index>(cap.size()));
        t.source = Eigen::Map<const Eigen::VectorXd>(src.data(), static_cast<Eigen::Index>(src.size()));
        return t;
    }

    TabularData planted_power_law_data(std::size_t n_tot, std::size_t d, double alpha, double r, double sigma,
                                       std::uint64_t seed) {
        const auto spectrum = power_law_spectrum({alpha, r, d});
        auto ds = sim::sample_dataset(spectrum, n_tot, sigma, seed);
        TabularData out;
        out.features = std::move(ds.features);
        out.labels = std::move(ds.labels);
        for (std::size_t j = 0; j < d; ++j) { out.feature_names.push_back("x" + std::to_string(j + 1)); }
        return out;
    }

}  // namespace krr::data
