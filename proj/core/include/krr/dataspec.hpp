#pragma once

#include "krr/spectrum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace krr::data {

    enum class KernelKind { Rbf, Polynomial, Linear };

    std::string to_string(KernelKind kind);
    KernelKind kernel_kind_from_string(const std::string& name);

    /// rbf: exp(-gamma |x - x'|^2 / 2); polynomial: (1 + gamma <x, x'>)^degree; linear: <x, x'>.
    struct KernelSpec {
        KernelKind kind = KernelKind::Rbf;
        double gamma = 1.0;
        int degree = 5;

        void validate() const;
        [[nodiscard]] double evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const Eigen::Ref<const Eigen::VectorXd>& y) const;
    };

    /// Rows of data are samples. Each unordered pair is evaluated once.
    Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& data, const KernelSpec& kernel);

    struct FeatureDecomposition {
        Eigen::VectorXd eigenvalues;  ///< of K / n_tot, descending
        Eigen::MatrixXd phi;          ///< (1/n_tot) phi^T phi = I
        Eigen::VectorXd theta_star;   ///< zero on excluded modes
        std::size_t n_tot = 0;
        double floor = 0.0;
        /// Zero-based indices of modes at or below the floor.
        std::vector<std::size_t> excluded_modes;
        /// Eigensolver that produced the decomposition.
        std::string eigensolver;
    };

    struct DecompositionOptions {
        double relative_floor = 1e-12;
        double indefinite_tol = 1e-8;
    };

    /// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
    struct SymmetricEigen {
        Eigen::VectorXd values;
        Eigen::MatrixXd vectors;
        /// "lapack-dsyevd", or "eigen" when the LAPACK result failed its self-check.
        std::string solver;
    };

    /// LAPACK dsyevd, verified with random probes of the eigen-equation and of orthonormality.
    /// A result that fails the check is recomputed with Eigen's self-adjoint solver.
    SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& A);

    /// Largest relative probe residual of A V = V diag(values) and V^T V = I over a few random vectors.
    double eigen_probe_residual(const Eigen::MatrixXd& A, const SymmetricEigen& eig);

    /// theta_star = (1/n_tot) Sigma^-1 Psi^T y with Psi = phi Sigma^(1/2).
    FeatureDecomposition feature_decomposition(const Eigen::MatrixXd& K, const Eigen::VectorXd& labels,
                                               const DecompositionOptions& options = {});

    /// Spectrum of the non-excluded modes.
    Spectrum to_spectrum(const FeatureDecomposition& decomposition);

    struct Tails {
        Eigen::VectorXd capacity;  ///< k -> sum_{k' >= k} lambda_k'
        Eigen::VectorXd source;    ///< k -> sum_{k' >= k} lambda_k' theta_k'^2
    };

    Tails cumulative_tails(const Eigen::VectorXd& eigenvalues, const Eigen::VectorXd& theta_sq);
    Tails cumulative_tails(const FeatureDecomposition& decomposition);

    /// One-based inclusive index interval.
    struct IndexRange {
        std::size_t first = 1;
        std::size_t last = 1;
    };

    /// [ceil(n^0.1), floor(n^0.6)].
    IndexRange default_fit_range(std::size_t n_tot);

    struct CapacitySourceEstimate {
        double alpha_hat = 0.0;
        double r_hat = 0.0;
        IndexRange fit_range_capacity;
        IndexRange fit_range_source;
        double r2_capacity = 0.0;
        double r2_source = 0.0;
        std::vector<std::string> warnings;
    };

    /// alpha = 1 - slope(log cap_tail); r = -slope(log src_tail) / (2 alpha). Each range needs
    /// at least 5 positive entries. Warns when a fit has r^2 < 0.95 or alpha is at or below 1.
    CapacitySourceEstimate estimate_alpha_r(const Tails& tails, IndexRange capacity_range, IndexRange source_range);

    struct LabeledRows {
        std::vector<std::size_t> rows;  ///< ascending
        Eigen::VectorXd labels;
    };

    /// +1 + sigma N for class a rows, -1 + sigma N for class b rows, drawn in ascending row order.
    LabeledRows ingest_binary_labels(std::size_t row_count, std::span<const std::size_t> class_a,
                                     std::span<const std::size_t> class_b, double sigma, std::uint64_t seed);

    struct TabularData {
        Eigen::MatrixXd features;
        std::optional<Eigen::VectorXd> labels;
        std::vector<std::string> feature_names;
    };

    /// Header row required; every column except `y` is a numeric feature.
    TabularData read_dataset_csv(std::istream& in);
    void write_dataset_csv(std::ostream& out, const TabularData& data);

    /// Header k,eigenvalue,theta_star.
    void write_decomposition_csv(std::ostream& out, const FeatureDecomposition& decomposition);
    /// Header k,cap_tail,src_tail.
    void write_tails_csv(std::ostream& out, const Tails& tails);
    Tails read_tails_csv(std::istream& in);

    /// Planted Gaussian data: n_tot rows of d independent N(0, k^-alpha) features, labels
    /// y = sum_k theta_k x_k + sigma N with theta_k^2 k^-alpha = k^(-1-2 r alpha).
    TabularData planted_power_law_data(std::size_t n_tot, std::size_t d, double alpha, double r, double sigma,
                                       std::uint64_t seed);

}  // namespace krr::data
