#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace krr::regimes {

    /// Regularization decay ell in lam = lambda0 n^-ell; the infinite decay encodes lam = 0.
    class Decay {
    public:
        static Decay finite(double ell);
        static Decay infinite() { return Decay(); }
        /// Parses a number or "inf".
        static Decay parse(const std::string& text);

        [[nodiscard]] bool is_infinite() const { return !ell_.has_value(); }
        /// Throws InvalidParameter when infinite.
        [[nodiscard]] double value() const;
        /// lambda0 n^-ell, or exactly 0 when infinite.
        [[nodiscard]] double lambda_at(double lambda0, double n) const;
        [[nodiscard]] std::string to_string() const;

        bool operator==(const Decay&) const = default;

    private:
        Decay() = default;
        explicit Decay(double ell) : ell_(ell) {}
        std::optional<double> ell_;
    };

    enum class Region { GreenNoiselessUnreg, RedNoisyUnreg, BlueNoiselessReg, OrangeNoisyReg };

    std::string to_string(Region region);
    Region region_from_string(const std::string& name);

    struct RegimeQuery {
        double alpha = 2.0;
        double r = 0.5;
        double sigma = 0.0;
        Decay ell = Decay::infinite();
        double lambda0 = 1.0;
        double n = 1.0;

        void validate() const;
    };

    struct RegimeLabel {
        Region region = Region::GreenNoiselessUnreg;
        /// Predicted decay exponent of eps_g - sigma^2; 0 marks a plateau.
        double exponent = 0.0;
        /// Set for ell < 0 in the regularized branch, where the excess error stays O(1).
        bool over_regularized = false;
    };

    /// Text label used in tables: region name, with an "/over-regularized" suffix when flagged.
    std::string label_name(const RegimeLabel& label);

    double green_exponent(double alpha, double r);
    double blue_exponent(double ell, double r);
    double orange_exponent(double alpha, double ell);

    /// Branch boundaries are closed on the left: n >= boundary counts as regularized,
    /// and ties in the noise comparison count as noisy.
    RegimeLabel classify(const RegimeQuery& query);

    /// All sample sizes where the label switches between noiseless and noisy along
    /// increasing n at fixed ell, in increasing order.
    std::vector<double> noise_crossovers(double alpha, double r, double sigma, Decay ell, double lambda0 = 1.0);

    /// First noise crossover along the learning curve, or none.
    std::optional<double> noise_crossover_n(double alpha, double r, double sigma, Decay ell, double lambda0 = 1.0);

    /// lambda0^(-1/(alpha-ell)) when ell < alpha and lambda0 <= 1; none otherwise.
    std::optional<double> regularization_crossover_n(double alpha, Decay ell, double lambda0);

    enum class OptimalPhase { Noiseless, Transition, Noisy };

    std::string to_string(OptimalPhase phase);

    struct OptimalDecay {
        OptimalPhase phase = OptimalPhase::Noiseless;
        /// Interval of optimal decays. In the noiseless phase it is (alpha, inf) and
        /// ell_upper is +inf; otherwise both ends coincide.
        double ell_lower = 0.0;
        double ell_upper = 0.0;
        double exponent = 0.0;
        /// sigma^(-1/(alpha m)) and sigma^(-max(2, 1/(alpha m))) with m = min(r, 1).
        double n_star_1 = 0.0;
        double n_star_2 = 0.0;
    };

    OptimalDecay optimal_decay(double alpha, double r, double sigma, double n);

    struct PhaseCell {
        double n = 0.0;
        Decay ell = Decay::infinite();
        RegimeLabel label;
    };

    struct LinePoint {
        double n = 0.0;
        double ell = 0.0;
    };

    struct CrossoverLines {
        std::vector<LinePoint> noise_line;
        std::vector<LinePoint> reg_line;
        double optimal_ell = 0.0;
        double optimal_exponent = 0.0;
    };

    struct PhaseDiagram {
        std::vector<PhaseCell> cells;
        CrossoverLines lines;
    };

    /// Labels every (n, ell) cell and traces the crossover lines over the grid.
    /// Infinite decays in the grid are drawn at ell = +inf in the noise line.
    PhaseDiagram phase_diagram(double alpha, double r, double sigma, double lambda0, std::span<const double> n_grid,
                               std::span<const Decay> ell_grid);

    /// CSV with header n,ell,region,exponent.
    void write_phase_grid_csv(std::ostream& out, const PhaseDiagram& diagram);
    /// CSV with header line_id,n,ell where line_id is "noise" or "regularization".
    void write_crossover_lines_csv(std::ostream& out, const CrossoverLines& lines);

}  // namespace krr::regimes
