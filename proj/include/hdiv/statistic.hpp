#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hdiv/linalg.hpp"

namespace hdiv {

enum class Alternative { greater, two_sided };
enum class Mode { oracle, feasible };

std::string_view to_string(Alternative alt) noexcept;
std::string_view to_string(Mode mode) noexcept;
Alternative parse_alternative(std::string_view text);

/// Outcome y, endogenous regressor x and instruments Z with matching N.
class Dataset {
public:
    Dataset(Eigen::VectorXd y, Eigen::VectorXd x, InstrumentMatrix z);

    const Eigen::VectorXd& y() const noexcept { return y_; }
    const Eigen::VectorXd& x() const noexcept { return x_; }
    const InstrumentMatrix& z() const noexcept { return z_; }
    Eigen::Index n() const noexcept { return z_.n(); }
    Eigen::Index k() const noexcept { return z_.k(); }

private:
    Eigen::VectorXd y_;
    Eigen::VectorXd x_;
    InstrumentMatrix z_;
};

struct Hypothesis {
    double beta0 = 0.0;
    Alternative alternative = Alternative::greater;
    double alpha = 0.05;

    void validate() const;
};

struct TestOutcome {
    double statistic = 0.0;
    double trace_sbar = 0.0;
    double trace_sigma2 = 0.0;
    double p_value = 1.0;
    bool reject = false;
    Eigen::Index n = 0;
    Eigen::Index k = 0;
    Mode mode = Mode::feasible;
};

struct NormalizedResidual {
    Eigen::VectorXd unit;  // Y* / ||Y*||
    double norm_sq = 0.0;  // ||Y*||^2
};

/// Y* = y - x beta0, scaled to unit length. Throws degenerate_residual when
/// ||Y*||^2 < 1e-300.
NormalizedResidual normalize_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                      double beta0);

/// Unbiased estimate of tr(Sigma^2): sum_{i != j} (z_i'z_j)^2 / (N(N-1)),
/// evaluated as (||Z'Z||_F^2 - sum_i ||z_i||^4) / (N(N-1)).
double trace_sigma2_hat(const GramSummary<double>& gram);
double trace_sigma2_hat(const InstrumentMatrix& z);

/// Standard normal CDF and upper tail.
double normal_cdf(double x);
double normal_sf(double x);

double p_value(double statistic, Alternative alternative);

/// Instrument-only quantities reused across many hypotheses or outcome
/// vectors sharing one Z. Holds a reference; Z must outlive this object.
class PreparedInstruments {
public:
    explicit PreparedInstruments(const InstrumentMatrix& z);

    const InstrumentMatrix& z() const noexcept { return *z_; }
    double trace_sbar() const noexcept { return trace_sbar_; }
    /// Throws degenerate_instruments if the estimate is not positive.
    double trace_sigma2_hat() const;

private:
    const InstrumentMatrix* z_;
    double trace_sbar_;
    double trace_sigma2_hat_;
};

/// Oracle statistic when trace_sigma2 is supplied, feasible otherwise.
TestOutcome q_statistic(const Dataset& data, const Hypothesis& hyp,
                        std::optional<double> trace_sigma2 = std::nullopt);
TestOutcome q_statistic(const PreparedInstruments& prepared, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& x, const Hypothesis& hyp,
                        std::optional<double> trace_sigma2 = std::nullopt);

/// Statistic from an already-normalized residual: sqrt(N^2/(2T)) (|Z'u|^2/N - tr/N).
double q_value(const Eigen::MatrixXd& z, const Eigen::VectorXd& unit_residual, double trace_sbar,
               double trace_sigma2);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct BetaGrid {
    double lo = 0.0;
    double hi = 0.0;
    int steps = 2;

    double point(int i) const;
};

/// Confidence set for beta by inverting the feasible test over a uniform grid.
/// Consecutive non-rejected points are merged into closed intervals.
std::vector<Interval> invert_ci(const Dataset& data, double alpha, const BetaGrid& grid,
                                Alternative alternative = Alternative::greater);

}  // namespace hdiv
