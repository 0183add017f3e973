#include "hdiv/statistic.hpp"

#include <cmath>
#include <string>

namespace hdiv {

std::string_view to_string(Alternative alt) noexcept {
    return alt == Alternative::greater ? "greater" : "two-sided";
}

std::string_view to_string(Mode mode) noexcept {
    return mode == Mode::oracle ? "oracle" : "feasible";
}

Alternative parse_alternative(std::string_view text) {
    if (text == "greater")
        return Alternative::greater;
    if (text == "two-sided" || text == "two_sided" || text == "twosided")
        return Alternative::two_sided;
    throw Error(Errc::validation, "unknown alternative '" + std::string(text) + "'");
}

Dataset::Dataset(Eigen::VectorXd y, Eigen::VectorXd x, InstrumentMatrix z)
    : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)) {
    if (y_.size() != z_.n() || x_.size() != z_.n())
        throw Error(Errc::validation, "dataset: y, x and Z must have the same number of rows");
    if (!y_.allFinite() || !x_.allFinite())
        throw Error(Errc::validation, "dataset: non-finite outcome or regressor");
}

void Hypothesis::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error(Errc::validation, "alpha must lie in (0, 1)");
    if (!std::isfinite(beta0))
        throw Error(Errc::validation, "beta0 must be finite");
}

NormalizedResidual normalize_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                      double beta0) {
    if (y.size() != x.size())
        throw Error(Errc::validation, "normalize_residual: length mismatch");
    if (!y.allFinite() || !x.allFinite() || !std::isfinite(beta0))
        throw Error(Errc::validation, "normalize_residual: non-finite input");
    NormalizedResidual out;
    out.unit = y - beta0 * x;
    out.norm_sq = out.unit.squaredNorm();
    if (!(out.norm_sq >= 1e-300))
        throw Error(Errc::degenerate_residual, "null residual y - x*beta0 is zero");
    out.unit /= std::sqrt(out.norm_sq);
    return out;
}

double trace_sigma2_hat(const GramSummary<double>& gram) {
    const double n = double(gram.row_norms_sq.size());
    const double diag = gram.row_norms_sq.squaredNorm();
    const double est = (gram.frob_sq_cross - diag) / (n * (n - 1.0));
    if (!(est > 0.0))
        throw Error(Errc::degenerate_instruments,
                    "estimated tr(Sigma^2) is not positive (instrument rows mutually orthogonal)");
    return est;
}

double trace_sigma2_hat(const InstrumentMatrix& z) { return trace_sigma2_hat(gram_summary(z)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double p_value(double statistic, Alternative alternative) {
    if (!std::isfinite(statistic))
        throw Error(Errc::validation, "p_value: statistic is not finite");
    if (alternative == Alternative::greater)
        return normal_sf(statistic);
    return std::min(1.0, 2.0 * normal_sf(std::abs(statistic)));
}

PreparedInstruments::PreparedInstruments(const InstrumentMatrix& z) : z_(&z) {
    const auto gram = gram_summary(z);
    trace_sbar_ = gram.trace_sbar;
    const double n = double(z.n());
    trace_sigma2_hat_ = (gram.frob_sq_cross - gram.row_norms_sq.squaredNorm()) / (n * (n - 1.0));
}

double PreparedInstruments::trace_sigma2_hat() const {
    if (!(trace_sigma2_hat_ > 0.0))
        throw Error(Errc::degenerate_instruments,
                    "estimated tr(Sigma^2) is not positive (instrument rows mutually orthogonal)");
    return trace_sigma2_hat_;
}

double q_value(const Eigen::MatrixXd& z, const Eigen::VectorXd& unit_residual, double trace_sbar,
               double trace_sigma2) {
    const double n = double(z.rows());
    const double quad = (z.transpose() * unit_residual).squaredNorm() / n;
    return std::sqrt(n * n / (2.0 * trace_sigma2)) * (quad - trace_sbar / n);
}

TestOutcome q_statistic(const PreparedInstruments& prepared, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& x, const Hypothesis& hyp,
                        std::optional<double> trace_sigma2) {
    hyp.validate();
    const auto& z = prepared.z();
    if (y.size() != z.n() || x.size() != z.n())
        throw Error(Errc::validation, "q_statistic: dimension mismatch");

    TestOutcome out;
    if (trace_sigma2) {
        if (!(*trace_sigma2 > 0.0) || !std::isfinite(*trace_sigma2))
            throw Error(Errc::validation, "supplied tr(Sigma^2) must be positive and finite");
        out.mode = Mode::oracle;
        out.trace_sigma2 = *trace_sigma2;
    } else {
        out.mode = Mode::feasible;
        out.trace_sigma2 = prepared.trace_sigma2_hat();
    }
    const auto resid = normalize_residual(y, x, hyp.beta0);
    out.trace_sbar = prepared.trace_sbar();
    out.statistic = q_value(z.values(), resid.unit, out.trace_sbar, out.trace_sigma2);
    out.p_value = p_value(out.statistic, hyp.alternative);
    out.reject = out.p_value < hyp.alpha;
    out.n = z.n();
    out.k = z.k();
    return out;
}

TestOutcome q_statistic(const Dataset& data, const Hypothesis& hyp,
                        std::optional<double> trace_sigma2) {
    const PreparedInstruments prepared(data.z());
    return q_statistic(prepared, data.y(), data.x(), hyp, trace_sigma2);
}

double BetaGrid::point(int i) const {
    if (i == steps - 1)
        return hi;
    return lo + (hi - lo) * double(i) / double(steps - 1);
}

std::vector<Interval> invert_ci(const Dataset& data, double alpha, const BetaGrid& grid,
                                Alternative alternative) {
    if (!(grid.lo <= grid.hi) || grid.steps < 1 || !std::isfinite(grid.lo) ||
        !std::isfinite(grid.hi))
        throw Error(Errc::validation, "invert_ci: need finite lo <= hi and steps >= 1");
    if (grid.steps >= 2 && !(grid.lo < grid.hi))
        throw Error(Errc::validation, "invert_ci: need lo < hi for steps >= 2");
    if (grid.steps == 1 && grid.lo != grid.hi)
        throw Error(Errc::validation, "invert_ci: a single-point grid needs lo == hi");
    Hypothesis hyp{0.0, alternative, alpha};
    hyp.validate();

    const PreparedInstruments prepared(data.z());
    const double t2 = prepared.trace_sigma2_hat();
    const double n = double(data.n());
    const double scale = std::sqrt(n * n / (2.0 * t2));
    const double centre = prepared.trace_sbar() / n;

    // Z'Y* = Z'y - beta0 Z'x: one K-vector update per grid point.
    const Eigen::MatrixXd& z = data.z().values();
    const Eigen::VectorXd zy = z.transpose() * data.y();
    const Eigen::VectorXd zx = z.transpose() * data.x();

    std::vector<Interval> out;
    bool open = false;
    for (int i = 0; i < grid.steps; ++i) {
        const double b = grid.point(i);
        const double norm_sq = (data.y() - b * data.x()).squaredNorm();
        if (!(norm_sq >= 1e-300))
            throw Error(Errc::degenerate_residual,
                        "null residual is zero at beta0 = " + std::to_string(b));
        const double quad = (zy - b * zx).squaredNorm() / (n * norm_sq);
        const double stat = scale * (quad - centre);
        const bool accepted = !(p_value(stat, alternative) < alpha);
        if (accepted) {
            if (open)
                out.back().hi = b;
            else
                out.push_back({b, b});
        }
        open = accepted;
    }
    return out;
}

}  // namespace hdiv
