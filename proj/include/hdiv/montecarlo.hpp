#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdiv/dgp.hpp"
#include "hdiv/statistic.hpp"

namespace hdiv {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Worker count: explicit value, else HDIV_THREADS, else hardware concurrency.
int resolve_threads(std::optional<int> requested);

/// Runs body(i) for i in [0, count) on `threads` workers. body(i, worker)
/// receives the worker index so callers can keep per-worker accumulators.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t index, int worker)>& body);

struct RejectionRate {
    SimCell cell;
    long reps = 0;        // replications entering the rate
    long rejections = 0;
    long degenerate = 0;  // excluded replications
    double rate = 0.0;
    double mc_std_err = 0.0;

    long requested() const { return reps + degenerate; }
    /// More than 1% of requested replications were degenerate.
    bool failed() const { return 100 * degenerate > requested(); }
};

struct TableMetadata {
    std::uint64_t base_seed = 0;
    long reps = 0;
    double alpha = 0.05;
    Alternative alternative = Alternative::greater;
    double beta0 = 2.0;
    std::string software_version = kSoftwareVersion;
};

struct RejectionTable {
    std::vector<RejectionRate> entries;
    TableMetadata meta;

    const RejectionRate* find(const std::string& process, double rho, double ratio,
                              double h) const;
};

RejectionRate make_rate(const SimCell& cell, long rejections, long valid, long degenerate);

/// Stream for replication r of cells sharing `cell.draw_key()`.
RandomStream cell_stream(std::uint64_t base_seed, const SimCell& cell, std::uint64_t replication);

RejectionRate run_cell(const SimCell& cell, long reps, std::uint64_t base_seed,
                       const Hypothesis& hyp, std::optional<int> threads = std::nullopt);

/// Throws Errc::cell_failure naming every cell whose degenerate share exceeds 1%.
RejectionTable run_grid(const std::vector<SimCell>& grid, long reps, std::uint64_t base_seed,
                        const Hypothesis& hyp, std::optional<int> threads = std::nullopt);

/// Cells in the order: h, ratio, process, rho.
std::vector<SimCell> make_grid(Eigen::Index n, const std::vector<double>& ratios,
                               const std::vector<double>& rhos, const std::vector<double>& hs,
                               const std::vector<ErrorProcessSpec>& processes, double beta0,
                               const InstrumentDesign& design);

/// 3 processes x 3 rho x 5 ratios x 4 h at N = 400.
std::vector<SimCell> table1_grid();

struct Noncentrality {
    double value = 0.0;
    std::array<double, 3> terms{};  // signal, first-stage noise, cross
};

Noncentrality noncentrality(const Eigen::VectorXd& pi, const Eigen::VectorXd& v,
                            const Eigen::VectorXd& eps, const InstrumentMatrix& z, double h,
                            double trace_sigma2);
Noncentrality noncentrality(const Truth& truth, const InstrumentMatrix& z, double h,
                            double trace_sigma2);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic Kolmogorov tail probability P(K > lambda).
double kolmogorov_sf(double lambda);
/// One-sample KS test against N(0, 1).
KsResult ks_test_normal(std::vector<double> sample);

struct NormalityConfig {
    Eigen::Index n = 400;
    Eigen::Index k = 100;
    long reps = 2000;
    double shift = 0.0;  // added to every statistic (negative control)
};

struct NormalityResult {
    double ks_statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> statistics;
};

/// Feasible statistics under an iid-normal null (Z, eps and x independent
/// standard normal, beta = beta0) and their KS distance to N(0, 1).
NormalityResult null_normality_diagnostic(const NormalityConfig& config, std::uint64_t seed,
                                          std::optional<int> threads = std::nullopt);

}  // namespace hdiv
