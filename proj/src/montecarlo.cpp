#include "hdiv/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <numbers>
#include <string_view>
#include <thread>

namespace hdiv {

int resolve_threads(std::optional<int> requested) {
    if (requested) {
        if (*requested < 1)
            throw Error(Errc::validation, "thread count must be positive");
        return *requested;
    }
    if (const char* env = std::getenv("HDIV_THREADS")) {
        const std::string_view text(env);
        int value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size() || value < 1)
            throw Error(Errc::validation, "HDIV_THREADS must be a positive integer");
        return value;
    }
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t, int)>& body) {
    const int workers = int(std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        pool.reserve(std::size_t(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (;;) {
                    if (failed.load())
                        return;
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count)
                        return;
                    try {
                        body(i, w);
                    } catch (...) {
                        if (!failed.exchange(true))
                            failure = std::current_exception();
                        return;
                    }
                }
            });
    }
    if (failure)
        std::rethrow_exception(failure);
}

const RejectionRate* RejectionTable::find(const std::string& process, double rho, double ratio,
                                          double h) const {
    for (const auto& e : entries)
        if (process_label(e.cell.process) == process && e.cell.rho == rho &&
            e.cell.ratio == ratio && e.cell.h == h)
            return &e;
    return nullptr;
}

RejectionRate make_rate(const SimCell& cell, long rejections, long valid, long degenerate) {
    RejectionRate r;
    r.cell = cell;
    r.reps = valid;
    r.rejections = rejections;
    r.degenerate = degenerate;
    r.rate = valid > 0 ? double(rejections) / double(valid) : 0.0;
    r.mc_std_err = valid > 0 ? std::sqrt(r.rate * (1.0 - r.rate) / double(valid)) : 0.0;
    return r;
}

RandomStream cell_stream(std::uint64_t base_seed, const SimCell& cell,
                         std::uint64_t replication) {
    return derive_stream(base_seed, stable_hash(cell.draw_key()), replication);
}

namespace {

// Cells sharing a draw key reuse each replication's instruments and errors;
// only rho, h and beta0 differ between them.
struct DrawGroup {
    std::vector<std::size_t> cells;
    std::shared_ptr<const InstrumentGenerator> generator;
    std::vector<double> deltas;  // per member
};

}  // namespace

RejectionTable run_grid(const std::vector<SimCell>& grid, long reps, std::uint64_t base_seed,
                        const Hypothesis& hyp, std::optional<int> threads) {
    if (grid.empty())
        throw Error(Errc::validation, "run_grid: empty grid");
    if (reps < 1)
        throw Error(Errc::validation, "run_grid: reps must be at least 1");
    hyp.validate();
    for (const auto& c : grid)
        c.validate();
    const int workers = resolve_threads(threads);

    std::vector<DrawGroup> groups;
    {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            auto [it, inserted] = index.emplace(grid[i].draw_key(), groups.size());
            if (inserted)
                groups.emplace_back();
            groups[it->second].cells.push_back(i);
        }
    }
    // Sigma^{1/2} depends on the design only; compute each once.
    std::map<std::string, std::shared_ptr<const InstrumentGenerator>> generators;
    for (auto& g : groups) {
        const auto& design = grid[g.cells.front()].design;
        auto& slot = generators[design.canonical()];
        if (!slot)
            slot = std::make_shared<const InstrumentGenerator>(design);
        g.generator = slot;
        const double trace = pop_trace_sigma2(design);
        for (auto c : g.cells)
            g.deltas.push_back(delta_from_h(grid[c].h, trace, grid[c].n));
    }

    const std::size_t per_group = std::size_t(reps);
    std::vector<std::vector<long>> rejections(std::size_t(workers),
                                              std::vector<long>(grid.size(), 0));
    std::vector<std::vector<long>> degenerate = rejections;

    parallel_for(groups.size() * per_group, workers, [&](std::size_t item, int w) {
        const DrawGroup& g = groups[item / per_group];
        const std::uint64_t r = item % per_group;
        const SimCell& lead = grid[g.cells.front()];
        RandomStream rng = cell_stream(base_seed, lead, r);
        const ReplicationDraws draws = draw_replication(lead, *g.generator, rng);

        std::optional<PreparedInstruments> prepared;
        try {
            prepared.emplace(draws.z);
            (void)prepared->trace_sigma2_hat();
        } catch (const Error& e) {
            if (!e.degenerate())
                throw;
            for (auto c : g.cells)
                ++degenerate[w][c];
            return;
        }
        const Eigen::VectorXd z_pi = draws.z.values() * draws.pi;
        for (std::size_t m = 0; m < g.cells.size(); ++m) {
            const std::size_t c = g.cells[m];
            const Outcomes o = make_outcomes(grid[c], draws, z_pi, g.deltas[m]);
            try {
                if (q_statistic(*prepared, o.y, o.x, hyp).reject)
                    ++rejections[w][c];
            } catch (const Error& e) {
                if (!e.degenerate())
                    throw;
                ++degenerate[w][c];
            }
        }
    });

    RejectionTable table;
    table.meta.base_seed = base_seed;
    table.meta.reps = reps;
    table.meta.alpha = hyp.alpha;
    table.meta.alternative = hyp.alternative;
    table.meta.beta0 = hyp.beta0;
    std::string failures;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        long rej = 0, deg = 0;
        for (int w = 0; w < workers; ++w) {
            rej += rejections[w][c];
            deg += degenerate[w][c];
        }
        table.entries.push_back(make_rate(grid[c], rej, reps - deg, deg));
        if (table.entries.back().failed())
            failures += "\n  " + grid[c].label() + ": " + std::to_string(deg) + " of " +
                        std::to_string(reps) + " replications degenerate";
    }
    if (!failures.empty())
        throw Error(Errc::cell_failure, "simulation cells failed:" + failures);
    return table;
}

RejectionRate run_cell(const SimCell& cell, long reps, std::uint64_t base_seed,
                       const Hypothesis& hyp, std::optional<int> threads) {
    return run_grid({cell}, reps, base_seed, hyp, threads).entries.front();
}

std::vector<SimCell> make_grid(Eigen::Index n, const std::vector<double>& ratios,
                               const std::vector<double>& rhos, const std::vector<double>& hs,
                               const std::vector<ErrorProcessSpec>& processes, double beta0,
                               const InstrumentDesign& design) {
    std::vector<SimCell> grid;
    for (double h : hs)
        for (double ratio : ratios)
            for (const auto& p : processes)
                for (double rho : rhos)
                    grid.push_back(make_cell(n, ratio, rho, h, p, beta0, design));
    return grid;
}

std::vector<SimCell> table1_grid() {
    return make_grid(400, {0.25, 0.5, 1.0, 2.0, 3.0}, {0.5, 0.9, -0.9}, {0.0, 1.0, 2.0, 5.0},
                     {NetworkSpec{}, SpatialSpec{}, MultiplicativeSpec{}}, 2.0, InstrumentDesign{});
}

Noncentrality noncentrality(const Eigen::VectorXd& pi, const Eigen::VectorXd& v,
                            const Eigen::VectorXd& eps, const InstrumentMatrix& z, double h,
                            double trace_sigma2) {
    const Eigen::MatrixXd& zm = z.values();
    const double n = double(z.n());
    if (pi.size() != z.k() || v.size() != z.n() || eps.size() != z.n())
        throw Error(Errc::validation, "noncentrality: dimension mismatch");
    if (!(trace_sigma2 > 0.0))
        throw Error(Errc::validation, "noncentrality: trace_sigma2 must be positive");
    const double eps_sq = eps.squaredNorm();
    if (!(eps_sq > 0.0))
        throw Error(Errc::validation, "noncentrality: structural errors are zero");

    const double tr_s = zm.squaredNorm() / n;  // tr(S_N) = tr(S̄_N)
    const double two_t = 2.0 * trace_sigma2;
    const double scale = n / (eps_sq * std::pow(two_t, 0.1));

    // pi' S_N^2 pi = ||S_N pi||^2 with S_N pi = Z'(Z pi) / N.
    const Eigen::VectorXd s_pi = zm.transpose() * (zm * pi) / n;
    const double t1 = scale * h * h * (s_pi.squaredNorm() - tr_s / n * pi.squaredNorm());

    const Eigen::VectorXd zv = zm.transpose() * v;
    const double t2 = scale * h * h * (zv.squaredNorm() / (n * n) - tr_s / (n * n) * v.squaredNorm());

    const Eigen::VectorXd ze = zm.transpose() * eps;
    const double t3 = 2.0 * std::sqrt(n) / (eps_sq * std::pow(two_t, 0.3)) * h *
                      (zv.dot(ze) / n - tr_s / n * v.dot(eps));

    Noncentrality out;
    out.terms = {t1, t2, t3};
    out.value = t1 + t2 + t3;
    return out;
}

Noncentrality noncentrality(const Truth& truth, const InstrumentMatrix& z, double h,
                            double trace_sigma2) {
    return noncentrality(truth.pi, truth.v, truth.eps, z, h, trace_sigma2);
}

double kolmogorov_sf(double lambda) {
    if (!(lambda > 0.0))
        return 1.0;
    constexpr double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // Jacobi-theta form converges fast for small lambda.
        const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
        double s = 0.0;
        for (int j = 1; j <= 50; ++j) {
            const double term = std::pow(y, double((2 * j - 1) * (2 * j - 1)));
            s += term;
            if (term < 1e-18 * s)
                break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        s += (j % 2 == 1 ? term : -term);
        if (term < 1e-18)
            break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test_normal(std::vector<double> sample) {
    if (sample.empty())
        throw Error(Errc::validation, "ks_test_normal: empty sample");
    std::sort(sample.begin(), sample.end());
    const double m = double(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = normal_cdf(sample[i]);
        d = std::max({d, double(i + 1) / m - f, f - double(i) / m});
    }
    const double root = std::sqrt(m);
    return {d, kolmogorov_sf((root + 0.12 + 0.11 / root) * d)};
}

NormalityResult null_normality_diagnostic(const NormalityConfig& config, std::uint64_t seed,
                                          std::optional<int> threads) {
    if (config.reps < 100)
        throw Error(Errc::validation, "null normality diagnostic needs reps >= 100");
    if (config.n < 2 || config.k < 1)
        throw Error(Errc::validation, "null normality diagnostic needs n >= 2, k >= 1");
    const std::uint64_t tag = stable_hash("null-normality;n=" + std::to_string(config.n) +
                                          ";k=" + std::to_string(config.k));
    NormalityResult out;
    out.statistics.assign(std::size_t(config.reps), 0.0);
    const Hypothesis hyp{0.0, Alternative::greater, 0.05};
    parallel_for(out.statistics.size(), resolve_threads(threads), [&](std::size_t r, int) {
        RandomStream rng = derive_stream(seed, tag, r);
        const InstrumentMatrix z(normal_matrix(config.n, config.k, rng));
        const Eigen::VectorXd eps = normal_vector(config.n, rng);
        const Eigen::VectorXd x = normal_vector(config.n, rng);
        const PreparedInstruments prepared(z);
        out.statistics[r] = q_statistic(prepared, eps, x, hyp).statistic + config.shift;
    });
    const KsResult ks = ks_test_normal(out.statistics);
    out.ks_statistic = ks.statistic;
    out.p_value = ks.p_value;
    return out;
}

}  // namespace hdiv
