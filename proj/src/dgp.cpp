#include "hdiv/dgp.hpp"

#include <cmath>
#include <cstdio>

namespace hdiv {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

void InstrumentDesign::validate() const {
    if (k < 1)
        throw Error(Errc::validation, "design: k must be positive");
    if (!(toeplitz_rho >= 0.0 && toeplitz_rho < 1.0))
        throw Error(Errc::validation, "design: toeplitz_rho must lie in [0, 1)");
    if (!(pi_norm_sq > 0.0) || !std::isfinite(pi_norm_sq))
        throw Error(Errc::validation, "design: pi_norm_sq must be positive");
    if (factors) {
        if (k < 3)
            throw Error(Errc::validation, "design: k >= 3 required with latent factors");
        for (double f : factor_norms_sq)
            if (!(f > 0.0) || !std::isfinite(f))
                throw Error(Errc::validation, "design: factor_norms_sq must be positive");
    }
}

std::string InstrumentDesign::canonical() const {
    std::string out = "design(k=" + std::to_string(k) + ",toeplitz_rho=" + num(toeplitz_rho);
    if (factors)
        out += ",factors=" + num(factor_norms_sq[0]) + "/" + num(factor_norms_sq[1]) + "/" +
               num(factor_norms_sq[2]);
    else
        out += ",factors=none";
    return out + ",pi_norm_sq=" + num(pi_norm_sq) +
           (pi_direction == PiDirection::random ? ",pi=random" : ",pi=equal") + ")";
}

void validate(const ErrorProcessSpec& spec) {
    std::visit(overloaded{
                   [](const NetworkSpec& s) {
                       if (!std::isfinite(s.gamma))
                           throw Error(Errc::validation, "network: gamma must be finite");
                       if (!(s.graph.expected_degree >= 0.0))
                           throw Error(Errc::validation,
                                       "network: expected_degree must be nonnegative");
                   },
                   [](const SpatialSpec& s) {
                       if (!(s.edge_threshold > 0.0 && s.edge_threshold < 1.0))
                           throw Error(Errc::validation,
                                       "spatial: edge_threshold must lie in (0, 1)");
                       if (!std::isfinite(s.rho_s))
                           throw Error(Errc::validation, "spatial: rho_s must be finite");
                       if (s.form == SpatialForm::autoregressive && !(std::abs(s.rho_s) < 1.0))
                           throw Error(Errc::validation,
                                       "spatial: |rho_s| < 1 required for the autoregressive form");
                   },
                   [](const MultiplicativeSpec& s) {
                       if (!(s.a >= 0.0) || !std::isfinite(s.a))
                           throw Error(Errc::validation, "multiplicative: a must be >= 0");
                       if (!(std::abs(s.mix_weight) <= 1.0))
                           throw Error(Errc::validation,
                                       "multiplicative: |mix_weight| must be <= 1");
                       if (!std::isfinite(s.shift))
                           throw Error(Errc::validation, "multiplicative: shift must be finite");
                   },
               },
               spec);
}

std::string process_label(const ErrorProcessSpec& spec) {
    return std::visit(overloaded{
                          [](const NetworkSpec&) { return std::string("NET-E"); },
                          [](const SpatialSpec&) { return std::string("SPA-E"); },
                          [](const MultiplicativeSpec&) { return std::string("MUL-E"); },
                      },
                      spec);
}

std::string canonical(const ErrorProcessSpec& spec) {
    return std::visit(
        overloaded{
            [](const NetworkSpec& s) {
                return "network(gamma=" + num(s.gamma) +
                       ",expected_degree=" + num(s.graph.expected_degree) + ")";
            },
            [](const SpatialSpec& s) {
                return "spatial(rho_s=" + num(s.rho_s) + ",edge_threshold=" +
                       num(s.edge_threshold) + ",form=" +
                       (s.form == SpatialForm::literal ? "literal" : "autoregressive") + ")";
            },
            [](const MultiplicativeSpec& s) {
                return "multiplicative(a=" + num(s.a) + ",mix_weight=" + num(s.mix_weight) +
                       ",shift=" + num(s.shift) + ")";
            },
        },
        spec);
}

void SimCell::validate() const {
    if (n < 2)
        throw Error(Errc::validation, "cell: n must be at least 2");
    if (!(ratio > 0.0))
        throw Error(Errc::validation, "cell: ratio must be positive");
    const double k_exact = double(n) * ratio;
    if (std::abs(k_exact - double(design.k)) > 1e-9 * std::max(1.0, k_exact))
        throw Error(Errc::validation, "cell: n * ratio must equal design.k");
    if (!(std::abs(rho) <= 1.0))
        throw Error(Errc::validation, "cell: |rho| must be <= 1");
    if (!(h >= 0.0) || !std::isfinite(h))
        throw Error(Errc::validation, "cell: h must be finite and nonnegative");
    if (!std::isfinite(beta0))
        throw Error(Errc::validation, "cell: beta0 must be finite");
    design.validate();
    hdiv::validate(process);
}

std::string SimCell::draw_key() const {
    return "n=" + std::to_string(n) + ";" + design.canonical() + ";" + canonical(process);
}

std::string SimCell::label() const {
    return process_label(process) + " n=" + std::to_string(n) + " K=" + std::to_string(k()) +
           " rho=" + num(rho) + " h=" + num(h);
}

SimCell make_cell(Eigen::Index n, double ratio, double rho, double h, ErrorProcessSpec process,
                  double beta0, InstrumentDesign base) {
    const double k_exact = double(n) * ratio;
    const double k_round = std::round(k_exact);
    if (!(k_round >= 1.0) || std::abs(k_exact - k_round) > 1e-9 * std::max(1.0, k_exact))
        throw Error(Errc::validation, "n * ratio must be a positive integer (n=" +
                                          std::to_string(n) + ", ratio=" + num(ratio) + ")");
    SimCell cell;
    cell.n = n;
    cell.ratio = ratio;
    cell.rho = rho;
    cell.h = h;
    cell.process = std::move(process);
    cell.beta0 = beta0;
    cell.design = base;
    cell.design.k = Eigen::Index(k_round);
    cell.validate();
    return cell;
}

// --- instruments -----------------------------------------------------------

Eigen::MatrixXd toeplitz_covariance(Eigen::Index k, double rho) {
    Eigen::MatrixXd t(k, k);
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < k; ++i)
            t(i, j) = std::pow(rho, double(std::abs(i - j)));
    return t;
}

Eigen::MatrixXd factor_loadings(const InstrumentDesign& design) {
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(design.k, 3);
    if (design.factors)
        for (int m = 0; m < 3; ++m)
            lambda(m, m) = std::sqrt(design.factor_norms_sq[m]);
    return lambda;
}

InstrumentGenerator::InstrumentGenerator(const InstrumentDesign& design) : design_(design) {
    design_.validate();
    sigma_root_ = design_.toeplitz_rho == 0.0
                      ? Eigen::MatrixXd::Identity(design_.k, design_.k).eval()
                      : sym_sqrt(toeplitz_covariance(design_.k, design_.toeplitz_rho));
}

InstrumentMatrix InstrumentGenerator::draw(Eigen::Index n, RandomStream& rng) const {
    if (n < 2)
        throw Error(Errc::validation, "gen_instruments: n must be at least 2");
    const Eigen::MatrixXd f = normal_matrix(n, design_.k, rng);
    Eigen::MatrixXd z(n, design_.k);
    z.noalias() = f * sigma_root_;
    if (design_.factors) {
        const Eigen::VectorXd eta = standardized_t5(3 * n, rng);
        for (int m = 0; m < 3; ++m) {
            const double load = std::sqrt(design_.factor_norms_sq[m]);
            for (Eigen::Index i = 0; i < n; ++i)
                z(i, m) += load * eta[3 * i + m];
        }
    }
    return InstrumentMatrix(std::move(z));
}

InstrumentMatrix gen_instruments(const InstrumentDesign& design, Eigen::Index n,
                                 RandomStream& rng) {
    return InstrumentGenerator(design).draw(n, rng);
}

double pop_trace_sigma2(const InstrumentDesign& design) {
    design.validate();
    const double r2 = design.toeplitz_rho * design.toeplitz_rho;
    const auto k = design.k;
    // ||T||_F^2 = K + 2 sum_{d>=1} (K - d) rho^{2d}
    double toeplitz = double(k);
    double power = 1.0;
    for (Eigen::Index d = 1; d < k; ++d) {
        power *= r2;
        if (power == 0.0)
            break;
        toeplitz += 2.0 * double(k - d) * power;
    }
    double total = toeplitz;
    if (design.factors)
        for (double f : design.factor_norms_sq)
            total += 2.0 * f + f * f;  // Toeplitz diagonal is 1
    return total;
}

double delta_from_h(double h, double trace_sigma2, Eigen::Index n) {
    if (!(trace_sigma2 > 0.0) || n < 1 || !(h >= 0.0))
        throw Error(Errc::validation, "delta_from_h: need trace > 0, n >= 1, h >= 0");
    return h * std::pow(2.0 * trace_sigma2, 0.2) / std::sqrt(double(n));
}

double h_from_delta(double delta, double trace_sigma2, Eigen::Index n) {
    if (!(trace_sigma2 > 0.0) || n < 1)
        throw Error(Errc::validation, "h_from_delta: need trace > 0, n >= 1");
    return delta * std::sqrt(double(n)) / std::pow(2.0 * trace_sigma2, 0.2);
}

// --- structural errors -----------------------------------------------------

Eigen::MatrixXd row_standardize(Eigen::MatrixXd adjacency) {
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
        const double s = adjacency.row(i).sum();
        if (s > 0.0)
            adjacency.row(i) /= s;
    }
    return adjacency;
}

Eigen::MatrixXd spatial_weights(Eigen::Index n, double threshold,
                                const Eigen::VectorXd& pair_uniforms) {
    if (pair_uniforms.size() != n * (n - 1) / 2)
        throw Error(Errc::validation, "spatial_weights: need one uniform per pair");
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j, ++p)
            if (pair_uniforms[p] > threshold)
                adj(i, j) = adj(j, i) = 1.0;
    return row_standardize(std::move(adj));
}

Eigen::VectorXd spatial_errors(const Eigen::MatrixXd& weights, const Eigen::VectorXd& innovations,
                               const SpatialSpec& spec) {
    if (spec.form == SpatialForm::literal)
        return spec.rho_s * (weights * innovations);
    const Eigen::Index n = weights.rows();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - spec.rho_s * weights;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd eps = lu.solve(innovations);
    if (!eps.allFinite() || !(std::abs(lu.determinant()) > 0.0))
        throw Error(Errc::numeric, "spatial: I - rho_s W is singular");
    return eps;
}

Eigen::VectorXd gen_spatial_errors(const SpatialSpec& spec, Eigen::Index n, RandomStream& rng) {
    validate(ErrorProcessSpec{spec});
    if (n < 2)
        throw Error(Errc::validation, "gen_spatial_errors: n must be at least 2");
    const Eigen::VectorXd u = uniform_vector(n * (n - 1) / 2, rng);
    const Eigen::MatrixXd w = spatial_weights(n, spec.edge_threshold, u);
    const Eigen::VectorXd e = standardized_t5(n, rng);
    return spatial_errors(w, e, spec);
}

Graph erdos_renyi(Eigen::Index n, double p, const Eigen::VectorXd& pair_uniforms) {
    if (pair_uniforms.size() != n * (n - 1) / 2)
        throw Error(Errc::validation, "erdos_renyi: need one uniform per pair");
    Graph g;
    g.neighbors.resize(std::size_t(n));
    Eigen::Index q = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j, ++q)
            if (pair_uniforms[q] < p) {
                g.neighbors[i].push_back(j);
                g.neighbors[j].push_back(i);
            }
    return g;
}

Eigen::VectorXd network_errors(const Graph& graph, const Eigen::VectorXd& eta, double gamma) {
    if (eta.size() != graph.size())
        throw Error(Errc::validation, "network_errors: length mismatch");
    Eigen::VectorXd eps(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double s = 0.0;
        for (auto j : graph.neighbors[i])
            s += eta[j];
        eps[i] = (eta[i] + gamma * s) / std::sqrt(1.0 + gamma * gamma * double(graph.degree(i)));
    }
    return eps;
}

Eigen::VectorXd gen_network_errors(const NetworkSpec& spec, Eigen::Index n, RandomStream& rng) {
    validate(ErrorProcessSpec{spec});
    if (n < 2)
        throw Error(Errc::validation, "gen_network_errors: n must be at least 2");
    const double p = std::min(1.0, spec.graph.expected_degree / double(n - 1));
    const Eigen::VectorXd u = uniform_vector(n * (n - 1) / 2, rng);
    const Graph g = erdos_renyi(n, p, u);
    const Eigen::VectorXd eta = normal_vector(n, rng);
    return network_errors(g, eta, spec.gamma);
}

MultiplicativeScales multiplicative_scales(const MultiplicativeSpec& spec) {
    const double a = spec.a;
    // Averaged over i, Var = E[zeta^2] Var(omega) + Var(zeta) shift^2 with
    // zeta ~ 1 + a U(0,1): (1 + a/2)^2 + (1 + shift^2) a^2 / 12. At shift 2.4
    // this is (1 + a/2)^2 + 169 a^2 / 300.
    const double variance =
        (1.0 + a / 2.0) * (1.0 + a / 2.0) + (1.0 + spec.shift * spec.shift) * a * a / 12.0;
    // s2 = shift * mean(zeta); equals 1.2 (a + 2) at the default shift of 2.4.
    return {1.0 / std::sqrt(variance), spec.shift * (1.0 + a / 2.0)};
}

Eigen::VectorXd multiplicative_errors(const MultiplicativeSpec& spec, const Eigen::VectorXd& eta1,
                                      double eta2) {
    const auto [s1, s2] = multiplicative_scales(spec);
    const Eigen::Index n = eta1.size();
    const double w = spec.mix_weight;
    const double c = std::sqrt(1.0 - w * w);
    Eigen::VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double zeta = 1.0 + spec.a * double(i + 1) / double(n);
        const double omega = c * eta1[i] + w * eta2;
        eps[i] = s1 * (zeta * (omega + spec.shift) - s2);
    }
    return eps;
}

Eigen::VectorXd gen_multiplicative_errors(const MultiplicativeSpec& spec, Eigen::Index n,
                                          RandomStream& rng) {
    validate(ErrorProcessSpec{spec});
    if (n < 1)
        throw Error(Errc::validation, "gen_multiplicative_errors: n must be positive");
    const Eigen::VectorXd eta1 = standardized_t5(n, rng);
    const double eta2 = standardized_chi2(6.0, rng);  // common shock
    return multiplicative_errors(spec, eta1, eta2);
}

Eigen::VectorXd gen_errors(const ErrorProcessSpec& spec, Eigen::Index n, RandomStream& rng) {
    return std::visit(overloaded{
                          [&](const NetworkSpec& s) { return gen_network_errors(s, n, rng); },
                          [&](const SpatialSpec& s) { return gen_spatial_errors(s, n, rng); },
                          [&](const MultiplicativeSpec& s) {
                              return gen_multiplicative_errors(s, n, rng);
                          },
                      },
                      spec);
}

Eigen::VectorXd first_stage_errors(const Eigen::VectorXd& eps, double rho,
                                   const Eigen::VectorXd& eta3) {
    if (!(std::abs(rho) <= 1.0))
        throw Error(Errc::validation, "first-stage errors: |rho| must be <= 1");
    if (eta3.size() != eps.size())
        throw Error(Errc::validation, "first-stage errors: length mismatch");
    if (std::abs(rho) == 1.0)
        return rho * eps;
    return rho * eps + std::sqrt(1.0 - rho * rho) * eta3;
}

Eigen::VectorXd gen_first_stage_errors(const Eigen::VectorXd& eps, double rho, RandomStream& rng) {
    return first_stage_errors(eps, rho, standardized_t5(eps.size(), rng));
}

// --- assembly --------------------------------------------------------------

ReplicationDraws draw_replication(const SimCell& cell, const InstrumentGenerator& instruments,
                                  RandomStream& rng) {
    InstrumentMatrix z = instruments.draw(cell.n, rng);
    Eigen::VectorXd eps = gen_errors(cell.process, cell.n, rng);
    Eigen::VectorXd eta3 = standardized_t5(cell.n, rng);
    Eigen::VectorXd pi = first_stage_coefficients(cell.design, rng);
    return {std::move(z), std::move(eps), std::move(eta3), std::move(pi)};
}

Eigen::VectorXd first_stage_coefficients(const InstrumentDesign& design, RandomStream& rng) {
    if (design.pi_direction == PiDirection::equal_weights)
        return Eigen::VectorXd::Constant(design.k, std::sqrt(design.pi_norm_sq / double(design.k)));
    Eigen::VectorXd dir = normal_vector(design.k, rng);
    return std::sqrt(design.pi_norm_sq) * dir / dir.norm();
}

Outcomes make_outcomes(const SimCell& cell, const ReplicationDraws& draws,
                       const Eigen::VectorXd& z_pi, double delta) {
    Outcomes out;
    out.v = first_stage_errors(draws.eps, cell.rho, draws.eta3);
    out.x = z_pi + out.v;
    out.beta = cell.beta0 + delta;
    out.y = out.beta * out.x + draws.eps;
    return out;
}

SimulatedData assemble_dataset(const SimCell& cell, const InstrumentGenerator& instruments,
                               RandomStream& rng) {
    cell.validate();
    ReplicationDraws draws = draw_replication(cell, instruments, rng);
    const Eigen::VectorXd z_pi = draws.z.values() * draws.pi;
    const double delta = delta_from_h(cell.h, pop_trace_sigma2(cell.design), cell.n);
    Outcomes o = make_outcomes(cell, draws, z_pi, delta);
    Truth truth{draws.eps, o.v, draws.pi, o.beta};
    return {Dataset(std::move(o.y), std::move(o.x), std::move(draws.z)), std::move(truth)};
}

SimulatedData assemble_dataset(const SimCell& cell, RandomStream& rng) {
    return assemble_dataset(cell, InstrumentGenerator(cell.design), rng);
}

}  // namespace hdiv
