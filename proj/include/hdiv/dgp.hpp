#pragma once

// Synthetic data for the Monte Carlo study: latent-factor instruments with a
// Toeplitz idiosyncratic part, three dependent structural-error processes,
// correlated first-stage errors and local-alternative calibration.

#include <array>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hdiv/linalg.hpp"
#include "hdiv/random.hpp"
#include "hdiv/statistic.hpp"

namespace hdiv {

/// Direction of the first-stage coefficients; the length is fixed by pi_norm_sq.
enum class PiDirection {
    equal_weights,  // 1_K / sqrt(K)
    random,         // uniform on the sphere, redrawn every replication
};

struct InstrumentDesign {
    Eigen::Index k = 100;
    double toeplitz_rho = 0.7;
    std::array<double, 3> factor_norms_sq{6.0, 5.0, 3.0};  // diag of Lambda'Lambda
    double pi_norm_sq = 1.0;
    bool factors = true;
    PiDirection pi_direction = PiDirection::random;

    void validate() const;
    std::string canonical() const;
};

struct GraphSpec {
    double expected_degree = 5.0;  // Erdos-Renyi
};

struct NetworkSpec {
    double gamma = 0.5;
    GraphSpec graph;
};

enum class SpatialForm { literal, autoregressive };

struct SpatialSpec {
    double rho_s = 0.8;
    double edge_threshold = 0.5;
    SpatialForm form = SpatialForm::autoregressive;
};

struct MultiplicativeSpec {
    double a = 10.0;
    double mix_weight = 0.7;
    double shift = 2.4;
};

using ErrorProcessSpec = std::variant<NetworkSpec, SpatialSpec, MultiplicativeSpec>;

void validate(const ErrorProcessSpec& spec);
/// Short table label: NET-E, SPA-E or MUL-E.
std::string process_label(const ErrorProcessSpec& spec);
/// Full parameter string; stable across runs and used for stream derivation.
std::string canonical(const ErrorProcessSpec& spec);

/// One Monte Carlo grid cell.
struct SimCell {
    Eigen::Index n = 400;
    double ratio = 0.25;
    double rho = 0.5;
    double h = 0.0;
    ErrorProcessSpec process = NetworkSpec{};
    double beta0 = 2.0;
    InstrumentDesign design;  // design.k == n * ratio

    Eigen::Index k() const { return design.k; }
    void validate() const;
    /// Everything that determines the random draws; excludes rho, h and beta0.
    std::string draw_key() const;
    std::string label() const;
};

/// Builds a cell with design.k set from n * ratio (must be a positive integer).
SimCell make_cell(Eigen::Index n, double ratio, double rho, double h, ErrorProcessSpec process,
                  double beta0 = 2.0, InstrumentDesign base = {});

// --- instruments -----------------------------------------------------------

Eigen::MatrixXd toeplitz_covariance(Eigen::Index k, double rho);
/// K x 3 loadings: column m is sqrt(factor_norms_sq[m]) times the m-th unit vector.
Eigen::MatrixXd factor_loadings(const InstrumentDesign& design);

/// z_i = Lambda eta_i + Sigma^{1/2} f_i with Sigma^{1/2} computed once.
class InstrumentGenerator {
public:
    explicit InstrumentGenerator(const InstrumentDesign& design);

    const InstrumentDesign& design() const noexcept { return design_; }
    const Eigen::MatrixXd& sigma_root() const noexcept { return sigma_root_; }

    /// Draw order: f (n x K, row by row) then eta (n x 3, row by row).
    InstrumentMatrix draw(Eigen::Index n, RandomStream& rng) const;

private:
    InstrumentDesign design_;
    Eigen::MatrixXd sigma_root_;
};

InstrumentMatrix gen_instruments(const InstrumentDesign& design, Eigen::Index n, RandomStream& rng);

/// tr((Lambda Lambda' + Sigma)^2) in closed form.
double pop_trace_sigma2(const InstrumentDesign& design);

/// Delta = h (2 tr)^{1/5} / sqrt(n).
double delta_from_h(double h, double trace_sigma2, Eigen::Index n);
double h_from_delta(double delta, double trace_sigma2, Eigen::Index n);

// --- structural errors -----------------------------------------------------

/// Row-standardized 0/1 weights with w_ij = w_ji = 1 iff the pair's uniform
/// exceeds `threshold`. `pair_uniforms` lists pairs i < j in row-major order.
Eigen::MatrixXd spatial_weights(Eigen::Index n, double threshold,
                                const Eigen::VectorXd& pair_uniforms);
/// Scales each row with at least one neighbour to sum to one.
Eigen::MatrixXd row_standardize(Eigen::MatrixXd adjacency);
Eigen::VectorXd spatial_errors(const Eigen::MatrixXd& weights, const Eigen::VectorXd& innovations,
                               const SpatialSpec& spec);
Eigen::VectorXd gen_spatial_errors(const SpatialSpec& spec, Eigen::Index n, RandomStream& rng);

struct Graph {
    std::vector<std::vector<Eigen::Index>> neighbors;

    Eigen::Index size() const { return Eigen::Index(neighbors.size()); }
    Eigen::Index degree(Eigen::Index i) const { return Eigen::Index(neighbors[i].size()); }
};

/// Edge (i, j) present iff the pair's uniform is below p.
Graph erdos_renyi(Eigen::Index n, double p, const Eigen::VectorXd& pair_uniforms);
/// (eta_i + gamma sum_{j ~ i} eta_j) / sqrt(1 + gamma^2 d_i).
Eigen::VectorXd network_errors(const Graph& graph, const Eigen::VectorXd& eta, double gamma);
Eigen::VectorXd gen_network_errors(const NetworkSpec& spec, Eigen::Index n, RandomStream& rng);

struct MultiplicativeScales {
    double s1;
    double s2;
};
MultiplicativeScales multiplicative_scales(const MultiplicativeSpec& spec);
/// eps_i = s1 [zeta_i (omega_i + shift) - s2], omega_i = sqrt(1-w^2) eta1_i + w eta2,
/// zeta_i = 1 + a i / N (i counted from 1).
Eigen::VectorXd multiplicative_errors(const MultiplicativeSpec& spec, const Eigen::VectorXd& eta1,
                                      double eta2);
Eigen::VectorXd gen_multiplicative_errors(const MultiplicativeSpec& spec, Eigen::Index n,
                                          RandomStream& rng);

Eigen::VectorXd gen_errors(const ErrorProcessSpec& spec, Eigen::Index n, RandomStream& rng);

/// v = rho eps + sqrt(1 - rho^2) eta3.
Eigen::VectorXd first_stage_errors(const Eigen::VectorXd& eps, double rho,
                                   const Eigen::VectorXd& eta3);
Eigen::VectorXd gen_first_stage_errors(const Eigen::VectorXd& eps, double rho, RandomStream& rng);

// --- assembly --------------------------------------------------------------

/// Random inputs of one replication; shared by every cell with the same draw key.
struct ReplicationDraws {
    InstrumentMatrix z;
    Eigen::VectorXd eps;
    Eigen::VectorXd eta3;
    Eigen::VectorXd pi;
};

/// Draw order: instruments, structural errors, first-stage innovations, then
/// (for PiDirection::random) K normals giving the direction of pi.
ReplicationDraws draw_replication(const SimCell& cell, const InstrumentGenerator& instruments,
                                  RandomStream& rng);

/// Simulation-only quantities that never enter the public Dataset.
struct Truth {
    Eigen::VectorXd eps;
    Eigen::VectorXd v;
    Eigen::VectorXd pi;
    double beta = 0.0;
};

struct Outcomes {
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Eigen::VectorXd v;
    double beta = 0.0;
};

/// pi with pi'pi = pi_norm_sq; `rng` is only read for PiDirection::random.
Eigen::VectorXd first_stage_coefficients(const InstrumentDesign& design, RandomStream& rng);

/// x = Z pi + v, y = x beta + eps with beta = beta0 + delta.
Outcomes make_outcomes(const SimCell& cell, const ReplicationDraws& draws,
                       const Eigen::VectorXd& z_pi, double delta);

struct SimulatedData {
    Dataset data;
    Truth truth;
};

SimulatedData assemble_dataset(const SimCell& cell, RandomStream& rng);
SimulatedData assemble_dataset(const SimCell& cell, const InstrumentGenerator& instruments,
                               RandomStream& rng);

}  // namespace hdiv
