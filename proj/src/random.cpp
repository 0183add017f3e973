#include "hdiv/random.hpp"

#include <cmath>
#include <random>

namespace hdiv {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = std::uint64_t(a) * b;
    lo = std::uint32_t(p);
    hi = std::uint32_t(p >> 32);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept {
    key_ = {std::uint32_t(key), std::uint32_t(key >> 32)};
    counter_ = {0u, 0u, std::uint32_t(stream), std::uint32_t(stream >> 32)};
}

Philox4x32::counter_type Philox4x32::block(counter_type ctr, key_type key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMul0, ctr[0], lo0, hi0);
        mulhilo(kMul1, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

void Philox4x32::increment() noexcept {
    if (++counter_[0] == 0)
        ++counter_[1];
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t stable_hash(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

RandomStream derive_stream(std::uint64_t base_seed, std::uint64_t tag_hash,
                           std::uint64_t replication) noexcept {
    const std::uint64_t key = splitmix64(splitmix64(base_seed) ^ tag_hash);
    return RandomStream(key, replication);
}

double uniform01(RandomStream& rng) { return std::generate_canonical<double, 53>(rng); }

Eigen::VectorXd uniform_vector(Eigen::Index n, RandomStream& rng) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = uniform01(rng);
    return out;
}

Eigen::VectorXd normal_vector(Eigen::Index n, RandomStream& rng) {
    std::normal_distribution<double> dist;
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = dist(rng);
    return out;
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
    std::normal_distribution<double> dist;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            out(i, j) = dist(rng);
    return out;
}

Eigen::VectorXd standardized_t5(Eigen::Index n, RandomStream& rng) {
    std::student_t_distribution<double> dist(5.0);
    const double scale = std::sqrt(3.0 / 5.0);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = scale * dist(rng);
    return out;
}

double standardized_chi2(double df, RandomStream& rng) {
    std::chi_squared_distribution<double> dist(df);
    return (dist(rng) - df) / std::sqrt(2.0 * df);
}

}  // namespace hdiv
