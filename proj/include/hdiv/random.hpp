#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

#include <Eigen/Dense>

namespace hdiv {

/// Philox4x32-10 counter-based generator. A stream is identified by a 64-bit
/// key and a 64-bit stream id; the remaining 64 counter bits index blocks of
/// four outputs within the stream, so distinct (key, stream) pairs never overlap.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (index_ == 4) {
            buffer_ = block(counter_, key_);
            increment();
            index_ = 0;
        }
        return buffer_[index_++];
    }

    /// The bijection itself: ten rounds on (counter, key).
    static counter_type block(counter_type ctr, key_type key) noexcept;

private:
    void increment() noexcept;

    counter_type counter_{};
    key_type key_{};
    counter_type buffer_{};
    int index_ = 4;
};

using RandomStream = Philox4x32;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a hash of a byte string.
std::uint64_t stable_hash(std::string_view text) noexcept;

/// Stream for replication `replication` of the experiment identified by
/// `tag_hash`, under `base_seed`.
RandomStream derive_stream(std::uint64_t base_seed, std::uint64_t tag_hash,
                           std::uint64_t replication) noexcept;

// Batch draws. Each consumes the stream in index order.
double uniform01(RandomStream& rng);
Eigen::VectorXd uniform_vector(Eigen::Index n, RandomStream& rng);
Eigen::VectorXd normal_vector(Eigen::Index n, RandomStream& rng);
/// Row-major fill of an n x k matrix with standard normals.
Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng);
/// t(5) draws scaled by sqrt(3/5) to unit variance.
Eigen::VectorXd standardized_t5(Eigen::Index n, RandomStream& rng);
/// (chi2(df) - df) / sqrt(2 df).
double standardized_chi2(double df, RandomStream& rng);

}  // namespace hdiv
