#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace hdinf::rng {

using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

/// Philox4x64 with 10 rounds (Salmon et al., Random123). A keyed bijection on
/// 256-bit counters.
Counter philox4x64(Counter counter, Key key) noexcept;

/// What a stream is used for. Part of the key, so streams for different
/// purposes never overlap.
enum class Purpose : std::uint64_t {
    covariates = 1,
    response = 2,
    lasso_folds = 3,
    nodewise_folds = 4,
    generic = 5,
};

/// Counter-based stream keyed by (seed, purpose) and positioned by
/// (scenario, replicate). Two streams with different tuples are independent;
/// no state is shared between them, so replicates can run on any thread.
///
/// Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t scenario = 0,
           std::uint64_t replicate = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept;
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept;
    bool bernoulli(double p) noexcept;
    /// Inversion for mean < 10, Hormann's PTRS otherwise.
    std::uint64_t poisson(double mean) noexcept;
    /// Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    Key key_;
    Counter counter_;
    Counter block_{};
    int position_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Stream& stream);

}  // namespace hdinf::rng
