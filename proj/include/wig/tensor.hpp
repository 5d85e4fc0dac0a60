#ifndef WIG_TENSOR_HPP
#define WIG_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wig/error.hpp"

namespace wig {

/// Dense row-major tensor of 64-bit floats. Images use channel-major C×H×W
/// order. Entries are validated finite on construction.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& raw() { return data_; }

    std::size_t size() const { return data_.size(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Throws ValueError if any entry is NaN or infinite.
    void check_finite(const std::string& what) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

// Image layout helpers. A 3-D shape is read as C×H×W, a 2-D shape as H×W
// with one implicit channel, a 1-D shape as d pixels of one channel.
std::size_t channel_count(const std::vector<std::size_t>& shape);
std::size_t pixel_count(const std::vector<std::size_t>& shape);
std::vector<std::size_t> spatial_shape(const std::vector<std::size_t>& shape);
// Flat data index of channel c at spatial site p.
std::size_t scalar_index(const std::vector<std::size_t>& shape, std::size_t c, std::size_t p);

/// Compensated (Neumaier) summation in fixed input order. Bit-identical
/// across runs for identical input. Empty input sums to zero.
double stable_sum(std::span<const double> values);

/// Indices ordered by descending value, ties broken by ascending index.
std::vector<std::size_t> argsort_desc(std::span<const double> values);

/// Deterministic xoshiro256++ generator seeded via splitmix64. Identical
/// seed gives an identical stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_double();

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller.
    double next_normal();

    // Independent generator derived from (original seed, stream index).
    Rng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_[4] = {0, 0, 0, 0};
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace wig

#endif
