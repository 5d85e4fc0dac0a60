#include "wig/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace wig {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ValueError("tensor shape has zero dimension");
    }
    if (shape_.empty()) throw ValueError("tensor shape is empty");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw ValueError("tensor shape is empty");
    for (std::size_t d : shape_) {
        if (d == 0) throw ValueError("tensor shape has zero dimension");
    }
    if (shape_product(shape_) != data_.size()) {
        throw ValueError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
    check_finite("tensor");
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    t.check_finite("tensor");
    return t;
}

void Tensor::check_finite(const std::string& what) const {
    for (double v : data_) {
        if (!std::isfinite(v)) throw ValueError("non-finite value in " + what);
    }
}

std::size_t channel_count(const std::vector<std::size_t>& shape) {
    return shape.size() == 3 ? shape[0] : 1;
}

std::size_t pixel_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ValueError("empty shape");
    if (shape.size() == 3) return shape[1] * shape[2];
    return shape_product(shape);
}

std::vector<std::size_t> spatial_shape(const std::vector<std::size_t>& shape) {
    if (shape.size() == 3) return {shape[1], shape[2]};
    return shape;
}

std::size_t scalar_index(const std::vector<std::size_t>& shape, std::size_t c, std::size_t p) {
    return c * pixel_count(shape) + p;
}

double stable_sum(std::span<const double> values) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : values) {
        if (!std::isfinite(x)) throw ValueError("non-finite value");
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

std::vector<std::size_t> argsort_desc(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw ValueError("non-finite value");
    }
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    return idx;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ValueError("Rng::below(0)");
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::next_normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    // u1 strictly positive so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
}

Rng Rng::derive(std::uint64_t stream) const {
    std::uint64_t s = seed_ ^ (0x632be59bd9b4e019ULL + stream);
    return Rng(splitmix64(s));
}

}  // namespace wig
