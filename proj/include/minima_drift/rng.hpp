#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

#include <boost/random/normal_distribution.hpp>

namespace mdrift {

std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_label(std::string_view label);
std::uint64_t derive_key(std::uint64_t seed, std::string_view label, std::uint64_t replica, std::uint64_t step);

// SplitMix64 sequence started at a derived key. Cheap to construct, so every
// (seed, label, replica, step) cell gets its own engine and draw order never
// depends on scheduling.
class CounterEngine {
public:
    using result_type = std::uint64_t;
    explicit CounterEngine(std::uint64_t key) : state_(key) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

class Stream {
public:
    Stream(std::uint64_t seed, std::string_view label, std::uint64_t replica = 0)
        : base_(derive_key(seed, label, replica, 0)) {}
    CounterEngine at(std::uint64_t step) const { return CounterEngine(mix64(base_ ^ mix64(step + 1))); }

private:
    std::uint64_t base_;
};

// boost's ziggurat normal: identical output on every standard library.
class Gaussian {
public:
    template <class Engine>
    double operator()(Engine& e) { return nd_(e); }
    template <class Engine>
    void fill(Engine& e, double* out, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) out[i] = nd_(e);
    }

private:
    boost::random::normal_distribution<double> nd_;
};

inline double uniform01(CounterEngine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }
inline double rademacher(CounterEngine& e) { return (e() >> 63) ? 1.0 : -1.0; }

}  // namespace mdrift
