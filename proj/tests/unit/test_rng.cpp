#include <doctest.h>

#include <cmath>
#include <set>

#include "minima_drift/rng.hpp"

using namespace mdrift;

TEST_CASE("streams are deterministic and label-separated") {
    auto a = Stream(5, "phase-I", 2).at(17);
    auto b = Stream(5, "phase-I", 2).at(17);
    for (int i = 0; i < 10; ++i) CHECK(a() == b());
    std::set<std::uint64_t> firsts;
    for (const char* label : {"phase-I", "phase-II", "ou"})
        for (std::uint64_t rep = 0; rep < 4; ++rep)
            for (std::uint64_t step = 0; step < 4; ++step) firsts.insert(Stream(5, label, rep).at(step)());
    CHECK(firsts.size() == 48);
    CHECK(derive_key(1, "x", 0, 0) != derive_key(2, "x", 0, 0));
}

TEST_CASE("gaussian moments") {
    Gaussian g;
    const int m = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < m; ++i) {
        auto eng = Stream(9, "moments").at(i);
        const double z = g(eng);
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    // standard errors: 1/sqrt(m), sqrt(2/m), sqrt(96/m)
    CHECK(std::abs(s1 / m) < 4.0 / std::sqrt(m));
    CHECK(std::abs(s2 / m - 1.0) < 4.0 * std::sqrt(2.0 / m));
    CHECK(std::abs(s4 / m - 3.0) < 4.0 * std::sqrt(96.0 / m));
}

TEST_CASE("uniform and rademacher draws") {
    auto eng = Stream(3, "u").at(0);
    double sum = 0;
    int plus = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = uniform01(eng);
        CHECK((u >= 0.0 && u < 1.0));
        sum += u;
        plus += rademacher(eng) > 0;
    }
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
    CHECK(plus == doctest::Approx(50000).epsilon(0.02));
}
