#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "licra/rng.hpp"

using namespace licra;

TEST_CASE("same seed and name reproduce the stream bitwise") {
    RngStream a = rng_stream(42, "test/stream");
    RngStream b = rng_stream(42, "test/stream");
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    RngStream c = rng_stream(42, "test/stream");
    RngStream d = rng_stream(42, "test/stream");
    for (int i = 0; i < 100; ++i) {
        double x = c.normal();
        double y = d.normal();
        REQUIRE(std::memcmp(&x, &y, sizeof(double)) == 0);
    }
}

TEST_CASE("different names give different streams") {
    RngStream a = rng_stream(42, "env");
    RngStream b = rng_stream(42, "behavior");
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    REQUIRE(equal == 0);
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
    RngStream rng = rng_stream(7, "uniform");
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("uniform_int is unbiased across a small range") {
    RngStream rng = rng_stream(11, "uniform_int");
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(4)];
    for (int c : counts) REQUIRE(std::abs(c / static_cast<double>(n) - 0.25) < 0.01);
}

TEST_CASE("normal has zero mean and unit variance") {
    RngStream rng = rng_stream(13, "normal");
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sample_discrete follows the row distribution") {
    RngStream rng = rng_stream(3, "discrete");
    std::vector<double> row = {0.5, 0.5};
    int zeros = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (rng.sample_discrete(row) == 0) ++zeros;
    REQUIRE(std::abs(zeros / static_cast<double>(n) - 0.5) < 0.01);

    std::vector<double> onehot = {0.0, 0.0, 1.0};
    for (int i = 0; i < 100; ++i) REQUIRE(rng.sample_discrete(onehot) == 2);
}
