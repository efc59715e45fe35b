#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <span>
#include <vector>

#include "xprint/features.hpp"
#include "xprint/parallel.hpp"
#include "xprint/rng.hpp"
#include "xprint/traffic.hpp"

using namespace xprint;

TEST_CASE("identical seeds replay the identical stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams differ from each other and the base") {
    const auto s1 = Rng::derive(1, 1);
    const auto s2 = Rng::derive(1, 2);
    CHECK(s1 != s2);
    CHECK(s1 != 1);
    CHECK(Rng::derive(2, 1) != s1);
}

TEST_CASE("uniform stays in range and fills it") {
    Rng rng(9);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);

    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(2.0, 3.5);
        CHECK(v >= 2.0);
        CHECK(v < 3.5);
    }
}

TEST_CASE("below and between respect bounds") {
    Rng rng(11);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
    for (int h : hits) CHECK(h > 0);
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.between(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
    }
}

TEST_CASE("normal matches its first two moments within 4 sigma") {
    Rng rng(21);
    const int n = 40000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(10.0, 2.0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 10.0) < 4.0 * 2.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 4.0) < 0.2);
}

TEST_CASE("poisson mean tracks lambda within 4 sigma") {
    Rng rng(22);
    const int n = 20000;
    const double lambda = 3.0;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += rng.poisson(lambda);
    const double mean = sum / n;
    CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / n));
    CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("serial and OpenMP loops produce bit-identical feature batches") {
    Rng rng(31);
    std::vector<Flow> flows(200);
    for (auto& flow : flows) {
        const int n = 1 + static_cast<int>(rng.below(40));
        double t = rng.uniform(0.0, 5.0);
        for (int i = 0; i < n; ++i) {
            Packet p;
            p.timestamp = t;
            p.dir = rng.uniform() < 0.5 ? Direction::Outbound : Direction::Inbound;
            p.size = 40 + static_cast<int>(rng.below(1400));
            flow.packets.push_back(p);
            t += rng.uniform(0.0, 0.2);
        }
    }
    std::vector<std::span<const Packet>> groups;
    for (const auto& flow : flows) groups.emplace_back(flow.packets);

    const bool was = par::enabled();
    par::enabled() = false;
    const auto serial = extract_features_batch(groups);
    par::enabled() = true;
    const auto parallel = extract_features_batch(groups);
    par::enabled() = was;

    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].values == parallel[i].values);
    }
}

TEST_CASE("for_index_serial and for_index_omp visit every index once") {
    std::vector<int> counts(500, 0);
    par::for_index_serial(counts.size(), [&](std::size_t i) { counts[i] += 1; });
    par::for_index_omp(counts.size(), [&](std::size_t i) { counts[i] += 2; });
    for (int c : counts) CHECK(c == 3);
}
