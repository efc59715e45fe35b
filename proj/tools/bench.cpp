// Micro-benchmark comparing the serial reference loops against the OpenMP
// fast path for the three hot kernels: batch feature extraction, ensemble
// training, and batch ensemble prediction.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xprint/features.hpp"
#include "xprint/forest.hpp"
#include "xprint/parallel.hpp"
#include "xprint/rng.hpp"
#include "xprint/traffic.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& body, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        body();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

std::vector<xprint::Flow> make_flows(std::size_t count, xprint::Rng& rng) {
    std::vector<xprint::Flow> flows(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t n = 5 + rng.below(116);
        double t = rng.uniform(0.0, 10.0);
        for (std::size_t k = 0; k < n; ++k) {
            xprint::Packet p;
            p.timestamp = t;
            p.dir = rng.uniform() < 0.6 ? xprint::Direction::Outbound
                                        : xprint::Direction::Inbound;
            p.size = 40 + static_cast<int>(rng.below(1400));
            flows[i].packets.push_back(p);
            t += rng.uniform(0.001, 0.05);
        }
        flows[i].flow_id = "bench/" + std::to_string(i);
    }
    return flows;
}

void report(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-24s %10.1f ms %10.1f ms %8.2fx\n", name, serial_ms, omp_ms,
                omp_ms > 0 ? serial_ms / omp_ms : 0.0);
}

}  // namespace

int main() {
    xprint::Rng rng(42);
    const auto flows = make_flows(3000, rng);
    std::vector<std::span<const xprint::Packet>> groups;
    for (const auto& flow : flows) groups.emplace_back(flow.packets);

    std::printf("%-24s %13s %13s %9s  (%d threads)\n", "kernel", "serial", "openmp",
                "speedup", xprint::par::max_threads());

    std::vector<xprint::FeatureVector> serial_features, omp_features;
    xprint::par::enabled() = false;
    const double extract_serial =
        time_ms([&] { serial_features = xprint::extract_features_batch(groups); });
    xprint::par::enabled() = true;
    const double extract_omp =
        time_ms([&] { omp_features = xprint::extract_features_batch(groups); });
    report("feature extraction", extract_serial, extract_omp);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 1200; ++i) {
        rows.emplace_back(serial_features[i].values.begin(),
                          serial_features[i].values.end());
        labels.push_back("class" + std::to_string(i % 4));
    }
    xprint::ForestHyper hyper;
    hyper.n_trees = 60;
    xprint::TreeEnsembleModel model;
    xprint::par::enabled() = false;
    const double train_serial = time_ms(
        [&] { model = xprint::TreeEnsembleModel::train(rows, labels, hyper, 7); }, 1);
    xprint::par::enabled() = true;
    const double train_omp = time_ms(
        [&] { model = xprint::TreeEnsembleModel::train(rows, labels, hyper, 7); }, 1);
    report("ensemble training", train_serial, train_omp);

    std::vector<std::vector<double>> probs(rows.size());
    auto predict_all = [&] {
        xprint::par::for_index(rows.size(),
                               [&](std::size_t i) { probs[i] = model.predict_proba(rows[i]); });
    };
    xprint::par::enabled() = false;
    const double predict_serial = time_ms(predict_all);
    xprint::par::enabled() = true;
    const double predict_omp = time_ms(predict_all);
    report("ensemble prediction", predict_serial, predict_omp);

    // sanity: both paths must agree exactly
    bool equal = serial_features.size() == omp_features.size();
    for (std::size_t i = 0; equal && i < serial_features.size(); ++i) {
        equal = serial_features[i].values == omp_features[i].values;
    }
    std::printf("serial/openmp outputs identical: %s\n", equal ? "yes" : "NO");
    return equal ? 0 : 1;
}
