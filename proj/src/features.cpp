#include "xprint/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "xprint/parallel.hpp"

namespace xprint {

namespace {

struct Moments {
    double mean = 0, sd = 0, var = 0, min = 0, max = 0, skew = 0, kurt = 0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    const std::size_t n = x.size();
    if (n == 0) return m;
    double sum = 0;
    m.min = x[0];
    m.max = x[0];
    for (double v : x) {
        sum += v;
        m.min = std::min(m.min, v);
        m.max = std::max(m.max, v);
    }
    m.mean = sum / static_cast<double>(n);
    if (n < 2) return m;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double d = v - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    m.var = m2;
    m.sd = std::sqrt(m2);
    if (n >= 3 && m2 > 0.0) {
        m.skew = m3 / (m2 * m.sd);
        m.kurt = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

/// Linear interpolation between closest ranks; input must be sorted.
double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median_sorted(const std::vector<double>& sorted) {
    return percentile(sorted, 0.5);
}

std::vector<double> diffs(const std::vector<double>& t) {
    std::vector<double> d;
    if (t.size() < 2) return d;
    d.reserve(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) d.push_back(t[i] - t[i - 1]);
    return d;
}

/// 13 temporal slots for one stream.
void temporal_block(const std::vector<double>& times, double t0, double duration,
                    double* out) {
    const std::vector<double> iat = diffs(times);
    const Moments m = moments(iat);
    std::vector<double> iat_sorted = iat;
    std::sort(iat_sorted.begin(), iat_sorted.end());
    std::vector<double> rel;
    rel.reserve(times.size());
    for (double t : times) {
        rel.push_back(duration > 0.0 ? (t - t0) / duration : 0.0);
    }
    std::sort(rel.begin(), rel.end());
    out[0] = m.mean;
    out[1] = m.sd;
    out[2] = m.var;
    out[3] = m.min;
    out[4] = m.max;
    out[5] = m.skew;
    out[6] = percentile(iat_sorted, 0.25);
    out[7] = percentile(iat_sorted, 0.75);
    out[8] = percentile(rel, 0.10);
    out[9] = percentile(rel, 0.25);
    out[10] = percentile(rel, 0.50);
    out[11] = percentile(rel, 0.75);
    out[12] = percentile(rel, 0.90);
}

/// 17 size slots for one stream.
void size_block(const std::vector<double>& sizes, double* out) {
    const Moments m = moments(sizes);
    std::vector<double> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    out[0] = m.mean;
    out[1] = m.sd;
    out[2] = m.var;
    out[3] = m.max;
    out[4] = m.min;
    out[5] = m.skew;
    out[6] = m.kurt;
    if (sorted.empty()) {
        out[7] = 0.0;
    } else {
        const double med = median_sorted(sorted);
        std::vector<double> dev;
        dev.reserve(sorted.size());
        for (double v : sorted) dev.push_back(std::fabs(v - med));
        std::sort(dev.begin(), dev.end());
        out[7] = median_sorted(dev);
    }
    for (int i = 0; i < 9; ++i) {
        out[8 + i] = percentile(sorted, 0.10 * static_cast<double>(i + 1));
    }
}

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = [] {
        std::array<std::string, kFeatureCount> n;
        int i = 0;
        for (const char* s : {"pkt_total", "pkt_out", "pkt_in", "pct_in",
                              "bytes_total", "bytes_out", "bytes_in", "duration"}) {
            n[i++] = s;
        }
        for (const char* d : {"out", "in"}) {
            const std::string p = std::string(d) + "_run_";
            for (const char* s : {"count", "len_mean", "len_std", "len_max", "len_min",
                                  "bytes_mean", "bytes_std", "bytes_max", "bytes_min"}) {
                n[i++] = p + s;
            }
        }
        n[i++] = "direction_flip_count";
        n[i++] = "first_packet_direction";
        for (const char* s : {"mean", "std", "max", "min"}) {
            n[i++] = std::string("rate_pkts_") + s;
        }
        n[i++] = "rate_active_windows";
        for (const char* d : {"bi", "out", "in"}) {
            const std::string p = std::string(d) + "_";
            for (const char* s : {"iat_mean", "iat_std", "iat_var", "iat_min", "iat_max",
                                  "iat_skew", "iat_p25", "iat_p75", "rel_p10", "rel_p25",
                                  "rel_p50", "rel_p75", "rel_p90"}) {
                n[i++] = p + s;
            }
        }
        for (const char* d : {"bi", "out", "in"}) {
            const std::string p = std::string(d) + "_size_";
            for (const char* s : {"mean", "std", "var", "max", "min", "skew", "kurt",
                                  "mad", "p10", "p20", "p30", "p40", "p50", "p60",
                                  "p70", "p80", "p90"}) {
                n[i++] = p + s;
            }
        }
        if (i != kFeatureCount) throw std::logic_error("feature name count mismatch");
        return n;
    }();
    return names;
}

FeatureVector extract_features(std::span<const Packet> packets) {
    if (packets.empty()) {
        throw std::invalid_argument("extract_features: empty packet group");
    }
    FeatureVector fv;
    double* f = fv.values.data();

    const double t0 = packets.front().timestamp;
    const double t1 = packets.back().timestamp;
    const double duration = t1 - t0;

    std::vector<double> t_all, t_out, t_in, s_all, s_out, s_in;
    t_all.reserve(packets.size());
    s_all.reserve(packets.size());
    double bytes_out = 0, bytes_in = 0;
    for (const auto& p : packets) {
        const double sz = static_cast<double>(p.size);
        t_all.push_back(p.timestamp);
        s_all.push_back(sz);
        if (p.dir == Direction::Outbound) {
            t_out.push_back(p.timestamp);
            s_out.push_back(sz);
            bytes_out += sz;
        } else {
            t_in.push_back(p.timestamp);
            s_in.push_back(sz);
            bytes_in += sz;
        }
    }

    // general
    f[0] = static_cast<double>(packets.size());
    f[1] = static_cast<double>(t_out.size());
    f[2] = static_cast<double>(t_in.size());
    f[3] = static_cast<double>(t_in.size()) / static_cast<double>(packets.size());
    f[4] = bytes_out + bytes_in;
    f[5] = bytes_out;
    f[6] = bytes_in;
    f[7] = duration;

    // interactive: maximal same-direction runs in arrival order
    std::vector<double> run_len_out, run_len_in, run_bytes_out, run_bytes_in;
    double flips = 0;
    {
        std::size_t i = 0;
        while (i < packets.size()) {
            const Direction dir = packets[i].dir;
            std::size_t j = i;
            double bytes = 0;
            while (j < packets.size() && packets[j].dir == dir) {
                bytes += static_cast<double>(packets[j].size);
                ++j;
            }
            if (dir == Direction::Outbound) {
                run_len_out.push_back(static_cast<double>(j - i));
                run_bytes_out.push_back(bytes);
            } else {
                run_len_in.push_back(static_cast<double>(j - i));
                run_bytes_in.push_back(bytes);
            }
            if (j < packets.size()) flips += 1;
            i = j;
        }
    }
    auto run_block = [](const std::vector<double>& len, const std::vector<double>& bytes,
                        double* out) {
        const Moments ml = moments(len);
        const Moments mb = moments(bytes);
        out[0] = static_cast<double>(len.size());
        out[1] = ml.mean;
        out[2] = ml.sd;
        out[3] = ml.max;
        out[4] = ml.min;
        out[5] = mb.mean;
        out[6] = mb.sd;
        out[7] = mb.max;
        out[8] = mb.min;
    };
    run_block(run_len_out, run_bytes_out, f + 8);
    run_block(run_len_in, run_bytes_in, f + 17);
    f[26] = flips;
    f[27] = packets.front().dir == Direction::Outbound ? 0.0 : 1.0;

    // rate over 1-second windows anchored at the first packet
    {
        const auto n_windows = static_cast<std::size_t>(std::floor(duration)) + 1;
        std::vector<double> counts(n_windows, 0.0);
        for (double t : t_all) {
            auto w = static_cast<std::size_t>(std::floor(t - t0));
            if (w >= n_windows) w = n_windows - 1;
            counts[w] += 1.0;
        }
        const Moments m = moments(counts);
        f[28] = m.mean;
        f[29] = m.sd;
        f[30] = m.max;
        f[31] = m.min;
        f[32] = static_cast<double>(std::count_if(counts.begin(), counts.end(),
                                                  [](double c) { return c > 0.0; }));
    }

    temporal_block(t_all, t0, duration, f + 33);
    temporal_block(t_out, t0, duration, f + 46);
    temporal_block(t_in, t0, duration, f + 59);

    size_block(s_all, f + 72);
    size_block(s_out, f + 89);
    size_block(s_in, f + 106);

    return fv;
}

std::vector<FeatureVector> extract_features_batch(
    const std::vector<std::span<const Packet>>& groups) {
    std::vector<FeatureVector> out(groups.size());
    par::for_index(groups.size(), [&](std::size_t i) {
        out[i] = extract_features(groups[i]);
    });
    return out;
}

}  // namespace xprint
