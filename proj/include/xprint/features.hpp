#pragma once

#include <array>
#include <span>
#include <string>

#include "xprint/traffic.hpp"

namespace xprint {

inline constexpr int kFeatureCount = 123;
inline constexpr int kFeatureSchemaVersion = 1;

/**
 * Side-channel feature schema, 123 slots over five families:
 *
 *   [0,8)    general     pkt_total, pkt_out, pkt_in, pct_in, bytes_total,
 *                        bytes_out, bytes_in, duration
 *   [8,28)   interactive per direction (out then in): run_count,
 *                        run_len mean/std/max/min, run_bytes mean/std/max/min;
 *                        then direction_flip_count, first_packet_direction
 *                        (0 outbound, 1 inbound)
 *   [28,33)  rate        packets per 1-second window: mean/std/max/min,
 *                        active_window_count
 *   [33,72)  temporal    per stream (bidirectional, out, in), 13 each:
 *                        IAT mean/std/variance/min/max/skew, IAT p25/p75,
 *                        relative-arrival p10/p25/p50/p75/p90
 *   [72,123) size        per stream (bidirectional, out, in), 17 each:
 *                        mean/std/variance/max/min/skew/kurtosis/MAD,
 *                        deciles p10..p90
 *
 * Conventions shared by every implementation of this schema:
 *  - moments are population moments (divide by n); kurtosis is excess;
 *  - std/variance of < 2 samples, skew/kurtosis of < 3 samples, and any
 *    ratio with zero variance are 0;
 *  - statistics over an empty sample are 0;
 *  - percentiles interpolate linearly between closest ranks, rank
 *    position h = (n - 1) * q;
 *  - rate windows are 1-second bins anchored at the first packet,
 *    floor(duration) + 1 bins in total, empty bins included in the
 *    mean/std/max/min, active = bins holding at least one packet;
 *  - IATs are consecutive differences inside the stream's own packet
 *    subsequence;
 *  - relative arrival is (t - t_first) / duration over the whole group's
 *    clock, 0 when duration is 0.
 */
struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    int schema_version = kFeatureSchemaVersion;

    bool operator==(const FeatureVector&) const = default;
};

/// Canonical slot names, index-aligned with FeatureVector::values.  The
/// CSV dump writes exactly these 123 names as its header.
const std::array<std::string, kFeatureCount>& feature_names();

/// Extracts the schema above from any non-empty packet group (a flow or a
/// burst).  Throws std::invalid_argument on an empty group.
FeatureVector extract_features(std::span<const Packet> packets);

/// Batch helper over many groups; parallel across groups.
std::vector<FeatureVector> extract_features_batch(
    const std::vector<std::span<const Packet>>& groups);

}  // namespace xprint
