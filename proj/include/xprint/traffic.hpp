#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace xprint {

class Rng;

enum class Direction : int {
    Outbound = +1,  // client to server
    Inbound  = -1,  // server to client
};

/**
 * One encrypted packet as seen by an on-path observer: timing, direction
 * and size only.  uri_label is generator-side ground truth used for
 * training and scoring; it is never an input to feature extraction.
 */
struct Packet {
    double timestamp = 0.0;  // seconds, microsecond precision
    Direction dir = Direction::Outbound;
    std::uint32_t size = 0;  // bytes, >= 1
    std::optional<std::string> uri_label;

    bool operator==(const Packet&) const = default;
};

/// One five-tuple connection to a single server domain.
struct Flow {
    std::string flow_id;
    std::string domain;
    std::vector<Packet> packets;  // sorted by timestamp
    std::optional<std::string> app_label;
    std::optional<std::string> platform_label;
    std::optional<std::string> behavior_label;

    double start_time() const;
    double end_time() const;

    bool operator==(const Flow&) const = default;
};

/// Ground-truth activity window: one behavior execution.
struct GroundTruthWindow {
    double start = 0.0;
    double end = 0.0;
    std::string app;
    std::string behavior;

    bool operator==(const GroundTruthWindow&) const = default;
};

/// A capture session: every flow observed on one vantage point.
struct TrafficTrace {
    std::string trace_id;
    std::vector<Flow> flows;
    std::vector<GroundTruthWindow> ground_truth_windows;

    bool operator==(const TrafficTrace&) const = default;
};

/// Maximal run of packets inside one flow separated by gaps < delta_t.
struct Burst {
    std::string parent_flow_id;
    std::string domain;  // copied from the parent flow
    std::vector<Packet> packets;
    double start = 0.0;
    double end = 0.0;

    bool operator==(const Burst&) const = default;
};

/// Round to microsecond precision.  All generated timestamps pass through
/// this so that the 9-significant-digit text form round-trips exactly.
double quantize_us(double t);

/// Validates a trace in place: packet sizes >= 1, timestamps >= 0 and
/// finite, flows non-empty, windows non-degenerate.  Packets are re-sorted
/// by timestamp if needed.  Throws std::runtime_error on violations.
void validate_trace(TrafficTrace& trace);

/**
 * JSON-lines serialization.  One flow per line:
 *
 *   {"trace_id":...,"flow_id":...,"domain":...,"app":...,"platform":...,
 *    "behavior":...,"packets":[[t,dir,size,uri],...]}
 *
 * dir is "+1" outbound / "-1" inbound, uri is a string or null, floats
 * carry 9 significant digits.  Traces with ground-truth windows emit one
 * extra line {"trace_id":...,"windows":[[start,end,app,behavior],...]}
 * ahead of their flows so that annotations survive a round trip.
 */
void save_traces(const std::vector<TrafficTrace>& traces, std::ostream& out);
void save_traces_file(const std::vector<TrafficTrace>& traces, const std::string& path);

/// Parses JSON-lines traces; validates every trace.  Malformed lines raise
/// std::runtime_error naming the line number.
std::vector<TrafficTrace> load_traces(std::istream& in);
std::vector<TrafficTrace> load_traces_file(const std::string& path);

/// Shift every timestamp (packets and windows) by dt seconds.
TrafficTrace shift_trace(const TrafficTrace& trace, double dt);

/**
 * Emulates two devices behind one vantage point: b is delayed by
 * delay_s in [0, 5] and its flows are interleaved with a's by start time.
 * Labels and windows are preserved; colliding flow ids from b get a
 * "~<n>" suffix.
 */
TrafficTrace merge_traces(const TrafficTrace& a, const TrafficTrace& b, double delay_s);

/// Draws the merge delay uniformly from [0, 5] seconds.
double random_merge_delay(Rng& rng);

/// Union of several traces on a shared clock (no shifting); flows ordered
/// by start time.  Used to lay behavior executions over background noise.
TrafficTrace overlay_traces(const std::vector<TrafficTrace>& parts, const std::string& trace_id);

}  // namespace xprint
