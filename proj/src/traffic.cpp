#include "xprint/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "xprint/rng.hpp"
#include "json.hpp"

namespace xprint {

namespace {

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string quote(const std::string& s) {
    return nlohmann::json(s).dump();
}

std::string opt_str(const std::optional<std::string>& s) {
    return s ? quote(*s) : "null";
}

[[noreturn]] void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

}  // namespace

double Flow::start_time() const {
    return packets.empty() ? 0.0 : packets.front().timestamp;
}

double Flow::end_time() const {
    return packets.empty() ? 0.0 : packets.back().timestamp;
}

double quantize_us(double t) {
    return std::round(t * 1e6) / 1e6;
}

void validate_trace(TrafficTrace& trace) {
    if (trace.trace_id.empty()) fail("trace with empty trace_id");
    std::set<std::string> seen_ids;
    for (auto& flow : trace.flows) {
        if (flow.flow_id.empty()) {
            fail("trace " + trace.trace_id + ": flow with empty flow_id");
        }
        if (!seen_ids.insert(flow.flow_id).second) {
            fail("trace " + trace.trace_id + ": duplicate flow_id " + flow.flow_id);
        }
        if (flow.domain.empty()) {
            fail("trace " + trace.trace_id + ": flow " + flow.flow_id + " has empty domain");
        }
        if (flow.packets.empty()) {
            fail("trace " + trace.trace_id + ": flow " + flow.flow_id + " has no packets");
        }
        for (const auto& p : flow.packets) {
            if (!std::isfinite(p.timestamp) || p.timestamp < 0.0) {
                fail("trace " + trace.trace_id + ": flow " + flow.flow_id +
                     " has invalid timestamp");
            }
            if (p.size < 1) {
                fail("trace " + trace.trace_id + ": flow " + flow.flow_id +
                     " has packet size < 1");
            }
        }
        if (!std::is_sorted(flow.packets.begin(), flow.packets.end(),
                            [](const Packet& a, const Packet& b) {
                                return a.timestamp < b.timestamp;
                            })) {
            std::stable_sort(flow.packets.begin(), flow.packets.end(),
                             [](const Packet& a, const Packet& b) {
                                 return a.timestamp < b.timestamp;
                             });
        }
    }
    for (const auto& w : trace.ground_truth_windows) {
        if (!(w.end > w.start)) {
            fail("trace " + trace.trace_id + ": degenerate ground-truth window");
        }
        if (w.app.empty() || w.behavior.empty()) {
            fail("trace " + trace.trace_id + ": ground-truth window missing labels");
        }
    }
}

void save_traces(const std::vector<TrafficTrace>& traces, std::ostream& out) {
    for (const auto& trace : traces) {
        if (!trace.ground_truth_windows.empty()) {
            out << "{\"trace_id\":" << quote(trace.trace_id) << ",\"windows\":[";
            for (std::size_t i = 0; i < trace.ground_truth_windows.size(); ++i) {
                const auto& w = trace.ground_truth_windows[i];
                if (i) out << ',';
                out << '[' << fmt_double(w.start) << ',' << fmt_double(w.end) << ','
                    << quote(w.app) << ',' << quote(w.behavior) << ']';
            }
            out << "]}\n";
        }
        for (const auto& flow : trace.flows) {
            out << "{\"trace_id\":" << quote(trace.trace_id)
                << ",\"flow_id\":" << quote(flow.flow_id)
                << ",\"domain\":" << quote(flow.domain)
                << ",\"app\":" << opt_str(flow.app_label)
                << ",\"platform\":" << opt_str(flow.platform_label)
                << ",\"behavior\":" << opt_str(flow.behavior_label)
                << ",\"packets\":[";
            for (std::size_t i = 0; i < flow.packets.size(); ++i) {
                const auto& p = flow.packets[i];
                if (i) out << ',';
                out << '[' << fmt_double(p.timestamp) << ','
                    << (p.dir == Direction::Outbound ? "\"+1\"" : "\"-1\"") << ','
                    << p.size << ',' << opt_str(p.uri_label) << ']';
            }
            out << "]}\n";
        }
    }
}

void save_traces_file(const std::vector<TrafficTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot open for writing: " + path);
    save_traces(traces, out);
    if (!out) fail("write failed: " + path);
}

namespace {

std::optional<std::string> parse_opt_str(const nlohmann::json& j, const char* key,
                                         std::size_t line_no) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) {
        fail("line " + std::to_string(line_no) + ": field '" + key +
             "' must be a string or null");
    }
    return v.get<std::string>();
}

}  // namespace

std::vector<TrafficTrace> load_traces(std::istream& in) {
    std::vector<TrafficTrace> traces;
    std::map<std::string, std::size_t> index_of;
    std::string line;
    std::size_t line_no = 0;

    auto trace_slot = [&](const std::string& id) -> TrafficTrace& {
        auto it = index_of.find(id);
        if (it == index_of.end()) {
            index_of.emplace(id, traces.size());
            traces.push_back(TrafficTrace{id, {}, {}});
            return traces.back();
        }
        return traces[it->second];
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
        }
        try {
            const std::string trace_id = j.at("trace_id").get<std::string>();
            TrafficTrace& trace = trace_slot(trace_id);
            if (j.contains("windows")) {
                for (const auto& w : j.at("windows")) {
                    if (!w.is_array() || w.size() != 4) {
                        fail("line " + std::to_string(line_no) + ": window must be [start,end,app,behavior]");
                    }
                    trace.ground_truth_windows.push_back(GroundTruthWindow{
                        w[0].get<double>(), w[1].get<double>(),
                        w[2].get<std::string>(), w[3].get<std::string>()});
                }
                continue;
            }
            Flow flow;
            flow.flow_id = j.at("flow_id").get<std::string>();
            flow.domain = j.at("domain").get<std::string>();
            flow.app_label = parse_opt_str(j, "app", line_no);
            flow.platform_label = parse_opt_str(j, "platform", line_no);
            flow.behavior_label = parse_opt_str(j, "behavior", line_no);
            const auto& pkts = j.at("packets");
            if (!pkts.is_array()) fail("line " + std::to_string(line_no) + ": packets must be an array");
            flow.packets.reserve(pkts.size());
            for (const auto& pj : pkts) {
                if (!pj.is_array() || pj.size() != 4) {
                    fail("line " + std::to_string(line_no) + ": packet must be [t,dir,size,uri]");
                }
                Packet p;
                p.timestamp = pj[0].get<double>();
                const std::string dir = pj[1].is_string() ? pj[1].get<std::string>() : std::string();
                if (dir == "+1") {
                    p.dir = Direction::Outbound;
                } else if (dir == "-1") {
                    p.dir = Direction::Inbound;
                } else {
                    fail("line " + std::to_string(line_no) + ": packet dir must be \"+1\" or \"-1\"");
                }
                const std::int64_t size = pj[2].get<std::int64_t>();
                if (size < 1 || size > 0xffffffffLL) {
                    fail("line " + std::to_string(line_no) + ": packet size out of range");
                }
                p.size = static_cast<std::uint32_t>(size);
                if (!pj[3].is_null()) p.uri_label = pj[3].get<std::string>();
                flow.packets.push_back(std::move(p));
            }
            trace.flows.push_back(std::move(flow));
        } catch (const nlohmann::json::exception& e) {
            fail("line " + std::to_string(line_no) + ": bad record: " + e.what());
        }
    }
    for (auto& trace : traces) validate_trace(trace);
    return traces;
}

std::vector<TrafficTrace> load_traces_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open for reading: " + path);
    return load_traces(in);
}

TrafficTrace shift_trace(const TrafficTrace& trace, double dt) {
    TrafficTrace out = trace;
    for (auto& flow : out.flows) {
        for (auto& p : flow.packets) p.timestamp = quantize_us(p.timestamp + dt);
    }
    for (auto& w : out.ground_truth_windows) {
        w.start = quantize_us(w.start + dt);
        w.end = quantize_us(w.end + dt);
    }
    return out;
}

TrafficTrace merge_traces(const TrafficTrace& a, const TrafficTrace& b, double delay_s) {
    if (!(delay_s >= 0.0 && delay_s <= 5.0)) {
        throw std::invalid_argument("merge_traces: delay must lie in [0, 5] seconds");
    }
    TrafficTrace shifted = shift_trace(b, delay_s);
    TrafficTrace out;
    out.trace_id = a.trace_id + "+" + b.trace_id;

    std::set<std::string> used;
    for (const auto& f : a.flows) used.insert(f.flow_id);
    for (auto& f : shifted.flows) {
        if (used.count(f.flow_id)) {
            int n = 1;
            std::string candidate;
            do {
                candidate = f.flow_id + "~" + std::to_string(n++);
            } while (used.count(candidate));
            f.flow_id = candidate;
        }
        used.insert(f.flow_id);
    }

    out.flows = a.flows;
    out.flows.insert(out.flows.end(), shifted.flows.begin(), shifted.flows.end());
    std::stable_sort(out.flows.begin(), out.flows.end(),
                     [](const Flow& x, const Flow& y) {
                         return x.start_time() < y.start_time();
                     });

    out.ground_truth_windows = a.ground_truth_windows;
    out.ground_truth_windows.insert(out.ground_truth_windows.end(),
                                    shifted.ground_truth_windows.begin(),
                                    shifted.ground_truth_windows.end());
    std::stable_sort(out.ground_truth_windows.begin(), out.ground_truth_windows.end(),
                     [](const GroundTruthWindow& x, const GroundTruthWindow& y) {
                         return x.start < y.start;
                     });
    return out;
}

double random_merge_delay(Rng& rng) {
    return quantize_us(rng.uniform(0.0, 5.0));
}

TrafficTrace overlay_traces(const std::vector<TrafficTrace>& parts, const std::string& trace_id) {
    TrafficTrace out;
    out.trace_id = trace_id;
    std::set<std::string> used;
    for (const auto& part : parts) {
        for (auto flow : part.flows) {
            if (used.count(flow.flow_id)) {
                int n = 1;
                std::string candidate;
                do {
                    candidate = flow.flow_id + "~" + std::to_string(n++);
                } while (used.count(candidate));
                flow.flow_id = candidate;
            }
            used.insert(flow.flow_id);
            out.flows.push_back(std::move(flow));
        }
        out.ground_truth_windows.insert(out.ground_truth_windows.end(),
                                        part.ground_truth_windows.begin(),
                                        part.ground_truth_windows.end());
    }
    std::stable_sort(out.flows.begin(), out.flows.end(),
                     [](const Flow& x, const Flow& y) {
                         return x.start_time() < y.start_time();
                     });
    std::stable_sort(out.ground_truth_windows.begin(), out.ground_truth_windows.end(),
                     [](const GroundTruthWindow& x, const GroundTruthWindow& y) {
                         return x.start < y.start;
                     });
    return out;
}

}  // namespace xprint
