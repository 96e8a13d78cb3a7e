#include "avua/trace.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "avua/error.hpp"

namespace avua {

void TraceWriter::add(std::string kind, int trial, Json payload, std::vector<int> frames_charged) {
    records_.push_back(Json{{"kind", std::move(kind)},
                            {"trial", trial},
                            {"payload", std::move(payload)},
                            {"frames_charged", std::move(frames_charged)}});
}

std::string TraceWriter::serialize() const {
    std::string out;
    for (const auto& r : records_) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

void TraceWriter::write(const std::filesystem::path& path) const { write_file(path, serialize()); }

namespace {

const std::set<std::string>& known_kinds() {
    static const std::set<std::string> kinds{trace_kinds::policy,     trace_kinds::step,
                                             trace_kinds::sampler,    trace_kinds::evaluation,
                                             trace_kinds::refinement, trace_kinds::final_};
    return kinds;
}

[[noreturn]] void corrupt(std::size_t line, const std::string& what) {
    throw TraceCorrupt(fmt::format("trace line {}: {}", line, what));
}

int int_field(const Json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key) || !obj[key].is_number_integer()) corrupt(line, std::string("missing integer '") + key + "'");
    return obj[key].get<int>();
}

}  // namespace

TraceSummary verify_trace(std::string_view content) {
    TraceSummary s;
    std::set<int> distinct;
    int charges = 0;
    int max_trial = 0;
    std::optional<Json> final_payload;
    std::size_t line_no = 0;
    std::size_t final_line = 0;

    for (const auto& line : split_lines(content)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (final_payload) corrupt(line_no, "record after the final record");
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const Json::parse_error& e) {
            corrupt(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!rec.is_object() || !rec.contains("kind") || !rec["kind"].is_string()) corrupt(line_no, "missing kind");
        const std::string kind = rec["kind"].get<std::string>();
        if (!known_kinds().count(kind)) corrupt(line_no, "unknown kind '" + kind + "'");
        const int trial = int_field(rec, "trial", line_no);
        if (trial < 1) corrupt(line_no, "trial must be positive");
        max_trial = std::max(max_trial, trial);
        if (!rec.contains("payload") || !rec["payload"].is_object()) corrupt(line_no, "payload must be an object");
        if (!rec.contains("frames_charged") || !rec["frames_charged"].is_array()) corrupt(line_no, "missing frames_charged");

        std::vector<int> frames;
        for (const auto& f : rec["frames_charged"]) {
            if (!f.is_number_integer()) corrupt(line_no, "non-integer frame index");
            frames.push_back(f.get<int>());
        }
        if (kind != trace_kinds::step && !frames.empty()) corrupt(line_no, "only step records charge frames");

        if (kind == trace_kinds::step) {
            const Json& p = rec["payload"];
            if (p.contains("charges")) {
                std::vector<int> from_charges;
                for (const auto& c : p["charges"]) {
                    if (!c.contains("frames") || !c["frames"].is_array()) corrupt(line_no, "malformed charge entry");
                    for (const auto& f : c["frames"]) {
                        if (!f.is_number_integer()) corrupt(line_no, "non-integer frame index in charges");
                        from_charges.push_back(f.get<int>());
                    }
                }
                if (from_charges != frames) corrupt(line_no, "per-anchor charges disagree with frames_charged");
            }
            charges += static_cast<int>(frames.size());
            distinct.insert(frames.begin(), frames.end());
        }
        s.kinds.push_back(kind);
        if (kind == trace_kinds::final_) {
            final_payload = rec["payload"];
            final_line = line_no;
        }
    }

    if (line_no == 0 || s.kinds.empty()) throw TraceCorrupt("trace is empty");
    if (!final_payload) throw TraceCorrupt("trace has no final record");

    const Json& f = *final_payload;
    const std::size_t last = final_line;
    s.frames_accessed = int_field(f, "frames_accessed", last);
    s.distinct_frames_accessed = int_field(f, "distinct_frames_accessed", last);
    s.total_frames = int_field(f, "total_frames", last);
    s.trials = int_field(f, "trials", last);
    if (!f.contains("ratio") || !f["ratio"].is_number()) corrupt(last, "missing ratio");
    s.ratio = f["ratio"].get<double>();
    if (f.contains("answer") && f["answer"].is_string()) s.answer = f["answer"].get<std::string>();
    if (f.contains("config_digest") && f["config_digest"].is_string())
        s.config_digest = f["config_digest"].get<std::string>();

    if (s.total_frames < 1) corrupt(last, "total_frames must be positive");
    if (s.frames_accessed != charges)
        corrupt(last, fmt::format("frames_accessed {} but step records charge {}", s.frames_accessed, charges));
    if (s.distinct_frames_accessed != static_cast<int>(distinct.size()))
        corrupt(last, fmt::format("distinct_frames_accessed {} but step records touch {}", s.distinct_frames_accessed,
                                  distinct.size()));
    const double expect = static_cast<double>(distinct.size()) / s.total_frames;
    if (std::abs(expect - s.ratio) > 1e-9) corrupt(last, fmt::format("ratio {} but recomputed {}", s.ratio, expect));
    if (s.trials < max_trial) corrupt(last, "final trial count is below the highest trial recorded");

    s.distinct_frames.assign(distinct.begin(), distinct.end());
    return s;
}

TraceSummary verify_trace_file(const std::filesystem::path& path) {
    std::string content;
    try {
        content = read_file(path);
    } catch (const Error& e) {
        throw TraceCorrupt(std::string("cannot read trace: ") + e.what());
    }
    return verify_trace(content);
}

}  // namespace avua
