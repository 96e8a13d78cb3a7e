#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avua/text_util.hpp"

namespace avua {

namespace trace_kinds {
inline constexpr const char* policy = "policy";
inline constexpr const char* step = "step";
inline constexpr const char* sampler = "sampler";
inline constexpr const char* evaluation = "evaluation";
inline constexpr const char* refinement = "refinement";
inline constexpr const char* final_ = "final";
}  // namespace trace_kinds

// Episode trace: one {kind, trial, payload, frames_charged} object per line.
class TraceWriter {
public:
    void add(std::string kind, int trial, Json payload, std::vector<int> frames_charged = {});
    const std::vector<Json>& records() const { return records_; }
    std::string serialize() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<Json> records_;
};

struct TraceSummary {
    std::string answer;
    int trials = 0;
    int frames_accessed = 0;
    int distinct_frames_accessed = 0;
    double ratio = 0.0;
    int total_frames = 0;
    std::string config_digest;
    std::vector<int> distinct_frames;
    std::vector<std::string> kinds;
};

// Recomputes ledger totals from the step records and checks them against
// the final record. Throws TraceCorrupt on any disagreement or malformed input.
TraceSummary verify_trace(std::string_view content);
TraceSummary verify_trace_file(const std::filesystem::path& path);

}  // namespace avua
