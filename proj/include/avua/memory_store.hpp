#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/reflection.hpp"
#include "avua/toolbox.hpp"
#include "avua/trajectory.hpp"

namespace avua {

struct DigestStep {
    std::string action;
    std::string input;
    std::string observation_head;

    friend bool operator==(const DigestStep&, const DigestStep&) = default;
};

inline constexpr std::size_t kDigestFieldChars = 200;

std::vector<DigestStep> digest_trajectory(const Trajectory& tau);

struct MemoryRecord {
    std::string id;
    std::string question_type;
    std::string question_text;
    std::string policy_raw;
    std::vector<DigestStep> trajectory_digest;
    Refinement refinement;
    bool verdict = false;
    int confidence = 0;
    EmbeddingVector embedding;
    std::int64_t created_at = 0;
};

Json to_json(const MemoryRecord& r);
MemoryRecord memory_record_from_json(const Json& j);

// Key text for both storage and lookup.
std::string memory_key(std::string_view question_type, std::string_view question_text);

struct RetrieveOptions {
    double min_similarity = 0.5;
    bool only_successful = false;
};

struct ScoredRecord {
    MemoryRecord record;
    double similarity = 0.0;
};

// Long-term episode memory: a JSON-lines file scanned linearly by cosine
// similarity. An empty path keeps everything in memory.
class LongTermMemory {
public:
    explicit LongTermMemory(const Embedder& embedder, std::filesystem::path path = {},
                            bool logical_clock = false);

    LongTermMemory(const LongTermMemory&) = delete;
    LongTermMemory& operator=(const LongTermMemory&) = delete;

    // Fills id, created_at, and (when empty) the embedding. Throws
    // DimensionMismatch on a foreign embedding and IoFailure on write errors.
    std::string put(MemoryRecord record);

    // Top-k by cosine descending; ties (equal to 1e-12) go to the newer record.
    std::vector<ScoredRecord> retrieve(std::string_view question_type,
                                       std::string_view question_text, int k,
                                       const RetrieveOptions& opts = {}) const;

    std::vector<MemoryRecord> records() const;
    std::size_t size() const;
    std::size_t dimension() const { return embedder_->dimension(); }

private:
    const Embedder* embedder_;
    std::filesystem::path path_;
    bool logical_clock_;
    mutable std::mutex mutex_;
    std::vector<MemoryRecord> records_;
    std::uint64_t next_id_ = 1;
};

// Per-episode frame observation cache keyed by (frame, tool).
class ShortTermCache {
public:
    std::optional<Observation> get(int frame, const std::string& tool) const;
    void put(int frame, const std::string& tool, Observation obs);
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }
    std::vector<int> frames() const;

private:
    std::map<std::pair<int, std::string>, Observation> entries_;
};

}  // namespace avua
