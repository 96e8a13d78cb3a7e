#include "avua/memory_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "avua/error.hpp"

namespace avua {

namespace {

// Mathematically equal cosines can differ in the last ulp depending on
// the counts involved; rank on a rounded value so those stay ties.
long long rank_key(double similarity) { return std::llround(similarity * 1e12); }

}  // namespace

std::vector<DigestStep> digest_trajectory(const Trajectory& tau) {
    std::vector<DigestStep> out;
    for (const auto& s : tau.steps) {
        out.push_back(DigestStep{s.action, head_truncate(s.action_input.raw, kDigestFieldChars),
                                 head_truncate(s.observation, kDigestFieldChars)});
    }
    if (tau.final_answer) out.push_back(DigestStep{"Final Answer", head_truncate(*tau.final_answer, kDigestFieldChars), ""});
    return out;
}

Json to_json(const MemoryRecord& r) {
    Json digest = Json::array();
    for (const auto& d : r.trajectory_digest) {
        digest.push_back({{"action", d.action}, {"input", d.input}, {"observation_head", d.observation_head}});
    }
    return Json{{"id", r.id},
                {"question_type", r.question_type},
                {"question_text", r.question_text},
                {"policy_raw", r.policy_raw},
                {"trajectory_digest", digest},
                {"refinement", to_json(r.refinement)},
                {"verdict", r.verdict},
                {"confidence", r.confidence},
                {"embedding", r.embedding.values},
                {"created_at", r.created_at}};
}

MemoryRecord memory_record_from_json(const Json& j) {
    MemoryRecord r;
    r.id = j.at("id").get<std::string>();
    r.question_type = j.at("question_type").get<std::string>();
    r.question_text = j.value("question_text", "");
    r.policy_raw = j.value("policy_raw", "");
    for (const auto& d : j.value("trajectory_digest", Json::array())) {
        r.trajectory_digest.push_back(
            DigestStep{d.value("action", ""), d.value("input", ""), d.value("observation_head", "")});
    }
    if (j.contains("refinement")) r.refinement = refinement_from_json(j["refinement"]);
    r.verdict = j.value("verdict", false);
    r.confidence = j.value("confidence", 0);
    r.embedding.values = j.at("embedding").get<std::vector<double>>();
    r.created_at = j.value("created_at", std::int64_t{0});
    return r;
}

std::string memory_key(std::string_view question_type, std::string_view question_text) {
    if (trim(question_type).empty()) return std::string(question_text);
    return std::string(question_type) + ": " + std::string(question_text);
}

LongTermMemory::LongTermMemory(const Embedder& embedder, std::filesystem::path path, bool logical_clock)
    : embedder_(&embedder), path_(std::move(path)), logical_clock_(logical_clock) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::vector<Json> lines;
    try {
        lines = read_json_lines(path_.string());
    } catch (const Json::exception& e) {
        throw IoFailure("malformed memory file " + path_.string() + ": " + e.what());
    }
    for (const auto& j : lines) {
        MemoryRecord r = memory_record_from_json(j);
        if (r.embedding.dimension() != embedder_->dimension()) {
            throw DimensionMismatch(fmt::format("memory record {} has dimension {}, store uses {}", r.id,
                                                r.embedding.dimension(), embedder_->dimension()));
        }
        records_.push_back(std::move(r));
    }
    next_id_ = records_.size() + 1;
}

std::string LongTermMemory::put(MemoryRecord record) {
    if (trim(record.question_type).empty()) throw ConfigError("memory records need a question type");
    if (record.embedding.values.empty()) {
        record.embedding = embedder_->embed(memory_key(record.question_type, record.question_text));
    } else if (record.embedding.dimension() != embedder_->dimension()) {
        throw DimensionMismatch(fmt::format("embedding dimension {} does not match store dimension {}",
                                            record.embedding.dimension(), embedder_->dimension()));
    }

    std::lock_guard lock(mutex_);
    record.id = fmt::format("mem-{:06d}", next_id_);
    if (logical_clock_) {
        std::int64_t latest = 0;
        for (const auto& r : records_) latest = std::max(latest, r.created_at);
        record.created_at = latest + 1;
    } else {
        record.created_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    }
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw IoFailure("cannot append to memory file " + path_.string());
        out << to_json(record).dump() << '\n';
        out.flush();
        if (!out) throw IoFailure("write to memory file " + path_.string() + " failed");
    }
    ++next_id_;
    records_.push_back(record);
    return record.id;
}

std::vector<ScoredRecord> LongTermMemory::retrieve(std::string_view question_type, std::string_view question_text,
                                                   int k, const RetrieveOptions& opts) const {
    if (k < 1) throw ConfigError("retrieve needs k >= 1");
    const std::string key = memory_key(question_type, question_text);
    if (trim(key).empty()) return {};
    const EmbeddingVector query = embedder_->embed(key);

    std::vector<ScoredRecord> scored;
    {
        std::lock_guard lock(mutex_);
        for (const auto& r : records_) {
            if (opts.only_successful && !r.verdict) continue;
            const double sim = cosine(query, r.embedding);
            if (sim >= opts.min_similarity) scored.push_back(ScoredRecord{r, sim});
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (rank_key(a.similarity) != rank_key(b.similarity)) return rank_key(a.similarity) > rank_key(b.similarity);
        if (a.record.created_at != b.record.created_at) return a.record.created_at > b.record.created_at;
        return a.record.id > b.record.id;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

std::vector<MemoryRecord> LongTermMemory::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t LongTermMemory::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

// ---------------------------------------------------------------------------

std::optional<Observation> ShortTermCache::get(int frame, const std::string& tool) const {
    auto it = entries_.find({frame, tool});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ShortTermCache::put(int frame, const std::string& tool, Observation obs) {
    entries_[{frame, tool}] = std::move(obs);
}

std::vector<int> ShortTermCache::frames() const {
    std::vector<int> out;
    for (const auto& [key, _] : entries_) out.push_back(key.first);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace avua
