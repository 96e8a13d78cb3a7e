#include "avua/llm_gateway.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "avua/error.hpp"

namespace avua {

std::string PromptBundle::rendered() const {
    if (system_text.empty()) return user_text;
    return system_text + "\n" + user_text;
}

Json bundle_to_json(const PromptBundle& bundle) {
    return Json{{"system", bundle.system_text},
                {"user", bundle.user_text},
                {"decoding",
                 {{"temperature", bundle.decoding.temperature},
                  {"max_tokens", bundle.decoding.max_tokens},
                  {"stop", bundle.decoding.stop_sequences}}}};
}

std::string prompt_digest(const PromptBundle& bundle) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return sha256_hex(bundle_to_json(bundle).dump());
}

// ---------------------------------------------------------------------------

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) throw DimensionMismatch("cosine of vectors with different dimensions");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    if (na == nb && a.values == b.values) return 1.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<std::string> HashingEmbedder::tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t HashingEmbedder::bucket(std::string_view token) const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((seed_ >> (8 * i)) & 0xff));
    for (char c : token) mix(static_cast<unsigned char>(c));
    return static_cast<std::size_t>(h % dimension_);
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
    const std::string trimmed = trim(text);
    if (trimmed.empty()) throw EmptyText("cannot embed empty text");
    auto tokens = tokenize(trimmed);
    if (tokens.empty()) tokens.push_back(trimmed);
    EmbeddingVector v;
    v.values.assign(dimension_, 0.0);
    for (const auto& t : tokens) v.values[bucket(t)] += 1.0;
    return v;
}

EmbeddingVector LlmBackend::embed(std::string_view text) const {
    static const HashingEmbedder embedder;
    return embedder.embed(text);
}

// ---------------------------------------------------------------------------

std::vector<ScriptEntry> parse_script(const Json& doc) {
    if (!doc.is_array()) throw ConfigError("script must be a JSON array");
    std::vector<ScriptEntry> entries;
    for (const auto& e : doc) {
        ScriptEntry entry;
        entry.matcher = e.at("matcher").get<std::string>();
        const auto kind = e.value("matcher_kind", std::string("substring"));
        if (kind == "substring") {
            entry.kind = MatcherKind::substring;
        } else if (kind == "regex") {
            entry.kind = MatcherKind::regex;
        } else {
            throw ConfigError("unknown matcher_kind '" + kind + "'");
        }
        entry.response = e.at("response").get<std::string>();
        if (e.contains("max_uses") && !e["max_uses"].is_null()) {
            entry.max_uses = e["max_uses"].get<int>();
            if (*entry.max_uses < 1) throw ConfigError("max_uses must be positive");
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("script file not found: " + path.string());
    try {
        return parse_script(Json::parse(read_file(path.string())));
    } catch (const Json::exception& e) {
        throw ConfigError("malformed script " + path.string() + ": " + e.what());
    }
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries, bool strict, std::string fallback)
    : strict_(strict), fallback_(std::move(fallback)) {
    for (auto& e : entries) {
        Compiled c{std::move(e), std::nullopt, 0};
        if (c.entry.kind == MatcherKind::regex) {
            try {
                c.pattern.emplace(c.entry.matcher, std::regex::ECMAScript);
            } catch (const std::regex_error& err) {
                throw ConfigError("bad script regex '" + c.entry.matcher + "': " + err.what());
            }
        }
        entries_.push_back(std::move(c));
    }
}

std::string ScriptedBackend::complete(const PromptBundle& bundle) {
    const std::string prompt = bundle.rendered();
    std::lock_guard lock(mutex_);
    for (auto& c : entries_) {
        if (c.entry.max_uses && c.used >= *c.entry.max_uses) continue;
        const bool hit = c.pattern ? std::regex_search(prompt, *c.pattern)
                                   : prompt.find(c.entry.matcher) != std::string::npos;
        if (!hit) continue;
        ++c.used;
        return c.entry.response;
    }
    if (strict_) {
        throw NoScriptMatch("no script entry matches prompt ending with: ..." +
                            std::string(prompt.size() > 240 ? prompt.substr(prompt.size() - 240) : prompt));
    }
    return fallback_;
}

int ScriptedBackend::uses(std::size_t entry) const {
    std::lock_guard lock(mutex_);
    return entries_.at(entry).used;
}

RecordingBackend::RecordingBackend(std::shared_ptr<LlmBackend> live, std::filesystem::path session)
    : live_(std::move(live)), session_(std::move(session)) {
    if (!live_) throw ConfigError("record mode needs a live backend");
}

std::string RecordingBackend::complete(const PromptBundle& bundle) {
    std::string response = live_->complete(bundle);
    Json line{{"digest", prompt_digest(bundle)}, {"response", response}};
    std::lock_guard lock(mutex_);
    std::ofstream out(session_, std::ios::app | std::ios::binary);
    if (!out) throw IoFailure("cannot append to session " + session_.string());
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw IoFailure("write to session " + session_.string() + " failed");
    return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& session) {
    if (!std::filesystem::exists(session)) throw IoFailure("replay session not found: " + session.string());
    try {
        for (const auto& j : read_json_lines(session.string())) {
            responses_.emplace(j.at("digest").get<std::string>(), j.at("response").get<std::string>());
        }
    } catch (const Json::exception& e) {
        throw IoFailure("malformed replay session " + session.string() + ": " + e.what());
    }
}

std::string ReplayBackend::complete(const PromptBundle& bundle) {
    const auto digest = prompt_digest(bundle);
    auto it = responses_.find(digest);
    if (it == responses_.end()) throw DigestMiss("no recorded response for digest " + digest);
    return it->second;
}

std::shared_ptr<LlmBackend> record_and_replay(const std::filesystem::path& session, SessionMode mode,
                                              std::shared_ptr<LlmBackend> live) {
    if (mode == SessionMode::record) return std::make_shared<RecordingBackend>(std::move(live), session);
    return std::make_shared<ReplayBackend>(session);
}

// ---------------------------------------------------------------------------

std::size_t Transcript::count(std::string_view tag) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tag == tag ? 1 : 0;
    return n;
}

Json Transcript::to_json_lines() const {
    Json arr = Json::array();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        Json j{{"seq", i + 1},         {"tag", e.tag},   {"digest", e.digest},
               {"system", e.system_text}, {"user", e.user_text}, {"response", e.response}};
        if (!e.error.empty()) j["error"] = e.error;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::string Transcript::serialize() const {
    std::string out;
    for (const auto& j : to_json_lines()) out += j.dump() + "\n";
    return out;
}

std::string LlmClient::complete(const PromptBundle& bundle, std::string_view tag) {
    if (trim(bundle.user_text).empty()) throw ConfigError("prompt user_text must not be empty");
    TranscriptEntry entry{std::string(tag), prompt_digest(bundle), bundle.system_text, bundle.user_text, {}, {}};
    try {
        entry.response = backend_->complete(bundle);
    } catch (const std::exception& e) {
        entry.error = e.what();
        transcript_->append(std::move(entry));
        throw;
    }
    std::string response = entry.response;
    transcript_->append(std::move(entry));
    return response;
}

}  // namespace avua
