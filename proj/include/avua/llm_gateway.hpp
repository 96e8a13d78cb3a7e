#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "avua/text_util.hpp"

namespace avua {

struct DecodingParams {
    double temperature = 0.0;
    int max_tokens = 1024;
    std::vector<std::string> stop_sequences;
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    DecodingParams decoding;

    // The text script matchers see: system and user joined by a newline.
    std::string rendered() const;
};

// Digest over the canonical serialization of (system, user, decoding).
std::string prompt_digest(const PromptBundle& bundle);
Json bundle_to_json(const PromptBundle& bundle);

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    double norm() const;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
};

// Bag-of-tokens feature hashing. Text is lowercased and split on any
// non-alphanumeric byte; every token adds 1 to bucket
// fnv1a64(seed || token) mod dimension. Token order never matters.
class HashingEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDimension = 256;
    static constexpr std::uint64_t kDefaultSeed = 0x5eed;

    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension,
                             std::uint64_t seed = kDefaultSeed);

    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

    static std::vector<std::string> tokenize(std::string_view text);
    std::size_t bucket(std::string_view token) const;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Backends

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const PromptBundle& bundle) = 0;
    virtual EmbeddingVector embed(std::string_view text) const;
    virtual std::string name() const = 0;
};

enum class MatcherKind { substring, regex };

struct ScriptEntry {
    std::string matcher;
    MatcherKind kind = MatcherKind::substring;
    std::string response;
    std::optional<int> max_uses;
};

std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
std::vector<ScriptEntry> parse_script(const Json& doc);

// Serves responses from an ordered script; first matching entry with uses
// left wins. In strict mode an unmatched prompt throws NoScriptMatch,
// otherwise the fallback text is returned.
class ScriptedBackend final : public LlmBackend {
public:
    static constexpr std::string_view kFallback = "Final Answer: unknown";

    explicit ScriptedBackend(std::vector<ScriptEntry> entries, bool strict = true,
                             std::string fallback = std::string(kFallback));

    std::string complete(const PromptBundle& bundle) override;
    std::string name() const override { return "scripted"; }

    int uses(std::size_t entry) const;

private:
    struct Compiled {
        ScriptEntry entry;
        std::optional<std::regex> pattern;
        int used = 0;
    };
    mutable std::mutex mutex_;
    std::vector<Compiled> entries_;
    bool strict_;
    std::string fallback_;
};

// HTTP POST of {system, user, temperature, max_tokens, stop}; reads {text}.
class RemoteBackend final : public LlmBackend {
public:
    explicit RemoteBackend(std::string url, int timeout_sec = 120);

    std::string complete(const PromptBundle& bundle) override;
    std::string name() const override { return "remote"; }

private:
    std::string scheme_host_;
    std::string path_;
    int timeout_sec_;
};

// Wraps a live backend and appends {digest, response} lines to a session.
class RecordingBackend final : public LlmBackend {
public:
    RecordingBackend(std::shared_ptr<LlmBackend> live, std::filesystem::path session);

    std::string complete(const PromptBundle& bundle) override;
    std::string name() const override { return "record"; }

private:
    std::shared_ptr<LlmBackend> live_;
    std::filesystem::path session_;
    std::mutex mutex_;
};

// Serves recorded responses keyed by prompt digest; call order is irrelevant.
class ReplayBackend final : public LlmBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& session);

    std::string complete(const PromptBundle& bundle) override;
    std::string name() const override { return "replay"; }
    std::size_t size() const { return responses_.size(); }

private:
    std::map<std::string, std::string> responses_;
};

enum class SessionMode { record, replay };

std::shared_ptr<LlmBackend> record_and_replay(const std::filesystem::path& session,
                                              SessionMode mode,
                                              std::shared_ptr<LlmBackend> live = nullptr);

// ---------------------------------------------------------------------------
// Per-episode transcript

struct TranscriptEntry {
    std::string tag;
    std::string digest;
    std::string system_text;
    std::string user_text;
    std::string response;
    std::string error;
};

class Transcript {
public:
    void append(TranscriptEntry entry) { entries_.push_back(std::move(entry)); }
    const std::vector<TranscriptEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t count(std::string_view tag) const;
    Json to_json_lines() const;
    std::string serialize() const;

private:
    std::vector<TranscriptEntry> entries_;
};

// What the agent components talk to: a shared backend plus the episode's
// own transcript. Every call is logged under the prompt template's tag.
class LlmClient {
public:
    LlmClient(LlmBackend& backend, Transcript& transcript)
        : backend_(&backend), transcript_(&transcript) {}

    std::string complete(const PromptBundle& bundle, std::string_view tag);
    EmbeddingVector embed(std::string_view text) const { return backend_->embed(text); }
    Transcript& transcript() { return *transcript_; }

private:
    LlmBackend* backend_;
    Transcript* transcript_;
};

}  // namespace avua
