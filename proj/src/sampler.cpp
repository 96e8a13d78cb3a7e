#include "avua/sampler.hpp"

#include <algorithm>
#include <climits>
#include <regex>

#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/policy.hpp"

namespace avua {

std::string to_string(SamplingMode m) {
    switch (m) {
        case SamplingMode::sparse: return "sparse";
        case SamplingMode::dense: return "dense";
        case SamplingMode::switch_rate: return "switch";
    }
    return "sparse";
}

Json to_json(const FrameSuggestion& s) {
    return Json{{"indices", s.indices}, {"rationale", s.rationale}, {"mode", to_string(s.mode)}, {"fallback", s.fallback}};
}

std::vector<int> expand_range(int start, int end, int step, int total) {
    if (step <= 0) throw InvalidRange(fmt::format("step must be positive, got {}", step));
    if (start < 0 || start > end) throw InvalidRange(fmt::format("invalid range [{}, {}]", start, end));
    std::vector<int> out;
    const long long last = std::min<long long>(end, static_cast<long long>(total) - 1);
    for (long long i = start; i <= last; i += step) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<std::string> validate_indices(std::vector<int>& indices, int total, std::size_t cap) {
    std::vector<std::string> warnings;
    for (int& i : indices) {
        if (i < 0 || i >= total) {
            const int clamped = std::clamp(i, 0, total - 1);
            warnings.push_back(fmt::format("frame {} is outside the video (0-{}); clamped to {}", i, total - 1, clamped));
            i = clamped;
        }
    }
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    if (indices.size() > cap) {
        warnings.push_back(fmt::format("kept the first {} of {} frames", cap, indices.size()));
        indices.resize(cap);
    }
    return warnings;
}

namespace {

int to_int_saturating(const std::string& digits) {
    try {
        return std::stoi(digits);
    } catch (const std::out_of_range&) {
        return INT_MAX;
    }
}

struct FrameParse {
    std::vector<int> indices;
    std::string rest;
    std::vector<std::string> warnings;
};

// Consumes leading frame expressions from `text`. Out-of-range values are
// clamped with a warning; duplicates are dropped, order is kept.
FrameParse parse_frame_expressions(std::string_view text, const VideoMeta& meta) {
    static const std::regex expr(
        R"(^\s*[\[\(]?\s*(?:frames?\s*(?:index(?:es)?|indices|numbers?|no\.?|#)?|indices|index)?\s*:?\s*#?\s*)"
        R"((\d+)(?:\s*(?:-|to|\.\.)\s*(\d+))?)"
        R"((?:\s*,?\s*(?:with\s+)?(?:a\s+)?(?:step|stride|every|timestep|interval)\s*(?:of\s*|=\s*|:\s*)?(\d+))?)"
        R"(\s*[\]\)]?\s*(?:[,;:]|\band\b|$|(?=[\s\(\?\.])))",
        std::regex::icase | std::regex::ECMAScript);

    FrameParse out;
    std::string remaining(text);
    const int last = meta.last_frame();
    auto push = [&out](int f) {
        if (std::find(out.indices.begin(), out.indices.end(), f) == out.indices.end()) out.indices.push_back(f);
    };
    auto clamp_warn = [&](int f) {
        if (f > last) {
            out.warnings.push_back(fmt::format("frame {} is outside the video (0-{}); clamped to {}", f, last, last));
            return last;
        }
        return f;
    };
    std::smatch m;
    while (!remaining.empty() && std::regex_search(remaining, m, expr)) {
        if (m.length(0) == 0) break;
        int a = to_int_saturating(m[1].str());
        if (m[2].matched) {
            int b = to_int_saturating(m[2].str());
            if (a > b) std::swap(a, b);
            const int step = m[3].matched ? std::max(1, to_int_saturating(m[3].str())) : 1;
            if (a > last) {
                push(clamp_warn(a));
            } else {
                if (b > last) {
                    out.warnings.push_back(
                        fmt::format("range end {} is outside the video (0-{}); stopped at {}", b, last, last));
                }
                for (int f : expand_range(a, b, step, meta.total_frames)) push(f);
            }
        } else {
            push(clamp_warn(a));
        }
        remaining = m.suffix().str();
    }
    out.rest = trim(remaining);
    return out;
}

}  // namespace

ActionInput parse_action_input(std::string_view raw, const VideoMeta& meta) {
    ActionInput in;
    in.raw = trim(raw);
    if (!in.raw.empty() && in.raw.front() == '{') {
        try {
            Json j = Json::parse(in.raw);
            std::vector<int> frames = j.value("frame_indices", std::vector<int>{});
            for (int f : frames) {
                const int c = meta.clamp(f);
                if (c != f) {
                    in.warnings.push_back(
                        fmt::format("frame {} is outside the video (0-{}); clamped to {}", f, meta.last_frame(), c));
                }
                if (std::find(in.frame_indices.begin(), in.frame_indices.end(), c) == in.frame_indices.end()) {
                    in.frame_indices.push_back(c);
                }
            }
            if (j.contains("query") && j["query"].is_string()) in.query = j["query"].get<std::string>();
            return in;
        } catch (const Json::exception&) {
            // Not JSON after all; fall through to the text grammar.
        }
    }
    auto parsed = parse_frame_expressions(in.raw, meta);
    in.frame_indices = std::move(parsed.indices);
    in.warnings = std::move(parsed.warnings);
    std::string rest = parsed.rest;
    while (!rest.empty() && (rest.front() == ',' || rest.front() == ';' || rest.front() == ':' || rest.front() == '.')) {
        rest = trim(rest.substr(1));
    }
    if (!rest.empty()) in.query = rest;
    return in;
}

// ---------------------------------------------------------------------------

PromptBundle FrameSampler::render(const Policy* pi, const Trajectory& tau, const VideoMeta& meta,
                                  const std::string& action, const ActionInput& proposed) const {
    std::string recent;
    const std::size_t n = tau.steps.size();
    const std::size_t from = n > opts_.recent_observations ? n - opts_.recent_observations : 0;
    for (std::size_t i = from; i < n; ++i) {
        const auto& s = tau.steps[i];
        if (!recent.empty()) recent += "\n";
        recent += fmt::format("Step {} ({} on {}): {}", s.index, s.action, s.action_input.raw,
                              head_truncate(s.observation, 300));
    }
    if (recent.empty()) recent = "none yet";
    std::string strategy = pi && !trim(pi->sampling_strategy).empty() ? pi->sampling_strategy : "none given";

    PromptBundle bundle;
    bundle.decoding = opts_.decoding;
    bundle.user_text = substitute(catalog_->get(prompt_names::sampler),
                                  {{"sampling_strategy", strategy},
                                   {"total_frames", std::to_string(meta.total_frames)},
                                   {"frame_rate", format_real(meta.frame_rate)},
                                   {"last_frame", std::to_string(meta.last_frame())},
                                   {"recent_observations", recent},
                                   {"action", action},
                                   {"proposed", fmt::format("{}", fmt::join(proposed.frame_indices, ", "))},
                                   {"max_frames", std::to_string(opts_.max_indices)}});
    return bundle;
}

FrameSuggestion FrameSampler::parse(std::string_view completion, const VideoMeta& meta,
                                    const ActionInput& proposed) const {
    static const std::regex frames_line(R"((?:suggest(?:ed)?\s*)?frames?\s*:\s*(.*))", std::regex::icase);
    static const std::regex rationale_line(R"(^\s*rationale\s*:\s*(.*)$)", std::regex::icase);

    FrameSuggestion s;
    std::vector<std::string> warnings;
    std::string rationale;
    for (const auto& line : split_lines(completion)) {
        std::smatch m;
        if (s.indices.empty() && std::regex_search(line, m, frames_line)) {
            auto parsed = parse_frame_expressions(m[1].str(), meta);
            s.indices = std::move(parsed.indices);
            warnings = std::move(parsed.warnings);
        } else if (rationale.empty() && std::regex_search(line, m, rationale_line)) {
            rationale = trim(m[1].str());
        }
    }

    if (s.indices.empty()) {
        s.indices = proposed.frame_indices;
        validate_indices(s.indices, meta.total_frames, SIZE_MAX);
        s.fallback = true;
        s.rationale = "sampler reply unparseable; keeping the agent's frames";
        return s;
    }

    auto more = validate_indices(s.indices, meta.total_frames, opts_.max_indices);
    warnings.insert(warnings.end(), more.begin(), more.end());

    const std::string lower = to_lower(completion);
    if (lower.find("switch") != std::string::npos) {
        s.mode = SamplingMode::switch_rate;
    } else if (lower.find("dense") != std::string::npos) {
        s.mode = SamplingMode::dense;
    } else {
        s.mode = SamplingMode::sparse;
    }
    s.rationale = rationale.empty() ? trim(completion) : rationale;
    for (const auto& w : warnings) s.rationale += "; warning: " + w;
    return s;
}

FrameSuggestion FrameSampler::suggest(LlmClient& llm, const Policy* pi, const Trajectory& tau, const VideoMeta& meta,
                                      const std::string& action, const ActionInput& proposed) const {
    std::string completion;
    try {
        completion = llm.complete(render(pi, tau, meta, action, proposed), prompt_names::sampler);
    } catch (const std::exception& e) {
        FrameSuggestion s;
        s.indices = proposed.frame_indices;
        validate_indices(s.indices, meta.total_frames, SIZE_MAX);
        s.fallback = true;
        s.rationale = std::string("sampler unavailable (") + e.what() + "); keeping the agent's frames";
        return s;
    }
    return parse(completion, meta, proposed);
}

}  // namespace avua
