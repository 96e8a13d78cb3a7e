// HTTP adapters for the completion backend and the tool server.
#include <httplib.h>

#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/llm_gateway.hpp"
#include "avua/toolbox.hpp"

namespace avua {

namespace {

struct SplitUrl {
    std::string scheme_host;
    std::string path;
};

SplitUrl split_url(const std::string& url, const std::string& default_path) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, default_path};
    return {url.substr(0, path_start), url.substr(path_start)};
}

Json post_json(const std::string& scheme_host, const std::string& path, const Json& body, int timeout_sec) {
    httplib::Client client(scheme_host);
    client.set_connection_timeout(timeout_sec, 0);
    client.set_read_timeout(timeout_sec, 0);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw TransportError(fmt::format("POST {}{} failed: {}", scheme_host, path, httplib::to_string(res.error())));
    }
    if (res->status != 200) {
        throw TransportError(fmt::format("POST {}{} returned HTTP {}", scheme_host, path, res->status));
    }
    try {
        return Json::parse(res->body);
    } catch (const Json::exception& e) {
        throw TransportError(fmt::format("POST {}{} returned invalid JSON: {}", scheme_host, path, e.what()));
    }
}

}  // namespace

RemoteBackend::RemoteBackend(std::string url, int timeout_sec) : timeout_sec_(timeout_sec) {
    auto parts = split_url(url, "/v1/complete");
    scheme_host_ = std::move(parts.scheme_host);
    path_ = std::move(parts.path);
}

std::string RemoteBackend::complete(const PromptBundle& bundle) {
    Json body{{"system", bundle.system_text},
              {"user", bundle.user_text},
              {"temperature", bundle.decoding.temperature},
              {"max_tokens", bundle.decoding.max_tokens},
              {"stop", bundle.decoding.stop_sequences}};
    Json reply = post_json(scheme_host_, path_, body, timeout_sec_);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw TransportError("completion reply lacks a string 'text' field");
    }
    return reply["text"].get<std::string>();
}

RemoteToolAdapter::RemoteToolAdapter(std::string base_url, int timeout_sec)
    : base_url_(std::move(base_url)), timeout_sec_(timeout_sec) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

AdapterReply RemoteToolAdapter::call(const ToolRequest& request) {
    auto parts = split_url(base_url_ + "/invoke", "/invoke");
    Json body{{"tool", request.tool}, {"frame_indices", request.frames}};
    body["query"] = request.query ? Json(*request.query) : Json(nullptr);
    Json reply;
    try {
        reply = post_json(parts.scheme_host, parts.path, body, timeout_sec_);
    } catch (const TransportError& e) {
        throw AdapterFailure(e.what());
    }
    if (!reply.contains("observation") || !reply["observation"].is_string()) {
        throw AdapterFailure("tool reply lacks a string 'observation' field");
    }
    AdapterReply out{reply["observation"].get<std::string>(), std::nullopt};
    if (reply.contains("frames_consumed") && reply["frames_consumed"].is_array()) {
        out.frames_consumed = reply["frames_consumed"].get<std::vector<int>>();
    }
    return out;
}

}  // namespace avua
