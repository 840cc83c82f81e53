#pragma once

// OpenAI-compatible HTTP client: POST /v1/chat/completions and POST /v1/embeddings.

#include <httplib.h>
// <resolv.h> defines _res as a macro, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "ensconf/orchestration/backend.hpp"
#include "ensconf/util/error.hpp"

namespace ensconf::orchestration {

struct EndpointConfig {
  // Base URL, e.g. "http://localhost:8000" or "http://host:8000/v1".
  std::string url;
  std::string api_key;
  int timeout_seconds = 120;
};

class HttpBackend final : public Backend {
 public:
  HttpBackend(EndpointConfig chat, EndpointConfig embeddings)
      : chat_(std::move(chat)), embeddings_(std::move(embeddings)) {}

  ChatResponse chat(const ChatRequest& request) override {
    const json body = post(chat_, "/chat/completions", json(request));
    try {
      ChatResponse r;
      r.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
      if (body.contains("usage") && body["usage"].is_object()) {
        r.prompt_tokens = body["usage"].value("prompt_tokens", 0L);
        r.completion_tokens = body["usage"].value("completion_tokens", 0L);
      }
      return r;
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("chat completion response malformed: ") + e.what());
    }
  }

  std::vector<Embedding> embed(const std::string& model,
                               const std::vector<std::string>& texts) override {
    const json body = post(embeddings_, "/embeddings", json{{"model", model}, {"input", texts}});
    try {
      const auto& data = body.at("data");
      if (data.size() != texts.size()) {
        throw ProtocolError("embeddings response has " + std::to_string(data.size()) +
                            " vectors for " + std::to_string(texts.size()) + " inputs");
      }
      std::vector<Embedding> out(texts.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t idx = data[i].value("index", i);
        if (idx >= out.size()) throw ProtocolError("embeddings response index out of range");
        out[idx] = data[i].at("embedding").get<Embedding>();
      }
      return out;
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("embeddings response malformed: ") + e.what());
    }
  }

 private:
  struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path ending in /v1
  };

  static SplitUrl split(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error("endpoint URL lacks scheme: " + url);
    const auto path_start = url.find('/', scheme + 3);
    SplitUrl s;
    s.origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    if (path.size() < 3 || path.compare(path.size() - 3, 3, "/v1") != 0) path += "/v1";
    s.prefix = path;
    return s;
  }

  static json post(const EndpointConfig& ep, const std::string& route, const json& payload) {
    const SplitUrl u = split(ep.url);
    httplib::Client client(u.origin);
    client.set_connection_timeout(ep.timeout_seconds, 0);
    client.set_read_timeout(ep.timeout_seconds, 0);
    client.set_write_timeout(ep.timeout_seconds, 0);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
    auto res = client.Post(u.prefix + route, headers, payload.dump(), "application/json");
    if (!res) {
      throw TransientError("request to " + ep.url + route +
                           " failed: " + httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 429 || status >= 500) {
      throw TransientError("endpoint returned HTTP " + std::to_string(status));
    }
    if (status < 200 || status >= 300) {
      throw ProtocolError("endpoint returned HTTP " + std::to_string(status) + ": " +
                          res->body.substr(0, 300));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw ProtocolError("endpoint returned non-JSON body");
    return body;
  }

  EndpointConfig chat_;
  EndpointConfig embeddings_;
};

}  // namespace ensconf::orchestration
