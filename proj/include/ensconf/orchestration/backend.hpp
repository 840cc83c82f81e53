#pragma once

// Wire-level request/response types and the backend interface every LLM and
// embedding call goes through.

#include <cstddef>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"

namespace ensconf::orchestration {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 0;

  bool operator==(const ChatRequest&) const = default;
};

struct ChatResponse {
  std::string content;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

inline void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", m.role}, {"content", m.content}};
}
inline void from_json(const json& j, ChatMessage& m) {
  m.role = j.at("role").get<std::string>();
  m.content = j.at("content").get<std::string>();
}

// OpenAI chat-completions request body.
inline void to_json(json& j, const ChatRequest& r) {
  j = json{{"model", r.model},
           {"messages", r.messages},
           {"temperature", r.temperature},
           {"max_tokens", r.max_tokens}};
}
inline void from_json(const json& j, ChatRequest& r) {
  r.model = j.at("model").get<std::string>();
  r.messages = j.at("messages").get<std::vector<ChatMessage>>();
  r.temperature = j.value("temperature", 1.0);
  r.max_tokens = j.value("max_tokens", 0);
}

inline void to_json(json& j, const ChatResponse& r) {
  j = json{{"content", r.content},
           {"prompt_tokens", r.prompt_tokens},
           {"completion_tokens", r.completion_tokens}};
}
inline void from_json(const json& j, ChatResponse& r) {
  r.content = j.at("content").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", 0L);
  r.completion_tokens = j.value("completion_tokens", 0L);
}

using Embedding = std::vector<double>;

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual std::vector<Embedding> embed(const std::string& model,
                                       const std::vector<std::string>& texts) = 0;
};

}  // namespace ensconf::orchestration
