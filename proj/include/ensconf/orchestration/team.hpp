#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/util/error.hpp"

namespace ensconf::orchestration {

struct RolePrompt {
  std::string role_name;
  std::string system_prompt;
};

// Five reasoning styles. The Devil's Advocate wording is the published one;
// the other four follow their one-line role descriptions.
inline const std::vector<RolePrompt>& default_roles() {
  static const std::vector<RolePrompt> roles{
      {"Analytical Reasoner",
       "You are an analytical reasoner. Break the question into its logical components, "
       "reason through each step explicitly, and derive the answer from first principles."},
      {"Devil's Advocate",
       "You are a critical thinker who always considers why the obvious answer might be wrong. "
       "Look for counterexamples, edge cases, and hidden assumptions."},
      {"Knowledge-Focused",
       "You are a knowledge-focused expert. Recall the relevant facts, definitions, and domain "
       "knowledge, and ground your answer in what is established."},
      {"Intuitive Responder",
       "You are an intuitive responder. Go with your first well-informed impression, explain "
       "briefly why it seems right, and commit to an answer."},
      {"Systematic Verifier",
       "You are a systematic verifier. Check each candidate answer against the question's "
       "requirements in turn and eliminate options until one remains."},
  };
  return roles;
}

struct AgentSpec {
  std::string role_name;
  std::string system_prompt;
  std::string model_id;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

struct TeamConfig {
  std::vector<AgentSpec> agents;
  double agent_temperature = 0.7;
  int agent_max_tokens = 800;
  double analysis_temperature = 0.0;
  int analysis_max_tokens = 400;
  int verbalized_max_tokens = 20;
  int aggregator_max_tokens = 100;
  std::size_t aggregator_truncate_chars = 1200;
  // Model used for analysis, follow-ups and the aggregator; empty means agent 0's model.
  std::string analysis_model;
  std::string endpoint;
  std::size_t concurrency = 8;
  RetryPolicy retry;

  std::size_t K() const { return agents.size(); }

  const std::string& analyzer_model() const {
    return analysis_model.empty() ? agents.at(0).model_id : analysis_model;
  }

  void validate() const {
    if (agents.size() < 2) throw Error("team config: need at least 2 agents");
    for (const auto& a : agents) {
      if (a.model_id.empty()) throw Error("team config: agent '" + a.role_name + "' has no model");
    }
    if (concurrency == 0) throw Error("team config: concurrency must be positive");
  }

  // K agents cycling through the default roles, all on one model.
  static TeamConfig homogeneous(const std::string& model, std::size_t k = 5) {
    TeamConfig t;
    const auto& roles = default_roles();
    for (std::size_t i = 0; i < k; ++i) {
      const auto& r = roles[i % roles.size()];
      t.agents.push_back({r.role_name, r.system_prompt, model});
    }
    return t;
  }
};

inline void to_json(json& j, const TeamConfig& t) {
  json agents = json::array();
  for (const auto& a : t.agents) {
    agents.push_back({{"role_name", a.role_name},
                      {"system_prompt", a.system_prompt},
                      {"model_id", a.model_id}});
  }
  j = json{{"agents", agents},
           {"agent_temperature", t.agent_temperature},
           {"agent_max_tokens", t.agent_max_tokens},
           {"analysis_temperature", t.analysis_temperature},
           {"analysis_max_tokens", t.analysis_max_tokens},
           {"verbalized_max_tokens", t.verbalized_max_tokens},
           {"aggregator_max_tokens", t.aggregator_max_tokens},
           {"aggregator_truncate_chars", t.aggregator_truncate_chars},
           {"analysis_model", t.analysis_model},
           {"endpoint", t.endpoint},
           {"concurrency", t.concurrency},
           {"retry",
            {{"max_attempts", t.retry.max_attempts},
             {"initial_backoff_ms", t.retry.initial_backoff.count()},
             {"multiplier", t.retry.multiplier}}}};
}

// Missing agent fields fall back to the default role at the same index;
// "model_id" falls back to the top-level "model".
inline void from_json(const json& j, TeamConfig& t) {
  t = TeamConfig{};
  const std::string model = j.value("model", std::string{});
  const auto& roles = default_roles();
  if (j.contains("agents")) {
    std::size_t i = 0;
    for (const auto& a : j.at("agents")) {
      const auto& role = roles[i % roles.size()];
      t.agents.push_back({a.value("role_name", role.role_name),
                          a.value("system_prompt", role.system_prompt),
                          a.value("model_id", model)});
      ++i;
    }
  } else {
    t = TeamConfig::homogeneous(model, j.value("K", std::size_t{5}));
  }
  t.agent_temperature = j.value("agent_temperature", t.agent_temperature);
  t.agent_max_tokens = j.value("agent_max_tokens", t.agent_max_tokens);
  t.analysis_temperature = j.value("analysis_temperature", t.analysis_temperature);
  t.analysis_max_tokens = j.value("analysis_max_tokens", t.analysis_max_tokens);
  t.verbalized_max_tokens = j.value("verbalized_max_tokens", t.verbalized_max_tokens);
  t.aggregator_max_tokens = j.value("aggregator_max_tokens", t.aggregator_max_tokens);
  t.aggregator_truncate_chars = j.value("aggregator_truncate_chars", t.aggregator_truncate_chars);
  t.analysis_model = j.value("analysis_model", t.analysis_model);
  t.endpoint = j.value("endpoint", t.endpoint);
  t.concurrency = j.value("concurrency", t.concurrency);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    t.retry.max_attempts = r.value("max_attempts", t.retry.max_attempts);
    t.retry.initial_backoff =
        std::chrono::milliseconds(r.value("initial_backoff_ms", t.retry.initial_backoff.count()));
    t.retry.multiplier = r.value("multiplier", t.retry.multiplier);
  }
}

}  // namespace ensconf::orchestration
