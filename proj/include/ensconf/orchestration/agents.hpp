#pragma once

// The LLM-facing operations: running the agent team, verbalized-confidence
// follow-ups, the structure-analysis pass, and the aggregator baseline.
// Callers pass a Backend that is already cache- and retry-wrapped as desired.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/orchestration/parse.hpp"
#include "ensconf/orchestration/prompts.hpp"
#include "ensconf/orchestration/team.hpp"
#include "ensconf/util/parallel.hpp"

namespace ensconf::orchestration {

// Token and call accounting for one logical operation.
struct CallUsage {
  int calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;

  void add(const ChatResponse& r) {
    ++calls;
    prompt_tokens += r.prompt_tokens;
    completion_tokens += r.completion_tokens;
  }
  long tokens() const { return prompt_tokens + completion_tokens; }
  CallUsage& operator+=(const CallUsage& o) {
    calls += o.calls;
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
};

inline void to_json(json& j, const CallUsage& u) {
  j = json{{"calls", u.calls},
           {"prompt_tokens", u.prompt_tokens},
           {"completion_tokens", u.completion_tokens}};
}
inline void from_json(const json& j, CallUsage& u) {
  u.calls = j.value("calls", 0);
  u.prompt_tokens = j.value("prompt_tokens", 0L);
  u.completion_tokens = j.value("completion_tokens", 0L);
}

inline ChatRequest agent_request(const QuestionRecord& q, const AgentSpec& agent,
                                 const TeamConfig& team) {
  return ChatRequest{agent.model_id,
                     {{"system", agent.system_prompt}, {"user", prompts::agent_user(q)}},
                     team.agent_temperature,
                     team.agent_max_tokens};
}

// One transcript per agent, joined in agent-index order. Exhausted transient
// retries leave that agent's answer unparsed; protocol errors propagate.
inline std::vector<AgentTranscript> run_agents(const QuestionRecord& question,
                                               const TeamConfig& team, Backend& backend) {
  team.validate();
  return parallel_map<AgentTranscript>(team.K(), team.concurrency, [&](std::size_t k) {
    const AgentSpec& spec = team.agents[k];
    AgentTranscript t;
    t.agent_index = static_cast<int>(k);
    t.role_name = spec.role_name;
    t.model_id = spec.model_id;
    try {
      const ChatResponse r = backend.chat(agent_request(question, spec, team));
      t.reasoning = r.content;
      t.prompt_tokens = r.prompt_tokens;
      t.completion_tokens = r.completion_tokens;
      t.answer = parse_answer(r.content, question.answer_format, question.choice_count);
    } catch (const TransientError& e) {
      spdlog::warn("question {} agent {}: giving up after retries: {}", question.id, k, e.what());
    }
    return t;
  });
}

struct VerbalizedResult {
  std::optional<double> confidence;
  CallUsage usage;
};

inline ChatRequest verbalized_request(const QuestionRecord& q, const AgentTranscript& t,
                                      const TeamConfig& team) {
  const AgentSpec& spec = team.agents.at(static_cast<std::size_t>(t.agent_index));
  return ChatRequest{t.model_id,
                     {{"system", spec.system_prompt},
                      {"user", prompts::agent_user(q)},
                      {"assistant", t.reasoning},
                      {"user", prompts::kVerbalizedFollowup}},
                     team.analysis_temperature,
                     team.verbalized_max_tokens};
}

// Follow-up asking the agent for a 0-100 confidence; one retry on an unparseable reply.
inline VerbalizedResult elicit_verbalized_confidence(const QuestionRecord& question,
                                                     const AgentTranscript& transcript,
                                                     const TeamConfig& team, Backend& backend) {
  VerbalizedResult out;
  if (!transcript.answer) return out;
  ChatRequest req = verbalized_request(question, transcript, team);
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatResponse r;
    try {
      r = backend.chat(req);
    } catch (const TransientError& e) {
      spdlog::warn("question {} agent {}: verbalized follow-up failed: {}", question.id,
                   transcript.agent_index, e.what());
      return out;
    }
    out.usage.add(r);
    if (auto c = parse_confidence(r.content)) {
      out.confidence = c;
      return out;
    }
    req.messages.push_back({"assistant", r.content});
    req.messages.push_back({"user", prompts::kNumberRetryNudge});
  }
  spdlog::warn("question {} agent {}: verbalized confidence unparseable", question.id,
               transcript.agent_index);
  return out;
}

struct StructureResult {
  StructureFeatures features;
  CallUsage usage;
};

inline std::optional<StructureFeatures> parse_structure(const std::string& reply) {
  auto j = extract_json_object(reply);
  if (!j) return std::nullopt;
  StructureFeatures s;
  s.source = StructureSource::llm_analysis;
  const std::pair<const char*, double*> fields[] = {
      {"evidence_overlap", &s.evidence_overlap},
      {"minority_new_info", &s.minority_new_info},
      {"minority_strength", &s.minority_strength},
      {"majority_conf_language", &s.majority_conf_language},
      {"reasoning_complexity", &s.reasoning_complexity}};
  for (const auto& [key, dst] : fields) {
    auto it = j->find(key);
    if (it == j->end()) return std::nullopt;
    auto v = json_number(*it);
    if (!v || !std::isfinite(*v)) return std::nullopt;
    *dst = std::clamp(*v, 0.0, 1.0);
  }
  auto it = j->find("divergence_depth");
  if (it == j->end() || !it->is_string()) return std::nullopt;
  const std::string d = text::to_lower(it->get<std::string>());
  if (text::contains(d, "early")) {
    s.divergence_depth = DivergenceDepth::early;
  } else if (text::contains(d, "middle") || text::contains(d, "intermediate")) {
    s.divergence_depth = DivergenceDepth::middle;
  } else if (text::contains(d, "late") || text::contains(d, "final")) {
    s.divergence_depth = DivergenceDepth::late;
  } else {
    return std::nullopt;
  }
  return s;
}

inline ChatRequest analysis_request(const EnsembleRecord& r, const TeamConfig& team) {
  return ChatRequest{team.analyzer_model(),
                     {{"system", prompts::kAnalysisSystem}, {"user", prompts::analysis_user(r)}},
                     team.analysis_temperature,
                     team.analysis_max_tokens};
}

// Unanimous records take the defaults without any call. Otherwise one
// temperature-0 analysis call, one retry on an unparseable reply, then the
// parse-fallback defaults.
inline StructureResult analyze_structure(const EnsembleRecord& record, const TeamConfig& team,
                                         Backend& backend) {
  StructureResult out;
  if (record.unanimous()) {
    out.features = StructureFeatures::unanimous_default();
    return out;
  }
  ChatRequest req = analysis_request(record, team);
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatResponse r;
    try {
      r = backend.chat(req);
    } catch (const TransientError& e) {
      spdlog::warn("question {}: structure analysis call failed: {}", record.question.id, e.what());
      break;
    }
    out.usage.add(r);
    if (auto s = parse_structure(r.content)) {
      out.features = *s;
      return out;
    }
    req.messages.push_back({"assistant", r.content});
    req.messages.push_back({"user", prompts::kJsonRetryNudge});
  }
  spdlog::warn("question {}: structure analysis unparseable, using fallback defaults",
               record.question.id);
  out.features = StructureFeatures::parse_fallback();
  return out;
}

struct AggregatorOutput {
  Label answer;
  double confidence = 0.5;
  std::string raw;
  bool fallback = false;
  CallUsage usage;
};

inline void to_json(json& j, const AggregatorOutput& a) {
  j = json{{"answer", a.answer},
           {"confidence", a.confidence},
           {"raw", a.raw},
           {"fallback", a.fallback},
           {"usage", a.usage}};
}
inline void from_json(const json& j, AggregatorOutput& a) {
  a.answer = j.at("answer").get<std::string>();
  a.confidence = j.at("confidence").get<double>();
  a.raw = j.value("raw", std::string{});
  a.fallback = j.value("fallback", false);
  a.usage = j.value("usage", CallUsage{});
}

inline std::optional<std::pair<Label, double>> parse_aggregator(const std::string& reply,
                                                                const QuestionRecord& q) {
  auto j = extract_json_object(reply);
  if (!j || !j->contains("answer") || !j->contains("confidence")) return std::nullopt;
  const json& a = (*j)["answer"];
  if (!a.is_string() && !a.is_boolean()) return std::nullopt;
  std::string raw_answer = a.is_boolean() ? (a.get<bool>() ? "yes" : "no") : a.get<std::string>();
  std::optional<Label> label;
  if (q.answer_format == AnswerFormat::yes_no) {
    const std::string n = text::normalize_label(raw_answer);
    if (n == "yes" || n == "no") label = n;
  } else {
    const std::string n = text::normalize_label(raw_answer);
    if (n.size() == 1 && n[0] >= 'a' && n[0] < 'a' + q.choice_count) {
      label = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(n[0]))));
    } else {
      label = parse_answer(raw_answer, q.answer_format, q.choice_count);
    }
  }
  auto c = json_number((*j)["confidence"]);
  if (!label || !c || !std::isfinite(*c)) return std::nullopt;
  double conf = *c;
  if (conf > 1.0 && conf <= 100.0) conf /= 100.0;
  return std::make_pair(*label, std::clamp(conf, 0.0, 1.0));
}

inline ChatRequest aggregator_request(const EnsembleRecord& r, const TeamConfig& team) {
  return ChatRequest{team.analyzer_model(),
                     {{"system", prompts::kAggregatorSystem},
                      {"user", prompts::aggregator_user(r, team.aggregator_truncate_chars)}},
                     0.0,
                     team.aggregator_max_tokens};
}

// Aggregator's own answer and confidence. After a failed retry it falls back to
// the majority answer at confidence 0.5, flagged.
inline AggregatorOutput llm_aggregate(const EnsembleRecord& record, const TeamConfig& team,
                                      Backend& backend) {
  AggregatorOutput out;
  ChatRequest req = aggregator_request(record, team);
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatResponse r;
    try {
      r = backend.chat(req);
    } catch (const TransientError& e) {
      spdlog::warn("question {}: aggregator call failed: {}", record.question.id, e.what());
      break;
    }
    out.usage.add(r);
    out.raw = r.content;
    if (auto parsed = parse_aggregator(r.content, record.question)) {
      out.answer = parsed->first;
      out.confidence = parsed->second;
      return out;
    }
    req.messages.push_back({"assistant", r.content});
    req.messages.push_back({"user", prompts::kJsonRetryNudge});
  }
  out.answer = record.majority_answer;
  out.confidence = 0.5;
  out.fallback = true;
  return out;
}

}  // namespace ensconf::orchestration
