#pragma once

// Canonical JSON encoding of the domain types. One object per JSONL line,
// field names identical to the struct members.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

#include "ensconf/core/types.hpp"

namespace ensconf {

using json = nlohmann::json;

namespace detail {

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace detail

inline void to_json(json& j, const QuestionRecord& q) {
  j = json{{"id", q.id},
           {"benchmark", to_string(q.benchmark)},
           {"text", q.text},
           {"answer_format", to_string(q.answer_format)},
           {"choices", q.choices},
           {"choice_count", q.choice_count},
           {"gold", q.gold},
           {"provenance", q.provenance}};
}

inline void from_json(const json& j, QuestionRecord& q) {
  q.id = j.at("id").get<std::string>();
  q.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  q.text = j.at("text").get<std::string>();
  q.answer_format = parse_answer_format(j.at("answer_format").get<std::string>());
  q.choices = j.value("choices", std::vector<std::string>{});
  q.choice_count = j.at("choice_count").get<int>();
  q.gold = j.at("gold").get<std::string>();
  q.provenance = j.value("provenance", std::string{});
}

inline void to_json(json& j, const AgentTranscript& t) {
  j = json{{"agent_index", t.agent_index},
           {"role_name", t.role_name},
           {"model_id", t.model_id},
           {"reasoning", t.reasoning},
           {"answer", detail::optional_to_json(t.answer)},
           {"verbalized_confidence", detail::optional_to_json(t.verbalized_confidence)},
           {"prompt_tokens", t.prompt_tokens},
           {"completion_tokens", t.completion_tokens}};
}

inline void from_json(const json& j, AgentTranscript& t) {
  t.agent_index = j.at("agent_index").get<int>();
  t.role_name = j.at("role_name").get<std::string>();
  t.model_id = j.at("model_id").get<std::string>();
  t.reasoning = j.at("reasoning").get<std::string>();
  t.answer = detail::optional_from_json<std::string>(j, "answer");
  t.verbalized_confidence = detail::optional_from_json<double>(j, "verbalized_confidence");
  t.prompt_tokens = j.value("prompt_tokens", 0L);
  t.completion_tokens = j.value("completion_tokens", 0L);
}

inline void to_json(json& j, const EnsembleRecord& r) {
  j = json{{"question", r.question},
           {"transcripts", r.transcripts},
           {"majority_answer", r.majority_answer},
           {"vote_confidence", r.vote_confidence},
           {"tie", r.tie},
           {"correct", r.correct},
           {"tier", to_string(r.tier)}};
}

inline void from_json(const json& j, EnsembleRecord& r) {
  r.question = j.at("question").get<QuestionRecord>();
  r.transcripts = j.at("transcripts").get<std::vector<AgentTranscript>>();
  r.majority_answer = j.at("majority_answer").get<std::string>();
  r.vote_confidence = j.at("vote_confidence").get<double>();
  r.tie = j.at("tie").get<bool>();
  r.correct = j.at("correct").get<bool>();
  r.tier = parse_tier(j.at("tier").get<std::string>());
}

inline void to_json(json& j, const StructureFeatures& s) {
  j = json{{"evidence_overlap", s.evidence_overlap},
           {"minority_new_info", s.minority_new_info},
           {"minority_strength", s.minority_strength},
           {"majority_conf_language", s.majority_conf_language},
           {"reasoning_complexity", s.reasoning_complexity},
           {"divergence_depth", to_string(s.divergence_depth)},
           {"source", to_string(s.source)}};
}

inline void from_json(const json& j, StructureFeatures& s) {
  s.evidence_overlap = j.at("evidence_overlap").get<double>();
  s.minority_new_info = j.at("minority_new_info").get<double>();
  s.minority_strength = j.at("minority_strength").get<double>();
  s.majority_conf_language = j.at("majority_conf_language").get<double>();
  s.reasoning_complexity = j.at("reasoning_complexity").get<double>();
  s.divergence_depth = parse_depth(j.at("divergence_depth").get<std::string>());
  s.source = parse_structure_source(j.at("source").get<std::string>());
}

inline void to_json(json& j, const GeometryFeatures& g) {
  j = json{{"overall_dispersion", g.overall_dispersion},
           {"majority_cohesion", g.majority_cohesion},
           {"cluster_distance", g.cluster_distance},
           {"minority_outlier_degree", g.minority_outlier_degree},
           {"majority_centrality", g.majority_centrality},
           {"minority_cohesion", g.minority_cohesion},
           {"pca_variance_ratio", g.pca_variance_ratio}};
}

inline void from_json(const json& j, GeometryFeatures& g) {
  g.overall_dispersion = j.at("overall_dispersion").get<double>();
  g.majority_cohesion = j.at("majority_cohesion").get<double>();
  g.cluster_distance = j.at("cluster_distance").get<double>();
  g.minority_outlier_degree = j.at("minority_outlier_degree").get<double>();
  g.majority_centrality = j.at("majority_centrality").get<double>();
  g.minority_cohesion = j.at("minority_cohesion").get<double>();
  g.pca_variance_ratio = j.at("pca_variance_ratio").get<double>();
}

inline void to_json(json& j, const FeatureVector& f) {
  j = json{{"layout", to_string(f.layout)}, {"values", f.values}};
}

inline void from_json(const json& j, FeatureVector& f) {
  f.layout = parse_layout(j.at("layout").get<std::string>());
  f.values = j.at("values").get<std::vector<double>>();
  if (f.values.size() != layout_size(f.layout)) {
    throw Error("feature vector length " + std::to_string(f.values.size()) +
                " does not match layout " + std::string(to_string(f.layout)));
  }
}

}  // namespace ensconf
