#pragma once

// Run configuration: one JSON document naming the benchmark files, the agent
// team, endpoints, evaluation options and output locations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/experiments/evaluate.hpp"
#include "ensconf/ingestion/benchmarks.hpp"
#include "ensconf/ingestion/cache_key.hpp"
#include "ensconf/ingestion/store.hpp"
#include "ensconf/orchestration/http_backend.hpp"
#include "ensconf/orchestration/prompts.hpp"
#include "ensconf/orchestration/team.hpp"

namespace ensconf::experiments {

struct BenchmarkSource {
  Benchmark kind = Benchmark::strategyqa;
  std::string path;
};

struct EmbeddingConfig {
  std::string model = "text-embedding";
  std::size_t dim = 0;  // 0 accepts whatever the endpoint returns
};

struct RunConfig {
  std::vector<BenchmarkSource> benchmarks;
  std::vector<std::string> mmlu_subjects = ingestion::LoadOptions{}.mmlu_subjects;
  std::size_t limit = 0;  // max questions per benchmark, 0 = all
  orchestration::TeamConfig team = orchestration::TeamConfig::homogeneous("default-model");
  EmbeddingConfig embedding;
  orchestration::EndpointConfig chat_endpoint;
  orchestration::EndpointConfig embedding_endpoint;
  EvaluationOptions evaluation;
  std::string output_dir = "out";
  std::string store_dir;  // empty: <output_dir>/store
  std::optional<std::string> mock_fixture;

  std::filesystem::path store_path() const {
    return store_dir.empty() ? std::filesystem::path(output_dir) / "store" : std::filesystem::path(store_dir);
  }

  void validate() const {
    if (benchmarks.empty()) throw Error("run config: no benchmarks listed");
    team.validate();
    for (const auto& b : benchmarks) {
      if (b.path.empty()) throw Error("run config: benchmark " + std::string(to_string(b.kind)) + " has no path");
    }
  }
};

inline void to_json(json& j, const RunConfig& c) {
  json bms = json::array();
  for (const auto& b : c.benchmarks) bms.push_back({{"kind", to_string(b.kind)}, {"path", b.path}});
  // API keys are never serialized.
  j = json{{"benchmarks", bms},
           {"mmlu_subjects", c.mmlu_subjects},
           {"limit", c.limit},
           {"team", c.team},
           {"embedding", {{"model", c.embedding.model}, {"dim", c.embedding.dim}}},
           {"endpoints",
            {{"chat", {{"url", c.chat_endpoint.url}, {"timeout_seconds", c.chat_endpoint.timeout_seconds}}},
             {"embeddings",
              {{"url", c.embedding_endpoint.url}, {"timeout_seconds", c.embedding_endpoint.timeout_seconds}}}}},
           {"evaluation", c.evaluation},
           {"output_dir", c.output_dir},
           {"store_dir", c.store_dir},
           {"mock_fixture", c.mock_fixture ? json(*c.mock_fixture) : json(nullptr)}};
}

namespace detail {

inline orchestration::EndpointConfig endpoint_from(const json& j) {
  orchestration::EndpointConfig e;
  e.url = j.value("url", std::string{});
  e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
  if (j.contains("api_key")) e.api_key = j.at("api_key").get<std::string>();
  if (j.contains("api_key_env")) {
    if (const char* v = std::getenv(j.at("api_key_env").get<std::string>().c_str())) e.api_key = v;
  }
  return e;
}

inline void env_override(std::string& dst, const char* var) {
  if (const char* v = std::getenv(var); v && *v) dst = v;
}

}  // namespace detail

// Environment variables ENSCONF_CHAT_URL, ENSCONF_EMBEDDINGS_URL and
// ENSCONF_API_KEY override the file's endpoint settings.
inline void from_json(const json& j, RunConfig& c) {
  c = RunConfig{};
  for (const auto& b : j.at("benchmarks")) {
    c.benchmarks.push_back({parse_benchmark(b.at("kind").get<std::string>()), b.at("path").get<std::string>()});
  }
  c.mmlu_subjects = j.value("mmlu_subjects", c.mmlu_subjects);
  c.limit = j.value("limit", c.limit);
  if (j.contains("team")) c.team = j.at("team").get<orchestration::TeamConfig>();
  if (j.contains("embedding")) {
    c.embedding.model = j.at("embedding").value("model", c.embedding.model);
    c.embedding.dim = j.at("embedding").value("dim", c.embedding.dim);
  }
  if (j.contains("endpoints")) {
    const json& e = j.at("endpoints");
    if (e.contains("chat")) c.chat_endpoint = detail::endpoint_from(e.at("chat"));
    c.embedding_endpoint = e.contains("embeddings") ? detail::endpoint_from(e.at("embeddings")) : c.chat_endpoint;
  }
  detail::env_override(c.chat_endpoint.url, "ENSCONF_CHAT_URL");
  detail::env_override(c.embedding_endpoint.url, "ENSCONF_EMBEDDINGS_URL");
  detail::env_override(c.chat_endpoint.api_key, "ENSCONF_API_KEY");
  detail::env_override(c.embedding_endpoint.api_key, "ENSCONF_API_KEY");
  if (j.contains("evaluation")) c.evaluation = j.at("evaluation").get<EvaluationOptions>();
  c.output_dir = j.value("output_dir", c.output_dir);
  c.store_dir = j.value("store_dir", c.store_dir);
  if (j.contains("mock_fixture") && !j.at("mock_fixture").is_null()) {
    c.mock_fixture = j.at("mock_fixture").get<std::string>();
  }
}

// Relative paths in the file resolve against the file's directory.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  RunConfig c = j.get<RunConfig>();
  const auto base = path.parent_path();
  auto resolve = [&base](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (auto& b : c.benchmarks) resolve(b.path);
  resolve(c.output_dir);
  resolve(c.store_dir);
  if (c.mock_fixture) resolve(*c.mock_fixture);
  return c;
}

// Configuration fragments that determine each stage's outputs. A change to any
// of them gives the stage a new hash, so stale entries are never reused.
inline json stage_config(const RunConfig& c, const std::string& stage) {
  const auto& t = c.team;
  json agents = json::array();
  for (const auto& a : t.agents) {
    agents.push_back({{"role", a.role_name}, {"system", a.system_prompt}, {"model", a.model_id}});
  }
  json base{{"templates", orchestration::prompts::kTemplateVersion}};
  base["stage"] = stage;
  base["agents"] = agents;
  base["agent_temperature"] = t.agent_temperature;
  base["agent_max_tokens"] = t.agent_max_tokens;
  if (stage == ingestion::stage::agents) return base;
  if (stage == ingestion::stage::verbalized) {
    base["analysis_temperature"] = t.analysis_temperature;
    base["verbalized_max_tokens"] = t.verbalized_max_tokens;
  } else if (stage == ingestion::stage::structure) {
    base["analyzer"] = t.analyzer_model();
    base["analysis_temperature"] = t.analysis_temperature;
    base["analysis_max_tokens"] = t.analysis_max_tokens;
  } else if (stage == ingestion::stage::aggregate) {
    base["analyzer"] = t.analyzer_model();
    base["aggregator_max_tokens"] = t.aggregator_max_tokens;
    base["aggregator_truncate_chars"] = t.aggregator_truncate_chars;
  } else if (stage == ingestion::stage::embeddings) {
    base["embedding_model"] = c.embedding.model;
    base["embedding_dim"] = c.embedding.dim;
  } else {
    throw Error("unknown stage " + stage);
  }
  return base;
}

inline std::string stage_hash(const RunConfig& c, const std::string& stage) {
  return ingestion::config_hash(stage_config(c, stage)).substr(0, 16);
}

// Hash of everything that can change results. File locations are left out so
// the same experiment run from another directory reports the same hash.
inline std::string experiment_hash(const RunConfig& c) {
  json kinds = json::array();
  for (const auto& b : c.benchmarks) kinds.push_back(to_string(b.kind));
  json j{{"benchmarks", kinds},
         {"mmlu_subjects", c.mmlu_subjects},
         {"limit", c.limit},
         {"evaluation", c.evaluation},
         {"mock", c.mock_fixture.has_value()}};
  for (const char* s : {ingestion::stage::agents, ingestion::stage::verbalized, ingestion::stage::structure,
                        ingestion::stage::aggregate, ingestion::stage::embeddings}) {
    j["stages"][s] = stage_hash(c, s);
  }
  return ingestion::config_hash(j).substr(0, 16);
}

}  // namespace ensconf::experiments
