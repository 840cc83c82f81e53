#pragma once

// End-to-end run: ingest, agents, verbalized follow-ups, structure analysis,
// aggregator, embeddings, then evaluation. Every stage result is stored per
// question under the stage's config hash, so an interrupted run resumes where
// it stopped and a repeated run issues no calls.

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ensconf/experiments/config.hpp"
#include "ensconf/experiments/evaluate.hpp"
#include "ensconf/experiments/record.hpp"
#include "ensconf/features.hpp"
#include "ensconf/geometry.hpp"
#include "ensconf/ingestion/store.hpp"
#include "ensconf/orchestration/agents.hpp"
#include "ensconf/orchestration/http_backend.hpp"
#include "ensconf/orchestration/mock_backend.hpp"
#include "ensconf/orchestration/wrappers.hpp"
#include "ensconf/util/parallel.hpp"

namespace ensconf::experiments {

struct PipelineResult {
  std::vector<AnalyzedRecord> records;
  json report;
  std::size_t network_chat_calls = 0;
  std::size_t network_embed_calls = 0;
  std::size_t network_calls() const { return network_chat_calls + network_embed_calls; }
};

namespace detail {

// Stored-or-computed values for one stage over a benchmark's questions.
// Misses are computed in parallel and written in question order.
template <typename T, typename Compute>
std::vector<T> run_stage(ingestion::TranscriptStore& store, const std::string& bucket,
                         const std::string& stage, const std::string& config,
                         const std::vector<std::string>& keys, std::size_t concurrency,
                         Compute&& compute) {
  std::vector<T> out(keys.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (auto hit = store.get(bucket, stage, keys[i], config)) {
      out[i] = hit->get<T>();
    } else {
      missing.push_back(i);
    }
  }
  spdlog::info("{} / {}: {} stored, {} to compute", bucket, stage, keys.size() - missing.size(),
               missing.size());
  if (missing.empty()) return out;
  std::vector<T> fresh;
  try {
    fresh = parallel_map<T>(missing.size(), concurrency, [&](std::size_t j) { return compute(missing[j]); });
  } catch (const std::exception& e) {
    throw Error("stage " + stage + " (" + bucket + ") failed: " + e.what() +
                "; completed stages are stored and a rerun resumes here");
  }
  for (std::size_t j = 0; j < missing.size(); ++j) {
    const auto i = missing[j];
    out[i] = json::parse(store.put(bucket, stage, keys[i], config, json(fresh[j]))).get<T>();
  }
  return out;
}

struct VerbalizedPayload {
  std::vector<std::optional<double>> confidences;
  CallUsage usage;
};
inline void to_json(json& j, const VerbalizedPayload& p) {
  json c = json::array();
  for (const auto& v : p.confidences) c.push_back(v ? json(*v) : json(nullptr));
  j = json{{"confidences", c}, {"usage", p.usage}};
}
inline void from_json(const json& j, VerbalizedPayload& p) {
  p.confidences.clear();
  for (const auto& v : j.at("confidences")) {
    p.confidences.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  p.usage = j.at("usage").get<CallUsage>();
}

struct StructurePayload {
  StructureFeatures features;
  CallUsage usage;
};
inline void to_json(json& j, const StructurePayload& p) { j = json{{"features", p.features}, {"usage", p.usage}}; }
inline void from_json(const json& j, StructurePayload& p) {
  p.features = j.at("features").get<StructureFeatures>();
  p.usage = j.at("usage").get<CallUsage>();
}

struct GeometryPayload {
  GeometryFeatures geometry;
  int texts = 0;
};
inline void to_json(json& j, const GeometryPayload& p) { j = json{{"geometry", p.geometry}, {"texts", p.texts}}; }
inline void from_json(const json& j, GeometryPayload& p) {
  p.geometry = j.at("geometry").get<GeometryFeatures>();
  p.texts = j.at("texts").get<int>();
}

// Agents that returned nothing still occupy a point in the cloud.
inline std::string embedding_text(const AgentTranscript& t) {
  return text::trim(t.reasoning).empty() ? std::string("(no response)") : t.reasoning;
}

}  // namespace detail

inline std::vector<QuestionRecord> ingest(const RunConfig& config) {
  std::vector<QuestionRecord> all;
  ingestion::LoadOptions lo;
  lo.mmlu_subjects = config.mmlu_subjects;
  for (const auto& src : config.benchmarks) {
    auto qs = ingestion::load_benchmark(src.kind, src.path, lo);
    if (config.limit && qs.size() > config.limit) qs.resize(config.limit);
    all.insert(all.end(), qs.begin(), qs.end());
  }
  return all;
}

// Runs every stage on `backend` (already the innermost transport) and returns
// the analyzed records in input order.
inline std::vector<AnalyzedRecord> analyze_questions(const RunConfig& config,
                                                     const std::vector<QuestionRecord>& questions,
                                                     orchestration::Backend& backend,
                                                     ingestion::TranscriptStore& store) {
  using namespace orchestration;
  const auto& team = config.team;
  TeamConfig inner_team = team;
  inner_team.concurrency = 1;  // parallelism is across questions

  std::map<Benchmark, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < questions.size(); ++i) groups[questions[i].benchmark].push_back(i);

  std::vector<AnalyzedRecord> out(questions.size());
  for (const auto& [bm, idx] : groups) {
    const std::string bucket(to_string(bm));
    std::vector<std::string> keys;
    for (auto i : idx) keys.push_back(questions[i].id);
    const std::size_t cap = team.concurrency;

    const auto ensembles = detail::run_stage<EnsembleRecord>(
        store, bucket, ingestion::stage::agents, stage_hash(config, ingestion::stage::agents), keys, cap,
        [&](std::size_t j) {
          const auto& q = questions[idx[j]];
          auto transcripts = run_agents(q, inner_team, backend);
          try {
            return make_ensemble(q, std::move(transcripts));
          } catch (const AbstainError&) {
            throw Error("question " + q.id + ": no agent produced a parseable answer");
          }
        });

    const auto verbal = detail::run_stage<detail::VerbalizedPayload>(
        store, bucket, ingestion::stage::verbalized, stage_hash(config, ingestion::stage::verbalized), keys,
        cap, [&](std::size_t j) {
          detail::VerbalizedPayload p;
          const auto& e = ensembles[j];
          for (const auto& t : e.transcripts) {
            const auto v = elicit_verbalized_confidence(e.question, t, inner_team, backend);
            p.confidences.push_back(v.confidence);
            p.usage += v.usage;
          }
          return p;
        });

    const auto structure = detail::run_stage<detail::StructurePayload>(
        store, bucket, ingestion::stage::structure, stage_hash(config, ingestion::stage::structure), keys,
        cap, [&](std::size_t j) {
          const auto r = analyze_structure(ensembles[j], inner_team, backend);
          return detail::StructurePayload{r.features, r.usage};
        });

    const auto aggregate = detail::run_stage<AggregatorOutput>(
        store, bucket, ingestion::stage::aggregate, stage_hash(config, ingestion::stage::aggregate), keys,
        cap, [&](std::size_t j) { return llm_aggregate(ensembles[j], inner_team, backend); });

    const auto geometry = detail::run_stage<detail::GeometryPayload>(
        store, bucket, ingestion::stage::embeddings, stage_hash(config, ingestion::stage::embeddings), keys,
        cap, [&](std::size_t j) {
          const auto& e = ensembles[j];
          std::vector<std::string> texts;
          for (const auto& t : e.transcripts) texts.push_back(detail::embedding_text(t));
          const auto set = geometry::embed_texts(texts, backend, config.embedding.model, config.embedding.dim);
          return detail::GeometryPayload{geometry::compute_geometry(set, majority_mask(e)),
                                         static_cast<int>(texts.size())};
        });

    for (std::size_t j = 0; j < idx.size(); ++j) {
      AnalyzedRecord& r = out[idx[j]];
      r.ensemble = ensembles[j];
      for (std::size_t k = 0; k < r.ensemble.transcripts.size(); ++k) {
        r.ensemble.transcripts[k].verbalized_confidence = verbal[j].confidences.at(k);
        r.usage.agents.calls += 1;
        r.usage.agents.prompt_tokens += r.ensemble.transcripts[k].prompt_tokens;
        r.usage.agents.completion_tokens += r.ensemble.transcripts[k].completion_tokens;
      }
      r.usage.verbalized = verbal[j].usage;
      r.structure = structure[j].features;
      r.usage.structure = structure[j].usage;
      r.aggregate = aggregate[j];
      r.usage.aggregate = aggregate[j].usage;
      r.geometry = geometry[j].geometry;
      r.usage.embedding_texts = geometry[j].texts;
    }
  }
  return out;
}

inline void write_outputs(const std::filesystem::path& dir, const std::vector<AnalyzedRecord>& records,
                          const json& report, const EvaluationOptions& opt) {
  std::filesystem::create_directories(dir);
  write_records((dir / "records.jsonl").string(), records);
  {
    std::ofstream out(dir / "report.json", std::ios::binary | std::ios::trunc);
    out << report.dump(2) << '\n';
    if (!out) throw Error("cannot write " + (dir / "report.json").string());
  }
  std::filesystem::create_directories(dir / "scores");
  const auto groups = by_benchmark(records);
  std::vector<ScoreTable> parts;
  for (const auto& [b, recs] : groups) parts.push_back(score_methods(recs, opt));
  for (const auto& [m, s] : concatenate(parts)) {
    std::ofstream out(dir / "scores" / (std::string(baselines::to_string(m)) + ".csv"), std::ios::trunc);
    baselines::write_scores_csv(out, s);
  }
  for (Layout layout : {Layout::M1, Layout::M2, Layout::M3}) {
    std::ofstream out(dir / ("features_" + std::string(to_string(layout)) + ".csv"), std::ios::trunc);
    features::write_csv(out, layout, ids_of(records), feature_rows(records, layout), labels_of(records));
  }
}

// Backend stack: cache -> retry -> counter -> transport (mock or HTTP).
inline PipelineResult run_pipeline(const RunConfig& config, bool write = true) {
  using namespace orchestration;
  config.validate();
  const auto questions = ingest(config);
  if (questions.empty()) throw Error("no questions loaded");

  std::unique_ptr<Backend> transport;
  if (config.mock_fixture) {
    transport = std::make_unique<MockBackend>(MockBackend::from_fixture(*config.mock_fixture, questions));
  } else {
    if (config.chat_endpoint.url.empty()) {
      throw Error("no chat endpoint configured (set endpoints.chat.url or ENSCONF_CHAT_URL, or use --mock)");
    }
    transport = std::make_unique<HttpBackend>(config.chat_endpoint, config.embedding_endpoint);
  }
  CountingBackend counter(*transport);
  RetryingBackend retry(counter, config.team.retry);
  ingestion::TranscriptStore store(config.store_path());
  CachingBackend cache(retry, store);

  PipelineResult result;
  result.records = analyze_questions(config, questions, cache, store);

  TeamConfig inner_team = config.team;
  inner_team.concurrency = 1;
  StructureAnalyzer analyzer = [&](const EnsembleRecord& e) {
    return analyze_structure(e, inner_team, cache).features;
  };
  json run_info{{"config_hash", experiment_hash(config)},
                {"agents", config.team.K()},
                {"questions", questions.size()},
                {"mock", config.mock_fixture.has_value()}};
  result.report = evaluate_records(result.records, config.evaluation, analyzer, run_info);
  result.network_chat_calls = counter.chat_calls();
  result.network_embed_calls = counter.embed_calls();
  spdlog::info("network calls this run: {} chat, {} embeddings", result.network_chat_calls,
               result.network_embed_calls);
  if (write) write_outputs(config.output_dir, result.records, result.report, config.evaluation);
  return result;
}

}  // namespace ensconf::experiments
