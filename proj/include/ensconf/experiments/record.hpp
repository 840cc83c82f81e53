#pragma once

// One fully analyzed question: the ensemble, its structure and geometry
// features, the aggregator baseline output and per-stage call usage.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ensconf/baselines.hpp"
#include "ensconf/core/json.hpp"
#include "ensconf/features.hpp"
#include "ensconf/orchestration/agents.hpp"

namespace ensconf::experiments {

using orchestration::AggregatorOutput;
using orchestration::CallUsage;

struct StageUsage {
  CallUsage agents;
  CallUsage verbalized;
  CallUsage structure;
  CallUsage aggregate;
  int embedding_texts = 0;
};

inline void to_json(json& j, const StageUsage& u) {
  j = json{{"agents", u.agents},
           {"verbalized", u.verbalized},
           {"structure", u.structure},
           {"aggregate", u.aggregate},
           {"embedding_texts", u.embedding_texts}};
}
inline void from_json(const json& j, StageUsage& u) {
  u.agents = j.value("agents", CallUsage{});
  u.verbalized = j.value("verbalized", CallUsage{});
  u.structure = j.value("structure", CallUsage{});
  u.aggregate = j.value("aggregate", CallUsage{});
  u.embedding_texts = j.value("embedding_texts", 0);
}

struct AnalyzedRecord {
  EnsembleRecord ensemble;
  StructureFeatures structure;
  std::optional<GeometryFeatures> geometry;
  std::optional<AggregatorOutput> aggregate;
  StageUsage usage;
  // Generator's true correctness probability (synthetic corpora only).
  std::optional<double> bayes_probability;

  const std::string& id() const { return ensemble.question.id; }
  Benchmark benchmark() const { return ensemble.question.benchmark; }
  bool correct() const { return ensemble.correct; }
};

inline void to_json(json& j, const AnalyzedRecord& r) {
  j = json{{"ensemble", r.ensemble},
           {"structure", r.structure},
           {"geometry", r.geometry ? json(*r.geometry) : json(nullptr)},
           {"aggregate", r.aggregate ? json(*r.aggregate) : json(nullptr)},
           {"usage", r.usage},
           {"bayes_probability", r.bayes_probability ? json(*r.bayes_probability) : json(nullptr)}};
}

inline void from_json(const json& j, AnalyzedRecord& r) {
  r.ensemble = j.at("ensemble").get<EnsembleRecord>();
  r.structure = j.at("structure").get<StructureFeatures>();
  r.geometry.reset();
  if (j.contains("geometry") && !j.at("geometry").is_null()) {
    r.geometry = j.at("geometry").get<GeometryFeatures>();
  }
  r.aggregate.reset();
  if (j.contains("aggregate") && !j.at("aggregate").is_null()) {
    r.aggregate = j.at("aggregate").get<AggregatorOutput>();
  }
  r.usage = j.value("usage", StageUsage{});
  r.bayes_probability.reset();
  if (j.contains("bayes_probability") && !j.at("bayes_probability").is_null()) {
    r.bayes_probability = j.at("bayes_probability").get<double>();
  }
}

inline void write_records(const std::string& path, const std::vector<AnalyzedRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : records) out << json(r).dump() << '\n';
  if (!out) throw Error("write failed for " + path);
}

inline std::vector<AnalyzedRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open records file " + path);
  std::vector<AnalyzedRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<AnalyzedRecord>());
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// Verbalized confidences aligned with the agents.
inline std::vector<std::optional<double>> verbalized_of(const EnsembleRecord& r) {
  std::vector<std::optional<double>> v;
  v.reserve(r.transcripts.size());
  for (const auto& t : r.transcripts) v.push_back(t.verbalized_confidence);
  return v;
}

inline std::optional<double> mean_majority_verbalized(const AnalyzedRecord& r) {
  return baselines::score_verbalized(r.ensemble, verbalized_of(r.ensemble));
}

// Feature rows for a layout. For M3, records whose majority agents gave no
// verbalized confidence take the mean of the records that have one; the
// number imputed is returned through `imputed`.
inline std::vector<FeatureVector> feature_rows(const std::vector<AnalyzedRecord>& records,
                                               Layout layout, std::size_t* imputed = nullptr) {
  std::vector<std::optional<double>> verbal(records.size());
  double fill = 0.5;
  if (layout == Layout::M3) {
    double sum = 0.0;
    std::size_t have = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      verbal[i] = mean_majority_verbalized(records[i]);
      if (verbal[i]) {
        sum += *verbal[i];
        ++have;
      }
    }
    if (have > 0) fill = sum / static_cast<double>(have);
  }
  std::vector<FeatureVector> rows;
  rows.reserve(records.size());
  std::size_t filled = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    features::FeatureInputs in;
    in.vote_confidence = r.ensemble.vote_confidence;
    in.structure = r.structure;
    in.geometry = r.geometry;
    if (layout == Layout::M3) {
      if (!verbal[i]) ++filled;
      in.mean_verbalized = verbal[i].value_or(fill);
    }
    try {
      rows.push_back(features::assemble_features(in, layout));
    } catch (const Error& e) {
      throw Error("record " + r.id() + ": " + e.what());
    }
  }
  if (imputed) *imputed = filled;
  return rows;
}

inline std::vector<bool> labels_of(const std::vector<AnalyzedRecord>& records) {
  std::vector<bool> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.correct());
  return y;
}

inline std::vector<std::string> ids_of(const std::vector<AnalyzedRecord>& records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id());
  return ids;
}

}  // namespace ensconf::experiments
