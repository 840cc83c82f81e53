#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ensconf/util/error.hpp"

namespace ensconf {

enum class Benchmark { strategyqa, mmlu, truthfulqa, arc_challenge };
enum class AnswerFormat { yes_no, multiple_choice };
enum class Tier { unanimous, strong, weak };
enum class DivergenceDepth { early, middle, late, none };
enum class StructureSource { llm_analysis, unanimous_default, parse_fallback };
enum class Layout { M1, M2, M3 };

inline constexpr std::array kAllBenchmarks{Benchmark::strategyqa, Benchmark::mmlu,
                                           Benchmark::truthfulqa, Benchmark::arc_challenge};

inline std::string_view to_string(Benchmark b) {
  switch (b) {
    case Benchmark::strategyqa: return "strategyqa";
    case Benchmark::mmlu: return "mmlu";
    case Benchmark::truthfulqa: return "truthfulqa";
    case Benchmark::arc_challenge: return "arc_challenge";
  }
  return "?";
}

inline std::string_view to_string(AnswerFormat f) {
  return f == AnswerFormat::yes_no ? "yes_no" : "multiple_choice";
}

inline std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::unanimous: return "unanimous";
    case Tier::strong: return "strong";
    case Tier::weak: return "weak";
  }
  return "?";
}

inline std::string_view to_string(DivergenceDepth d) {
  switch (d) {
    case DivergenceDepth::early: return "early";
    case DivergenceDepth::middle: return "middle";
    case DivergenceDepth::late: return "late";
    case DivergenceDepth::none: return "none";
  }
  return "?";
}

inline std::string_view to_string(StructureSource s) {
  switch (s) {
    case StructureSource::llm_analysis: return "llm_analysis";
    case StructureSource::unanimous_default: return "unanimous_default";
    case StructureSource::parse_fallback: return "parse_fallback";
  }
  return "?";
}

inline std::string_view to_string(Layout l) {
  switch (l) {
    case Layout::M1: return "M1";
    case Layout::M2: return "M2";
    case Layout::M3: return "M3";
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

inline Benchmark parse_benchmark(std::string_view s) {
  return parse_enum(s, kAllBenchmarks, "benchmark");
}
inline AnswerFormat parse_answer_format(std::string_view s) {
  return parse_enum(s, std::array{AnswerFormat::yes_no, AnswerFormat::multiple_choice},
                    "answer format");
}
inline Tier parse_tier(std::string_view s) {
  return parse_enum(s, std::array{Tier::unanimous, Tier::strong, Tier::weak}, "tier");
}
inline DivergenceDepth parse_depth(std::string_view s) {
  return parse_enum(s,
                    std::array{DivergenceDepth::early, DivergenceDepth::middle,
                               DivergenceDepth::late, DivergenceDepth::none},
                    "divergence depth");
}
inline StructureSource parse_structure_source(std::string_view s) {
  return parse_enum(s,
                    std::array{StructureSource::llm_analysis, StructureSource::unanimous_default,
                               StructureSource::parse_fallback},
                    "structure source");
}
inline Layout parse_layout(std::string_view s) {
  return parse_enum(s, std::array{Layout::M1, Layout::M2, Layout::M3}, "layout");
}

// Answer label. Canonical forms are "yes"/"no" and upper-case option letters.
using Label = std::string;

struct QuestionRecord {
  std::string id;
  Benchmark benchmark = Benchmark::strategyqa;
  std::string text;
  AnswerFormat answer_format = AnswerFormat::yes_no;
  std::vector<std::string> choices;
  int choice_count = 2;
  Label gold;
  // Where the row came from (file, subject, split); informational only.
  std::string provenance;

  bool operator==(const QuestionRecord&) const = default;
};

struct AgentTranscript {
  int agent_index = 0;
  std::string role_name;
  std::string model_id;
  std::string reasoning;
  std::optional<Label> answer;  // nullopt: parse failure
  std::optional<double> verbalized_confidence;
  long prompt_tokens = 0;
  long completion_tokens = 0;

  bool operator==(const AgentTranscript&) const = default;
};

struct EnsembleRecord {
  QuestionRecord question;
  std::vector<AgentTranscript> transcripts;
  Label majority_answer;
  double vote_confidence = 0.0;
  bool tie = false;
  bool correct = false;
  Tier tier = Tier::weak;

  std::size_t agent_count() const { return transcripts.size(); }
  bool unanimous() const { return tier == Tier::unanimous; }

  bool operator==(const EnsembleRecord&) const = default;
};

struct StructureFeatures {
  double evidence_overlap = 1.0;
  double minority_new_info = 0.0;
  double minority_strength = 0.0;
  double majority_conf_language = 1.0;
  double reasoning_complexity = 0.0;
  DivergenceDepth divergence_depth = DivergenceDepth::none;
  StructureSource source = StructureSource::unanimous_default;

  static StructureFeatures unanimous_default() { return {}; }
  static StructureFeatures parse_fallback() {
    StructureFeatures s;
    s.source = StructureSource::parse_fallback;
    return s;
  }

  bool operator==(const StructureFeatures&) const = default;
};

struct GeometryFeatures {
  double overall_dispersion = 0.0;
  double majority_cohesion = 0.0;
  double cluster_distance = 0.0;
  double minority_outlier_degree = 0.0;
  double majority_centrality = 0.0;
  double minority_cohesion = 0.0;
  double pca_variance_ratio = 1.0;

  bool operator==(const GeometryFeatures&) const = default;
};

struct FeatureVector {
  Layout layout = Layout::M1;
  std::vector<double> values;
};

inline constexpr std::size_t layout_size(Layout l) {
  switch (l) {
    case Layout::M1: return 9;
    case Layout::M2: return 8;
    case Layout::M3: return 17;
  }
  return 0;
}

}  // namespace ensconf
