#pragma once

// Baseline confidence scorers B1-B6 and the per-method score table shared
// with the learned methods M1-M3.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/geometry.hpp"
#include "ensconf/orchestration/agents.hpp"
#include "ensconf/util/error.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::baselines {

enum class Method { B1, B2, B3, B4, B5, B6, M1, M2, M3 };

inline constexpr std::array kAllMethods{Method::B1, Method::B2, Method::B3, Method::B4, Method::B5,
                                        Method::B6, Method::M1, Method::M2, Method::M3};

inline std::string_view to_string(Method m) {
  static constexpr std::array<std::string_view, 9> names{"B1", "B2", "B3", "B4", "B5",
                                                         "B6", "M1", "M2", "M3"};
  return names[static_cast<std::size_t>(m)];
}

inline std::string_view describe(Method m) {
  switch (m) {
    case Method::B1: return "vote count";
    case Method::B2: return "vote entropy";
    case Method::B3: return "verbalized confidence";
    case Method::B4: return "self-consistency entropy";
    case Method::B5: return "embedding centroid";
    case Method::B6: return "LLM aggregator";
    case Method::M1: return "structure features";
    case Method::M2: return "embedding geometry";
    case Method::M3: return "combined";
  }
  return "";
}

inline Method parse_method(std::string_view s) { return parse_enum(s, kAllMethods, "method"); }

enum class VoteVariant { count, entropy, self_consistency };

// Shannon entropy in bits of the empirical distribution over parsed answers.
inline double answer_entropy_bits(const EnsembleRecord& r) {
  std::map<std::string, int> counts;
  int total = 0;
  for (const auto& t : r.transcripts) {
    if (!t.answer) continue;
    ++counts[text::normalize_label(*t.answer)];
    ++total;
  }
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

// count: c_vote. entropy / self_consistency: 1 - H / log2|Y|.
inline double score_vote_based(const EnsembleRecord& r, VoteVariant variant) {
  if (variant == VoteVariant::count) return r.vote_confidence;
  if (r.question.choice_count < 2) {
    throw Error("score_vote_based: question " + r.question.id + " has fewer than 2 choices");
  }
  const double h = answer_entropy_bits(r);
  return std::clamp(1.0 - h / std::log2(static_cast<double>(r.question.choice_count)), 0.0, 1.0);
}

// Mean verbalized confidence of the majority agents, where `confidences` is
// aligned with the transcripts. Minority agents are ignored.
inline std::optional<double> score_verbalized(const EnsembleRecord& r,
                                              const std::vector<std::optional<double>>& confidences) {
  if (confidences.size() != r.transcripts.size()) {
    throw Error("score_verbalized: confidence count does not match agents");
  }
  const auto mask = majority_mask(r);
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k] && confidences[k]) {
      sum += *confidences[k];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// 1 - cosine distance between the majority centroid and the global centroid.
inline double score_embed_centroid(const EnsembleRecord& r, const geometry::EmbeddingSet& e) {
  return std::clamp(1.0 - geometry::compute_geometry(e, majority_mask(r)).majority_centrality, 0.0,
                    1.0);
}

struct AggregatorScore {
  double confidence = 0.5;
  bool correct = false;  // judged against the aggregator's own answer
  bool fallback = false;
};

inline AggregatorScore score_llm_aggregator(const EnsembleRecord& r,
                                            const orchestration::AggregatorOutput& a) {
  return {std::clamp(a.confidence, 0.0, 1.0), label_correctness(a.answer, r.question.gold),
          a.fallback};
}

// Per-record confidences for one method with that method's correctness labels
// and its extra-call ledger.
struct MethodScore {
  Method method = Method::B1;
  std::vector<std::string> ids;
  std::vector<double> confidence;
  std::vector<bool> correct;
  long extra_calls = 0;
  long extra_tokens = 0;
  std::size_t flagged = 0;   // fallback or imputed entries
  std::size_t excluded = 0;  // records without a score

  void add(std::string id, double c, bool ok) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw Error("method " + std::string(to_string(method)) + ": confidence " +
                  std::to_string(c) + " outside [0,1] for " + id);
    }
    ids.push_back(std::move(id));
    confidence.push_back(c);
    correct.push_back(ok);
  }
  std::size_t size() const { return ids.size(); }
};

inline void write_scores_csv(std::ostream& out, const MethodScore& s) {
  out << "id,confidence,correct\n";
  out.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.ids[i] << ',' << s.confidence[i] << ',' << (s.correct[i] ? 1 : 0) << '\n';
  }
}

}  // namespace ensconf::baselines
