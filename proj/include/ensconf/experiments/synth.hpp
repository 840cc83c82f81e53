#pragma once

// Synthetic ensembles with a planted logistic correctness model over the M3
// feature layout. Features are drawn first; the label is then drawn from
// sigmoid(intercept + w.x) and the agents' answers are built to match it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ensconf/core/vote.hpp"
#include "ensconf/experiments/record.hpp"
#include "ensconf/models/logistic.hpp"
#include "ensconf/orchestration/parse.hpp"
#include "ensconf/util/rng.hpp"

namespace ensconf::experiments {

struct SyntheticSpec {
  std::size_t records = 1000;
  int agents = 5;
  double yes_no_fraction = 0.5;
  int choice_count = 4;  // multiple-choice questions
  // Planted weights keyed by M3 feature name; absent names weigh 0.
  std::map<std::string, double> weights;
  double intercept = 0.0;
  // Non-unanimous structure scores: overlap and confidence language are drawn
  // around structure_center, the other three around 1 - structure_center.
  double structure_center = 0.5;
  double structure_noise = 0.25;
  double geometry_noise = 0.08;
  double verbalized_noise = 0.1;
  // Relative frequency of each top-vote count, indexed by count (size K+1).
  std::vector<double> top_count_weights;
  std::vector<Benchmark> benchmarks{Benchmark::strategyqa};
  // Added to the structure-score centers of a benchmark's records.
  std::map<Benchmark, double> structure_shift;
  std::uint64_t seed = 42;

  void validate() const {
    if (records == 0) throw Error("synthetic spec: records must be positive");
    if (agents < 2) throw Error("synthetic spec: need at least 2 agents");
    if (choice_count < 2 || choice_count > 26) throw Error("synthetic spec: choice_count out of range");
    if (benchmarks.empty()) throw Error("synthetic spec: no benchmarks");
    if (!top_count_weights.empty() && top_count_weights.size() != static_cast<std::size_t>(agents) + 1) {
      throw Error("synthetic spec: top_count_weights needs K+1 entries");
    }
    const auto& names = features::feature_names(Layout::M3);
    for (const auto& [name, w] : weights) {
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw Error("synthetic spec: unknown feature '" + name + "'");
      }
      if (!std::isfinite(w)) throw Error("synthetic spec: non-finite weight for " + name);
    }
  }

  // Planted weights in M3 order.
  std::vector<double> weight_vector() const {
    std::vector<double> w;
    for (const auto& name : features::feature_names(Layout::M3)) {
      const auto it = weights.find(name);
      w.push_back(it == weights.end() ? 0.0 : it->second);
    }
    return w;
  }
};

inline void to_json(json& j, const SyntheticSpec& s) {
  json shift = json::object();
  for (const auto& [b, v] : s.structure_shift) shift[std::string(to_string(b))] = v;
  std::vector<std::string> bms;
  for (auto b : s.benchmarks) bms.emplace_back(to_string(b));
  j = json{{"records", s.records},
           {"agents", s.agents},
           {"yes_no_fraction", s.yes_no_fraction},
           {"choice_count", s.choice_count},
           {"weights", s.weights},
           {"intercept", s.intercept},
           {"structure_center", s.structure_center},
           {"structure_noise", s.structure_noise},
           {"geometry_noise", s.geometry_noise},
           {"verbalized_noise", s.verbalized_noise},
           {"top_count_weights", s.top_count_weights},
           {"benchmarks", bms},
           {"structure_shift", shift},
           {"seed", s.seed}};
}

inline void from_json(const json& j, SyntheticSpec& s) {
  s = SyntheticSpec{};
  s.records = j.value("records", s.records);
  s.agents = j.value("agents", s.agents);
  s.yes_no_fraction = j.value("yes_no_fraction", s.yes_no_fraction);
  s.choice_count = j.value("choice_count", s.choice_count);
  s.weights = j.value("weights", s.weights);
  s.intercept = j.value("intercept", s.intercept);
  s.structure_center = j.value("structure_center", s.structure_center);
  s.structure_noise = j.value("structure_noise", s.structure_noise);
  s.geometry_noise = j.value("geometry_noise", s.geometry_noise);
  s.verbalized_noise = j.value("verbalized_noise", s.verbalized_noise);
  s.top_count_weights = j.value("top_count_weights", s.top_count_weights);
  if (j.contains("benchmarks")) {
    s.benchmarks.clear();
    for (const auto& b : j.at("benchmarks")) s.benchmarks.push_back(parse_benchmark(b.get<std::string>()));
  }
  if (j.contains("structure_shift")) {
    for (const auto& [k, v] : j.at("structure_shift").items()) {
      s.structure_shift[parse_benchmark(k)] = v.get<double>();
    }
  }
  s.seed = j.value("seed", s.seed);
}

// Spec whose correctness depends on vote confidence and on the structure
// features, with geometry and verbalized confidence carrying no signal.
inline SyntheticSpec structure_signal_spec(std::uint64_t seed, std::size_t records = 2000) {
  SyntheticSpec s;
  s.records = records;
  s.seed = seed;
  s.weights = {{"c_vote", 1.5}, {"e_overlap", 2.0}, {"e_new", -4.0},   {"e_str", -4.0},
               {"e_conf", 1.0}, {"e_cplx", -2.0},   {"d_early", -1.5}, {"d_middle", 0.0},
               {"d_late", 1.5}};
  s.intercept = -1.0;
  s.structure_center = 0.7;
  s.structure_noise = 0.3;
  return s;
}

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline double round_to(double v, double step) { return std::round(v / step) * step; }

inline std::vector<Label> label_set(AnswerFormat format, int choice_count) {
  if (format == AnswerFormat::yes_no) return {"yes", "no"};
  std::vector<Label> out;
  for (int c = 0; c < choice_count; ++c) out.emplace_back(1, static_cast<char>('A' + c));
  return out;
}

inline std::size_t weighted_pick(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return w.size() - 1;
}

// Smallest top-vote count that leaves no tie or second majority.
inline int min_top_count(int k, int labels) {
  for (int top = 1; top <= k; ++top) {
    if ((labels - 1) * (top - 1) >= k - top) return top;
  }
  return k;
}

}  // namespace detail

inline std::vector<double> default_top_count_weights(int k) {
  // Half unanimous, the rest spread evenly over the non-unanimous counts.
  std::vector<double> w(static_cast<std::size_t>(k) + 1, 0.0);
  w[static_cast<std::size_t>(k)] = 0.5;
  const int lo = k / 2 + (k % 2 == 0 ? 0 : 1) - 1;
  const int hi = k - 1;
  for (int t = std::max(2, lo); t <= hi; ++t) w[static_cast<std::size_t>(t)] = 0.5 / (hi - std::max(2, lo) + 1);
  return w;
}

inline std::vector<AnalyzedRecord> synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  const int k = spec.agents;
  const std::vector<double> top_weights =
      spec.top_count_weights.empty() ? default_top_count_weights(k) : spec.top_count_weights;
  const std::vector<double> w = spec.weight_vector();
  std::vector<AnalyzedRecord> out;
  out.reserve(spec.records);
  for (std::size_t i = 0; i < spec.records; ++i) {
    Rng rng = Rng::substream(spec.seed, i);
    const Benchmark bm = spec.benchmarks[i % spec.benchmarks.size()];
    QuestionRecord q;
    q.benchmark = bm;
    q.id = "synth-" + std::string(to_string(bm)) + "-" + std::to_string(i);
    q.text = "Synthetic question " + std::to_string(i);
    q.answer_format = rng.bernoulli(spec.yes_no_fraction) ? AnswerFormat::yes_no
                                                          : AnswerFormat::multiple_choice;
    q.choice_count = q.answer_format == AnswerFormat::yes_no ? 2 : spec.choice_count;
    const auto labels = detail::label_set(q.answer_format, q.choice_count);
    if (q.answer_format == AnswerFormat::multiple_choice) {
      for (const auto& l : labels) q.choices.push_back("Option " + l);
    }
    q.gold = labels[rng.index(labels.size())];
    q.provenance = "synthetic seed " + std::to_string(spec.seed);

    // Vote shape.
    const int min_top = detail::min_top_count(k, q.choice_count);
    std::vector<double> allowed = top_weights;
    for (int t = 0; t < min_top; ++t) allowed[static_cast<std::size_t>(t)] = 0.0;
    if (std::all_of(allowed.begin(), allowed.end(), [](double v) { return v <= 0.0; })) {
      allowed[static_cast<std::size_t>(k)] = 1.0;
    }
    const int top = static_cast<int>(detail::weighted_pick(allowed, rng));
    const double c_vote = static_cast<double>(top) / k;
    const bool unanimous = top == k;
    const double u = 1.0 - c_vote;

    // Structure features.
    AnalyzedRecord rec;
    if (unanimous) {
      rec.structure = StructureFeatures::unanimous_default();
    } else {
      const auto sh = spec.structure_shift.find(bm);
      const double shift = sh == spec.structure_shift.end() ? 0.0 : sh->second;
      // Scores whose unanimous default is 1 center high, the others low.
      const double hi = spec.structure_center + shift;
      const double lo = 1.0 - spec.structure_center + shift;
      const double sd = spec.structure_noise;
      StructureFeatures s;
      s.source = StructureSource::llm_analysis;
      s.evidence_overlap = detail::clamp01(rng.normal(hi, sd));
      s.minority_new_info = detail::clamp01(rng.normal(lo, sd));
      s.minority_strength = detail::clamp01(rng.normal(lo, sd));
      s.majority_conf_language = detail::clamp01(rng.normal(hi, sd));
      s.reasoning_complexity = detail::clamp01(rng.normal(lo, sd));
      const DivergenceDepth depths[] = {DivergenceDepth::early, DivergenceDepth::middle,
                                        DivergenceDepth::late};
      s.divergence_depth = depths[rng.index(3)];
      rec.structure = s;
    }

    // Geometry features.
    const double g = spec.geometry_noise;
    GeometryFeatures geo;
    geo.overall_dispersion = detail::clamp01(rng.normal(0.15 + 0.35 * u, g));
    geo.majority_cohesion = top >= 2 ? detail::clamp01(rng.normal(0.12 + 0.1 * u, g)) : 0.0;
    geo.cluster_distance = unanimous ? 0.0 : detail::clamp01(rng.normal(0.1 + 0.3 * u, g));
    geo.minority_outlier_degree = unanimous ? 0.0 : detail::clamp01(rng.normal(0.15 + 0.3 * u, g));
    geo.majority_centrality = unanimous ? 0.0 : detail::clamp01(rng.normal(0.02 + 0.1 * u, g / 2));
    geo.minority_cohesion = k - top >= 2 ? detail::clamp01(rng.normal(0.15 + 0.2 * u, g)) : 0.0;
    geo.pca_variance_ratio = detail::clamp01(rng.normal(0.55 - 0.2 * u, g));
    rec.geometry = geo;

    // Agent positions and verbalized confidences (majority agents first in
    // the draw, then placed at random indices).
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) order[static_cast<std::size_t>(a)] = a;
    rng.shuffle(order);
    std::vector<bool> in_majority(static_cast<std::size_t>(k), false);
    for (int a = 0; a < top; ++a) in_majority[static_cast<std::size_t>(order[static_cast<std::size_t>(a)])] = true;
    std::vector<double> verbal(static_cast<std::size_t>(k));
    for (auto& v : verbal) {
      v = detail::round_to(detail::clamp01(rng.normal(0.7 + 0.2 * c_vote, spec.verbalized_noise)), 0.05);
    }
    double maj_verbal = 0.0;
    for (int a = 0; a < k; ++a) {
      if (in_majority[static_cast<std::size_t>(a)]) maj_verbal += verbal[static_cast<std::size_t>(a)];
    }
    maj_verbal /= top;

    // Label from the planted model.
    features::FeatureInputs in{c_vote, rec.structure, rec.geometry, maj_verbal};
    const auto x = features::assemble_features(in, Layout::M3).values;
    double z = spec.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
    const double p = models::sigmoid(z);
    const bool correct = rng.bernoulli(p);

    // Answers consistent with the label and the vote shape.
    std::vector<Label> wrong;
    for (const auto& l : labels) {
      if (l != q.gold) wrong.push_back(l);
    }
    const Label majority = correct ? q.gold : wrong[rng.index(wrong.size())];
    std::vector<Label> others;
    for (const auto& l : labels) {
      if (l != majority) others.push_back(l);
    }
    std::map<Label, int> other_counts;
    std::vector<AgentTranscript> transcripts(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) {
      auto& t = transcripts[static_cast<std::size_t>(a)];
      t.agent_index = a;
      t.role_name = "agent-" + std::to_string(a);
      t.model_id = "synthetic";
      Label ans = majority;
      if (!in_majority[static_cast<std::size_t>(a)]) {
        std::vector<Label> open;
        for (const auto& l : others) {
          if (other_counts[l] + 1 < top) open.push_back(l);
        }
        ans = open[rng.index(open.size())];
        ++other_counts[ans];
      }
      t.answer = ans;
      t.reasoning = "Synthetic reasoning. Answer: " + ans;
      t.verbalized_confidence = verbal[static_cast<std::size_t>(a)];
      t.prompt_tokens = 120;
      t.completion_tokens = 200;
    }
    rec.ensemble = make_ensemble(q, std::move(transcripts));
    if (rec.ensemble.majority_answer != majority || rec.ensemble.correct != correct) {
      throw Error("synth_generate: internal vote construction mismatch at record " + std::to_string(i));
    }

    AggregatorOutput agg;
    agg.answer = majority;
    agg.confidence = detail::round_to(detail::clamp01(rng.normal(0.55 + 0.4 * c_vote, 0.05)), 0.01);
    agg.raw = json{{"answer", agg.answer}, {"confidence", agg.confidence}}.dump();
    agg.usage = {1, 600, 20};
    rec.aggregate = agg;

    rec.usage.agents = {k, 120L * k, 200L * k};
    rec.usage.verbalized = {k, 330L * k, 5L * k};
    if (!unanimous) rec.usage.structure = {1, 900, 60};
    rec.usage.aggregate = agg.usage;
    rec.usage.embedding_texts = k;
    rec.bayes_probability = p;
    out.push_back(std::move(rec));
  }
  return out;
}

// Draws from a plain logistic model over d standard-normal features.
struct LogisticDraw {
  Eigen::MatrixXd x;
  std::vector<bool> y;
  Eigen::VectorXd probability;
};

inline LogisticDraw synth_logistic(std::size_t n, const Eigen::VectorXd& w, double intercept,
                                   std::uint64_t seed) {
  Rng rng(seed);
  LogisticDraw d;
  d.x.resize(static_cast<Eigen::Index>(n), w.size());
  d.probability.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = rng.normal();
    d.probability(i) = models::sigmoid(intercept + d.x.row(i).dot(w));
    d.y.push_back(rng.bernoulli(d.probability(i)));
  }
  return d;
}

}  // namespace ensconf::experiments
