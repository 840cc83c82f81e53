#pragma once

// Scoring of all nine methods on analyzed records, and the analyses built on
// them: tiers, weak-tier profiles, cross-benchmark transfer, ablations, cost.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ensconf/baselines.hpp"
#include "ensconf/experiments/record.hpp"
#include "ensconf/metrics.hpp"
#include "ensconf/models/cv.hpp"

namespace ensconf::experiments {

using baselines::Method;
using baselines::MethodScore;
using models::ModelKind;

struct EvaluationOptions {
  int folds = 5;
  std::uint64_t seed = 42;
  int bootstrap_resamples = 1000;
  std::size_t threads = 1;
  models::TrainOptions train;
  std::vector<Method> methods{baselines::kAllMethods.begin(), baselines::kAllMethods.end()};
  ModelKind m1_model = ModelKind::logistic;
  ModelKind m2_model = ModelKind::logistic;
  ModelKind m3_model = ModelKind::mlp;
  bool tiers = true;
  bool cross_benchmark = true;
  bool ablation = true;
  std::vector<int> agent_counts{3, 4, 5};
  std::size_t curve_points = 100;
};

inline void to_json(json& j, const EvaluationOptions& o) {
  std::vector<std::string> methods;
  for (auto m : o.methods) methods.emplace_back(baselines::to_string(m));
  j = json{{"folds", o.folds},
           {"seed", o.seed},
           {"bootstrap_resamples", o.bootstrap_resamples},
           {"methods", methods},
           {"m1_model", models::to_string(o.m1_model)},
           {"m2_model", models::to_string(o.m2_model)},
           {"m3_model", models::to_string(o.m3_model)},
           {"tiers", o.tiers},
           {"cross_benchmark", o.cross_benchmark},
           {"ablation", o.ablation},
           {"agent_counts", o.agent_counts},
           {"curve_points", o.curve_points},
           {"logistic_lambda", o.train.logistic.lambda},
           {"mlp",
            {{"hidden", o.train.mlp.hidden},
             {"dropout", o.train.mlp.dropout},
             {"learning_rate", o.train.mlp.learning_rate},
             {"weight_decay", o.train.mlp.weight_decay},
             {"batch_size", o.train.mlp.batch_size},
             {"max_epochs", o.train.mlp.max_epochs},
             {"patience", o.train.mlp.patience},
             {"validation_fraction", o.train.mlp.validation_fraction}}}};
}

inline void from_json(const json& j, EvaluationOptions& o) {
  o = EvaluationOptions{};
  o.folds = j.value("folds", o.folds);
  o.seed = j.value("seed", o.seed);
  o.bootstrap_resamples = j.value("bootstrap_resamples", o.bootstrap_resamples);
  o.threads = j.value("threads", o.threads);  // not serialized: results do not depend on it
  if (j.contains("methods")) {
    o.methods.clear();
    for (const auto& m : j.at("methods")) o.methods.push_back(baselines::parse_method(m.get<std::string>()));
  }
  if (j.contains("m1_model")) o.m1_model = models::parse_model_kind(j.at("m1_model").get<std::string>());
  if (j.contains("m2_model")) o.m2_model = models::parse_model_kind(j.at("m2_model").get<std::string>());
  if (j.contains("m3_model")) o.m3_model = models::parse_model_kind(j.at("m3_model").get<std::string>());
  o.tiers = j.value("tiers", o.tiers);
  o.cross_benchmark = j.value("cross_benchmark", o.cross_benchmark);
  o.ablation = j.value("ablation", o.ablation);
  o.agent_counts = j.value("agent_counts", o.agent_counts);
  o.curve_points = j.value("curve_points", o.curve_points);
  o.train.logistic.lambda = j.value("logistic_lambda", o.train.logistic.lambda);
  if (j.contains("mlp")) {
    const json& m = j.at("mlp");
    auto& h = o.train.mlp;
    h.hidden = m.value("hidden", h.hidden);
    h.dropout = m.value("dropout", h.dropout);
    h.learning_rate = m.value("learning_rate", h.learning_rate);
    h.weight_decay = m.value("weight_decay", h.weight_decay);
    h.batch_size = m.value("batch_size", h.batch_size);
    h.max_epochs = m.value("max_epochs", h.max_epochs);
    h.patience = m.value("patience", h.patience);
    h.validation_fraction = m.value("validation_fraction", h.validation_fraction);
  }
}

inline Layout layout_of(Method m) {
  switch (m) {
    case Method::M1: return Layout::M1;
    case Method::M2: return Layout::M2;
    case Method::M3: return Layout::M3;
    default: throw Error("method " + std::string(baselines::to_string(m)) + " has no feature layout");
  }
}

inline bool is_learned(Method m) { return m == Method::M1 || m == Method::M2 || m == Method::M3; }

inline ModelKind model_of(Method m, const EvaluationOptions& o) {
  return m == Method::M1 ? o.m1_model : m == Method::M2 ? o.m2_model : o.m3_model;
}

// Extra LLM calls and tokens attributable to a method.
inline CallUsage method_usage(Method m, const AnalyzedRecord& r) {
  CallUsage u;
  switch (m) {
    case Method::B3: u = r.usage.verbalized; break;
    case Method::B6: u = r.usage.aggregate; break;
    case Method::M1: u = r.usage.structure; break;
    case Method::M3:
      u = r.usage.verbalized;
      u += r.usage.structure;
      break;
    default: break;
  }
  return u;
}

// Scores for a non-learned method; records without a usable score are
// excluded and counted.
inline MethodScore score_baseline(const std::vector<AnalyzedRecord>& records, Method m) {
  MethodScore s;
  s.method = m;
  for (const auto& r : records) {
    const auto u = method_usage(m, r);
    s.extra_calls += u.calls;
    s.extra_tokens += u.tokens();
    switch (m) {
      case Method::B1:
        s.add(r.id(), baselines::score_vote_based(r.ensemble, baselines::VoteVariant::count), r.correct());
        break;
      case Method::B2:
        s.add(r.id(), baselines::score_vote_based(r.ensemble, baselines::VoteVariant::entropy), r.correct());
        break;
      case Method::B4:
        s.add(r.id(), baselines::score_vote_based(r.ensemble, baselines::VoteVariant::self_consistency),
              r.correct());
        break;
      case Method::B3: {
        const auto v = mean_majority_verbalized(r);
        if (v) {
          s.add(r.id(), *v, r.correct());
        } else {
          ++s.excluded;
        }
        break;
      }
      case Method::B5:
        if (r.geometry) {
          s.add(r.id(), std::clamp(1.0 - r.geometry->majority_centrality, 0.0, 1.0), r.correct());
        } else {
          ++s.excluded;
        }
        break;
      case Method::B6:
        if (r.aggregate) {
          const auto a = baselines::score_llm_aggregator(r.ensemble, *r.aggregate);
          s.add(r.id(), a.confidence, a.correct);
          if (a.fallback) ++s.flagged;
        } else {
          ++s.excluded;
        }
        break;
      default: throw Error("score_baseline: method is learned");
    }
  }
  if (s.excluded > 0) {
    spdlog::warn("{}: {} record(s) without a score were excluded", baselines::to_string(m), s.excluded);
  }
  return s;
}

// Out-of-fold confidences for a learned method over the given records.
inline MethodScore score_learned(const std::vector<AnalyzedRecord>& records, Method m,
                                 const EvaluationOptions& opt) {
  MethodScore s;
  s.method = m;
  std::vector<AnalyzedRecord> usable;
  for (const auto& r : records) {
    if (m != Method::M1 && !r.geometry) {
      ++s.excluded;
      continue;
    }
    usable.push_back(r);
  }
  std::size_t imputed = 0;
  const auto rows = feature_rows(usable, layout_of(m), &imputed);
  s.flagged = imputed;
  const auto labels = labels_of(usable);
  const auto cv = models::cross_validate(rows, labels, model_of(m, opt), opt.train, opt.folds, opt.seed,
                                         opt.threads);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    s.add(usable[i].id(), cv.oof(static_cast<Eigen::Index>(i)), labels[i]);
  }
  for (const auto& r : records) {
    const auto u = method_usage(m, r);
    s.extra_calls += u.calls;
    s.extra_tokens += u.tokens();
  }
  return s;
}

using ScoreTable = std::map<Method, MethodScore>;

inline ScoreTable score_methods(const std::vector<AnalyzedRecord>& records, const EvaluationOptions& opt) {
  ScoreTable t;
  for (auto m : opt.methods) {
    t[m] = is_learned(m) ? score_learned(records, m, opt) : score_baseline(records, m);
  }
  return t;
}

inline ScoreTable concatenate(const std::vector<ScoreTable>& parts) {
  ScoreTable out;
  for (const auto& part : parts) {
    for (const auto& [m, s] : part) {
      auto& dst = out[m];
      dst.method = m;
      dst.ids.insert(dst.ids.end(), s.ids.begin(), s.ids.end());
      dst.confidence.insert(dst.confidence.end(), s.confidence.begin(), s.confidence.end());
      dst.correct.insert(dst.correct.end(), s.correct.begin(), s.correct.end());
      dst.extra_calls += s.extra_calls;
      dst.extra_tokens += s.extra_tokens;
      dst.flagged += s.flagged;
      dst.excluded += s.excluded;
    }
  }
  return out;
}

inline std::map<Benchmark, std::vector<AnalyzedRecord>> by_benchmark(
    const std::vector<AnalyzedRecord>& records) {
  std::map<Benchmark, std::vector<AnalyzedRecord>> out;
  for (const auto& r : records) out[r.benchmark()].push_back(r);
  return out;
}

// ---------------------------------------------------------------- tiers

struct TierAuroc {
  std::size_t n = 0;
  double auroc = 0.5;
  bool degenerate = false;  // one class absent or all confidences equal
};

inline TierAuroc tier_auroc(const std::vector<double>& c, const std::vector<bool>& y) {
  TierAuroc t;
  t.n = c.size();
  const auto a = metrics::auroc_value(c, y);
  t.auroc = a.value;
  const bool constant =
      !c.empty() && std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
  t.degenerate = a.degenerate || constant;
  if (constant) t.auroc = 0.5;
  return t;
}

// Per-tier AUROC for each method, restricted to the records of that tier.
inline json tier_table(const std::vector<AnalyzedRecord>& records, const ScoreTable& scores,
                       std::vector<std::string>& notes, const std::string& scope) {
  std::map<std::string, Tier> tier_by_id;
  for (const auto& r : records) tier_by_id[r.id()] = r.ensemble.tier;
  json out = json::object();
  for (Tier t : {Tier::unanimous, Tier::strong, Tier::weak}) {
    std::size_t n = 0;
    double correct = 0.0;
    for (const auto& r : records) {
      if (r.ensemble.tier == t) {
        ++n;
        correct += r.correct() ? 1.0 : 0.0;
      }
    }
    if (n == 0) {
      notes.push_back(scope + ": tier " + std::string(to_string(t)) + " is empty and omitted");
      continue;
    }
    json tier{{"n", n}, {"accuracy", correct / static_cast<double>(n)}, {"methods", json::object()}};
    for (const auto& [m, s] : scores) {
      std::vector<double> c;
      std::vector<bool> y;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto it = tier_by_id.find(s.ids[i]);
        if (it != tier_by_id.end() && it->second == t) {
          c.push_back(s.confidence[i]);
          y.push_back(s.correct[i]);
        }
      }
      if (c.empty()) continue;
      const auto ta = tier_auroc(c, y);
      tier["methods"][std::string(baselines::to_string(m))] = {
          {"n", ta.n}, {"auroc", ta.auroc}, {"degenerate", ta.degenerate}};
    }
    out[std::string(to_string(t))] = tier;
  }
  return out;
}

inline std::string overlap_bin(double overlap) {
  if (overlap <= 1.0 / 3.0) return "low";
  if (overlap <= 2.0 / 3.0) return "medium";
  return "high";
}

// Weak-tier records binned by evidence overlap and divergence depth.
// Records without a divergence depth (analysis fallback) are left out.
inline json weak_tier_profile(const std::vector<AnalyzedRecord>& records) {
  struct Cell {
    std::size_t n = 0;
    std::size_t correct = 0;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    if (r.ensemble.tier != Tier::weak) continue;
    if (r.structure.divergence_depth == DivergenceDepth::none) {
      ++skipped;
      continue;
    }
    auto& c = cells[{overlap_bin(r.structure.evidence_overlap),
                     std::string(to_string(r.structure.divergence_depth))}];
    ++c.n;
    c.correct += r.correct() ? 1 : 0;
  }
  json bins = json::array();
  for (const char* o : {"low", "medium", "high"}) {
    for (const char* d : {"early", "middle", "late"}) {
      const auto it = cells.find({o, d});
      const Cell c = it == cells.end() ? Cell{} : it->second;
      bins.push_back({{"overlap", o},
                      {"depth", d},
                      {"n", c.n},
                      {"accuracy", c.n ? json(static_cast<double>(c.correct) / static_cast<double>(c.n))
                                       : json(nullptr)}});
    }
  }
  return json{{"bins", bins}, {"excluded_without_depth", skipped}};
}

// ------------------------------------------------------- cross-benchmark

struct CrossBenchmarkRow {
  Benchmark held_out = Benchmark::strategyqa;
  std::size_t n = 0;
  double cross_auroc = 0.5;
  double same_auroc = 0.5;
  double delta() const { return cross_auroc - same_auroc; }
};

// Leave-one-benchmark-out: one Standardizer and model fit on the pooled other
// benchmarks, tested on the held-out one; compared with its within-benchmark CV.
inline std::vector<CrossBenchmarkRow> cross_benchmark(
    const std::map<Benchmark, std::vector<AnalyzedRecord>>& groups, Layout layout, ModelKind kind,
    const EvaluationOptions& opt) {
  if (groups.size() < 2) throw Error("cross_benchmark: needs at least 2 benchmarks");
  std::vector<CrossBenchmarkRow> out;
  for (const auto& [held, test] : groups) {
    std::vector<AnalyzedRecord> train;
    for (const auto& [b, recs] : groups) {
      if (b != held) train.insert(train.end(), recs.begin(), recs.end());
    }
    const auto y_train = labels_of(train);
    const auto pos = std::count(y_train.begin(), y_train.end(), true);
    if (pos == 0 || pos == static_cast<long>(y_train.size())) {
      throw Error("cross_benchmark: training pool without " + std::string(to_string(held)) +
                  " lacks a class");
    }
    models::TrainOptions train_opt = opt.train;
    train_opt.mlp.seed = opt.seed;
    const auto clf = models::fit_classifier(features::to_matrix(feature_rows(train, layout)),
                                            models::to_vector(y_train), kind, train_opt);
    const auto y_test = labels_of(test);
    const Eigen::VectorXd p = clf.predict(features::to_matrix(feature_rows(test, layout)));
    const auto same = models::cross_validate(feature_rows(test, layout), y_test, kind, opt.train,
                                             opt.folds, opt.seed, opt.threads);
    CrossBenchmarkRow row;
    row.held_out = held;
    row.n = test.size();
    row.cross_auroc = metrics::auroc_value(metrics::as_scores(p), y_test).value;
    row.same_auroc = metrics::auroc_value(metrics::as_scores(same.oof), y_test).value;
    out.push_back(row);
  }
  return out;
}

inline json to_json_rows(const std::vector<CrossBenchmarkRow>& rows) {
  json out = json::array();
  double cross = 0.0;
  double same = 0.0;
  for (const auto& r : rows) {
    out.push_back({{"held_out", to_string(r.held_out)},
                   {"n", r.n},
                   {"cross_auroc", r.cross_auroc},
                   {"same_auroc", r.same_auroc},
                   {"delta", r.delta()}});
    cross += r.cross_auroc;
    same += r.same_auroc;
  }
  const double k = static_cast<double>(rows.size());
  return json{{"rows", out},
              {"average", {{"cross_auroc", cross / k}, {"same_auroc", same / k}, {"delta", (cross - same) / k}}}};
}

// ------------------------------------------------------------- ablation

// Re-analysis of a reduced ensemble's disagreement (non-unanimous records only).
using StructureAnalyzer = std::function<StructureFeatures(const EnsembleRecord&)>;

inline double cv_auroc(const Eigen::MatrixXd& x, const std::vector<bool>& y, ModelKind kind,
                       const EvaluationOptions& opt) {
  const auto cv = models::cross_validate(x, y, kind, opt.train, opt.folds, opt.seed, opt.threads);
  return metrics::auroc_value(metrics::as_scores(cv.oof), y).value;
}

inline Eigen::MatrixXd drop_column(const Eigen::MatrixXd& x, Eigen::Index col) {
  Eigen::MatrixXd out(x.rows(), x.cols() - 1);
  out.leftCols(col) = x.leftCols(col);
  out.rightCols(x.cols() - col - 1) = x.rightCols(x.cols() - col - 1);
  return out;
}

// AUROC after removing one named feature from a layout (logistic, CV).
inline double drop_feature_auroc(const std::vector<AnalyzedRecord>& records, Layout layout,
                                 const std::string& feature, const EvaluationOptions& opt) {
  const auto col = static_cast<Eigen::Index>(features::feature_index(layout, feature));
  const Eigen::MatrixXd x = features::to_matrix(feature_rows(records, layout));
  return cv_auroc(drop_column(x, col), labels_of(records), ModelKind::logistic, opt);
}

// The first n agents by index, with the vote recomputed.
inline std::optional<EnsembleRecord> agent_subset(const EnsembleRecord& r, std::size_t n) {
  if (n > r.transcripts.size()) throw Error("agent_subset: fewer agents than requested");
  std::vector<AgentTranscript> t(r.transcripts.begin(), r.transcripts.begin() + static_cast<long>(n));
  try {
    return make_ensemble(r.question, std::move(t));
  } catch (const AbstainError&) {
    return std::nullopt;
  }
}

inline json ablate(const std::vector<AnalyzedRecord>& records, const EvaluationOptions& opt,
                   const StructureAnalyzer& analyzer, std::vector<std::string>& notes,
                   const std::string& scope) {
  json out;
  const auto y = labels_of(records);
  for (Layout layout : {Layout::M1, Layout::M2}) {
    if (layout == Layout::M2 &&
        std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.geometry; })) {
      notes.push_back(scope + ": geometry missing, M2 ablation skipped");
      continue;
    }
    const Eigen::MatrixXd x = features::to_matrix(feature_rows(records, layout));
    const double full = cv_auroc(x, y, ModelKind::logistic, opt);
    json drops = json::array();
    const auto& names = features::feature_names(layout);
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double a = cv_auroc(drop_column(x, static_cast<Eigen::Index>(j)), y, ModelKind::logistic, opt);
      drops.push_back({{"feature", names[j]}, {"auroc", a}, {"delta", a - full}});
    }
    const double vote_only = cv_auroc(x.leftCols(1), y, ModelKind::logistic, opt);
    out[std::string(to_string(layout))] = {{"full", full},
                                           {"drop_one", drops},
                                           {"vote_only", {{"auroc", vote_only}, {"delta", vote_only - full}}}};
  }

  json counts = json::array();
  const std::size_t k = records.empty() ? 0 : records.front().ensemble.agent_count();
  for (int n : opt.agent_counts) {
    if (n < 2 || static_cast<std::size_t>(n) > k) {
      notes.push_back(scope + ": agent count " + std::to_string(n) + " outside 2.." + std::to_string(k));
      continue;
    }
    if (static_cast<std::size_t>(n) < k && !analyzer) {
      notes.push_back(scope + ": agent count " + std::to_string(n) +
                      " needs re-analysis of reduced ensembles; no analyzer available");
      continue;
    }
    std::vector<AnalyzedRecord> subset;
    std::size_t abstained = 0;
    for (const auto& r : records) {
      if (static_cast<std::size_t>(n) == r.ensemble.agent_count()) {
        subset.push_back(r);
        continue;
      }
      auto e = agent_subset(r.ensemble, static_cast<std::size_t>(n));
      if (!e) {
        ++abstained;
        continue;
      }
      AnalyzedRecord a = r;
      a.ensemble = *e;
      a.structure = e->unanimous() ? StructureFeatures::unanimous_default() : analyzer(*e);
      subset.push_back(std::move(a));
    }
    const auto ys = labels_of(subset);
    std::vector<double> cv;
    for (const auto& r : subset) cv.push_back(r.ensemble.vote_confidence);
    json row{{"agents", n}, {"n", subset.size()}, {"abstained", abstained}};
    row["b1_auroc"] = metrics::auroc_value(cv, ys).value;
    try {
      row["m1_auroc"] = cv_auroc(features::to_matrix(feature_rows(subset, Layout::M1)), ys,
                                 ModelKind::logistic, opt);
    } catch (const Error& e) {
      row["m1_auroc"] = nullptr;
      notes.push_back(scope + ": agent count " + std::to_string(n) + ": " + e.what());
    }
    counts.push_back(row);
  }
  out["agent_count"] = {{"rows", counts}, {"subset_rule", "first n agents by index"}};
  return out;
}

// ----------------------------------------------------------------- cost

struct CostRow {
  Method method = Method::B1;
  long extra_calls = 0;
  long extra_tokens = 0;
  std::size_t questions = 0;
  std::optional<double> auroc;

  double tokens_per_question() const {
    return questions ? static_cast<double>(extra_tokens) / static_cast<double>(questions) : 0.0;
  }
  double tokens_per_call() const {
    return extra_calls ? static_cast<double>(extra_tokens) / static_cast<double>(extra_calls) : 0.0;
  }
};

inline std::vector<CostRow> cost_report(const std::vector<AnalyzedRecord>& records,
                                        const std::vector<Method>& methods,
                                        const std::map<Method, double>& auroc = {}) {
  std::vector<CostRow> out;
  for (auto m : methods) {
    CostRow row;
    row.method = m;
    row.questions = records.size();
    for (const auto& r : records) {
      const auto u = method_usage(m, r);
      row.extra_calls += u.calls;
      row.extra_tokens += u.tokens();
    }
    if (const auto it = auroc.find(m); it != auroc.end()) row.auroc = it->second;
    out.push_back(row);
  }
  return out;
}

inline json to_json_cost(const std::vector<AnalyzedRecord>& records, const std::vector<CostRow>& rows) {
  CallUsage base;
  long embed = 0;
  for (const auto& r : records) {
    base += r.usage.agents;
    embed += r.usage.embedding_texts;
  }
  json methods = json::object();
  for (const auto& r : rows) {
    methods[std::string(baselines::to_string(r.method))] = {
        {"extra_calls", r.extra_calls},
        {"extra_tokens", r.extra_tokens},
        {"tokens_per_question", r.tokens_per_question()},
        {"tokens_per_call", r.tokens_per_call()},
        {"auroc", r.auroc ? json(*r.auroc) : json(nullptr)}};
  }
  return json{{"questions", records.size()},
              {"agent_calls", base.calls},
              {"agent_tokens", base.tokens()},
              {"embedding_texts", embed},
              {"methods", methods}};
}

// ---------------------------------------------------------------- report

inline constexpr const char* kReportSchemaVersion = "1.0";

inline json method_catalog(const std::vector<Method>& methods) {
  json out = json::array();
  for (auto m : methods) {
    out.push_back({{"id", baselines::to_string(m)},
                   {"name", baselines::describe(m)},
                   {"correctness", m == Method::B6 ? "aggregator_answer" : "majority_answer"},
                   {"learned", is_learned(m)}});
  }
  return out;
}

struct ScopeResult {
  std::string scope;
  std::vector<AnalyzedRecord> records;
  ScoreTable scores;
};

inline json metrics_block(const ScoreTable& scores, const EvaluationOptions& opt) {
  json out = json::object();
  for (const auto& [m, s] : scores) {
    metrics::EvaluateOptions eo{opt.bootstrap_resamples, opt.seed, opt.threads};
    auto rep = metrics::evaluate(s.confidence, s.correct, eo);
    json j = rep;
    j["excluded"] = s.excluded;
    j["flagged"] = s.flagged;
    out[std::string(baselines::to_string(m))] = j;
  }
  return out;
}

inline json comparisons_block(const ScoreTable& scores, const EvaluationOptions& opt) {
  json out = json::object();
  const auto b1 = scores.find(Method::B1);
  if (b1 == scores.end()) return out;
  const auto& y = b1->second.correct;
  if (std::count(y.begin(), y.end(), true) == 0 || std::count(y.begin(), y.end(), false) == 0) return out;
  for (auto m : {Method::M1, Method::M2, Method::M3}) {
    const auto it = scores.find(m);
    if (it == scores.end() || it->second.ids != b1->second.ids) continue;
    const auto c = metrics::paired_bootstrap(it->second.confidence, b1->second.confidence, y,
                                             opt.bootstrap_resamples, opt.seed, opt.threads);
    out[std::string(baselines::to_string(m)) + "_vs_B1"] = c;
  }
  return out;
}

inline json curves_block(const ScoreTable& scores, std::size_t points) {
  json out = json::object();
  for (const auto& [m, s] : scores) {
    if (s.size() == 0) continue;
    json pts = json::array();
    for (const auto& [x, a] : metrics::accuracy_coverage_curve(s.confidence, s.correct, points)) {
      pts.push_back(json::array({x, a}));
    }
    out[std::string(baselines::to_string(m))] = pts;
  }
  return out;
}

inline json calibration_block(const ScoreTable& scores) {
  json out = json::object();
  for (const auto& [m, s] : scores) {
    json bins = json::array();
    for (const auto& b : metrics::calibration_bins(s.confidence, s.correct)) {
      bins.push_back({{"lower", b.lower},
                      {"upper", b.upper},
                      {"count", b.count},
                      {"accuracy", b.count ? json(b.accuracy) : json(nullptr)},
                      {"mean_confidence", b.count ? json(b.mean_confidence) : json(nullptr)}});
    }
    out[std::string(baselines::to_string(m))] = bins;
  }
  return out;
}

// Logistic coefficients on standardized features, fit on all records.
inline json feature_importance(const std::vector<AnalyzedRecord>& records, const EvaluationOptions& opt) {
  json out = json::object();
  const auto y = labels_of(records);
  for (Layout layout : {Layout::M1, Layout::M2}) {
    if (layout == Layout::M2 &&
        std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.geometry; })) {
      continue;
    }
    const auto clf = models::fit_classifier(features::to_matrix(feature_rows(records, layout)),
                                            models::to_vector(y), ModelKind::logistic, opt.train);
    json w = json::array();
    const auto& names = features::feature_names(layout);
    for (std::size_t j = 0; j < names.size(); ++j) {
      w.push_back({{"feature", names[j]}, {"weight", clf.logistic.weights(static_cast<Eigen::Index>(j))}});
    }
    out[std::string(to_string(layout))] = {{"intercept", clf.logistic.intercept}, {"weights", w}};
  }
  return out;
}

// Full report over analyzed records: learned methods are cross-validated
// within each benchmark and the pooled scope concatenates their out-of-fold
// confidences.
inline json evaluate_records(const std::vector<AnalyzedRecord>& records, const EvaluationOptions& opt,
                             const StructureAnalyzer& analyzer = {}, const json& run_info = json::object()) {
  if (records.empty()) throw Error("evaluate_records: no records");
  std::vector<std::string> notes;
  const auto groups = by_benchmark(records);

  std::vector<ScopeResult> scopes;
  std::vector<ScoreTable> parts;
  for (const auto& [b, recs] : groups) {
    spdlog::info("scoring {} ({} records)", to_string(b), recs.size());
    ScopeResult s{std::string(to_string(b)), recs, {}};
    try {
      s.scores = score_methods(recs, opt);
    } catch (const Error& e) {
      throw Error("benchmark " + s.scope + ": " + e.what());
    }
    parts.push_back(s.scores);
    scopes.push_back(std::move(s));
  }
  ScopeResult pooled{"pooled", {}, concatenate(parts)};
  for (const auto& s : scopes) pooled.records.insert(pooled.records.end(), s.records.begin(), s.records.end());
  scopes.push_back(pooled);

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["run"] = run_info;
  report["evaluation"] = opt;
  json bms = json::array();
  for (const auto& [b, recs] : groups) bms.push_back(to_string(b));
  report["benchmarks"] = bms;
  report["methods"] = method_catalog(opt.methods);

  json metrics_j = json::object();
  json comparisons = json::object();
  json curves = json::object();
  json calibration = json::object();
  json tiers = json::object();
  json profiles = json::object();
  for (const auto& s : scopes) {
    metrics_j[s.scope] = metrics_block(s.scores, opt);
    comparisons[s.scope] = comparisons_block(s.scores, opt);
    curves[s.scope] = curves_block(s.scores, opt.curve_points);
    calibration[s.scope] = calibration_block(s.scores);
    if (opt.tiers) {
      tiers[s.scope] = tier_table(s.records, s.scores, notes, s.scope);
      profiles[s.scope] = weak_tier_profile(s.records);
    }
  }
  report["metrics"] = metrics_j;
  report["comparisons"] = comparisons;
  report["curves"] = curves;
  report["calibration"] = calibration;
  if (opt.tiers) {
    report["tiers"] = tiers;
    report["profiles"] = profiles;
  }
  report["feature_importance"] = feature_importance(pooled.records, opt);

  if (opt.cross_benchmark) {
    if (groups.size() >= 2) {
      json cb = json::object();
      cb["M1"] = to_json_rows(cross_benchmark(groups, Layout::M1, opt.m1_model, opt));
      const bool have_geometry = std::all_of(records.begin(), records.end(),
                                             [](const auto& r) { return r.geometry.has_value(); });
      if (have_geometry) cb["M3"] = to_json_rows(cross_benchmark(groups, Layout::M3, opt.m3_model, opt));
      report["cross_benchmark"] = cb;
    } else {
      notes.emplace_back("cross-benchmark analysis needs at least 2 benchmarks; skipped");
    }
  }
  if (opt.ablation) {
    json ab = json::object();
    for (const auto& s : scopes) ab[s.scope] = ablate(s.records, opt, analyzer, notes, s.scope);
    report["ablation"] = ab;
  }

  std::map<Method, double> pooled_auroc;
  for (const auto& [m, s] : pooled.scores) pooled_auroc[m] = metrics::auroc_value(s.confidence, s.correct).value;
  report["cost"] = to_json_cost(pooled.records, cost_report(pooled.records, opt.methods, pooled_auroc));
  report["notes"] = notes;
  return report;
}

}  // namespace ensconf::experiments
