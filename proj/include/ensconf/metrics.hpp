#pragma once

// Discrimination, calibration and selective-prediction metrics, and the
// paired bootstrap comparison of two scorers on the same records.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/util/error.hpp"
#include "ensconf/util/parallel.hpp"
#include "ensconf/util/rng.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::metrics {

using Scores = std::span<const double>;
using Labels = std::vector<bool>;

inline Scores as_scores(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

namespace detail {

inline void check_lengths(Scores c, std::size_t n_labels, const char* what) {
  if (c.size() != n_labels) {
    throw Error(std::string(what) + ": " + std::to_string(c.size()) + " confidences but " +
                std::to_string(n_labels) + " labels");
  }
}

// Indices sorted by descending confidence, ties kept in record order.
inline std::vector<std::size_t> descending_order(Scores c) {
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  return idx;
}

// AUROC over a multiset of indices (used by the bootstrap); nullopt when one
// class is absent.
inline std::optional<double> auroc_indexed(Scores c, const std::vector<bool>& y,
                                           const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> idx = rows;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c[a] < c[b]; });
  double rank_sum = 0.0;
  double pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && c[idx[j + 1]] == c[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (y[idx[t]]) {
        rank_sum += midrank;
        pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double neg = static_cast<double>(idx.size()) - pos;
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// Linear interpolation between order statistics, q in [0,1].
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Record indices drawn with replacement; resamples with a single class are
// redrawn from the same stream.
inline std::vector<std::size_t> two_class_resample(const std::vector<bool>& y, Rng& rng) {
  std::vector<std::size_t> rows(y.size());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    bool any_pos = false;
    bool any_neg = false;
    for (auto& r : rows) {
      r = rng.index(y.size());
      (y[r] ? any_pos : any_neg) = true;
    }
    if (any_pos && any_neg) return rows;
  }
  throw Error("bootstrap: could not draw a resample containing both classes");
}

}  // namespace detail

struct AurocResult {
  double value = 0.5;
  bool degenerate = false;  // one class absent; value reported as 0.5
  std::optional<std::pair<double, double>> ci;
};

// Mann-Whitney AUROC with midranks for tied confidences.
inline AurocResult auroc_value(Scores c, const Labels& labels) {
  detail::check_lengths(c, labels.size(), "auroc");
  const Labels& y = labels;
  std::vector<std::size_t> rows(c.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto v = detail::auroc_indexed(c, y, rows);
  if (!v) return {0.5, true, std::nullopt};
  return {*v, false, std::nullopt};
}

// AUROC with a percentile bootstrap 95% interval. Each resample draws from its
// own seeded substream, so results do not depend on the thread count.
inline AurocResult auroc(Scores c, const Labels& labels, int resamples = 1000, std::uint64_t seed = 42,
                         std::size_t threads = 1) {
  AurocResult r = auroc_value(c, labels);
  if (r.degenerate || resamples <= 0) return r;
  const Labels& y = labels;
  const auto draws =
      parallel_map<double>(static_cast<std::size_t>(resamples), threads, [&](std::size_t b) {
        Rng rng = Rng::substream(seed, b);
        return *detail::auroc_indexed(c, y, detail::two_class_resample(y, rng));
      });
  r.ci = std::make_pair(detail::percentile(draws, 0.025), detail::percentile(draws, 0.975));
  return r;
}

// Index of the right-closed equal-width bin holding c; 0 goes to the first bin.
inline std::size_t ece_bin(double c, std::size_t bins) {
  for (std::size_t b = 0; b + 1 < bins; ++b) {
    if (c <= static_cast<double>(b + 1) / static_cast<double>(bins)) return b;
  }
  return bins - 1;
}

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_confidence = 0.0;
};

inline std::vector<CalibrationBin> calibration_bins(Scores c, const Labels& labels, std::size_t bins = 10) {
  detail::check_lengths(c, labels.size(), "ece");
  if (bins == 0) throw Error("ece: bin count must be positive");
  std::vector<CalibrationBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lower = static_cast<double>(b) / static_cast<double>(bins);
    out[b].upper = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  std::vector<double> correct(bins, 0.0);
  std::vector<double> conf(bins, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] >= 0.0 && c[i] <= 1.0)) {
      throw Error("ece: confidence " + std::to_string(c[i]) + " outside [0,1]");
    }
    const std::size_t b = ece_bin(c[i], bins);
    ++out[b].count;
    correct[b] += labels[i] ? 1.0 : 0.0;
    conf[b] += c[i];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out[b].count == 0) continue;
    out[b].accuracy = correct[b] / static_cast<double>(out[b].count);
    out[b].mean_confidence = conf[b] / static_cast<double>(out[b].count);
  }
  return out;
}

inline double ece(Scores c, const Labels& labels, std::size_t bins = 10) {
  const auto table = calibration_bins(c, labels, bins);
  if (c.empty()) return 0.0;
  double total = 0.0;
  for (const auto& b : table) {
    if (b.count == 0) continue;
    total += static_cast<double>(b.count) / static_cast<double>(c.size()) *
             std::abs(b.accuracy - b.mean_confidence);
  }
  return total;
}

inline double brier(Scores c, const Labels& labels) {
  detail::check_lengths(c, labels.size(), "brier");
  if (c.empty()) throw Error("brier: no records");
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = c[i] - (labels[i] ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(c.size());
}

// Average precision with correct records as the positive class.
inline double auprc(Scores c, const Labels& labels) {
  detail::check_lengths(c, labels.size(), "auprc");
  double hits = 0.0;
  double sum = 0.0;
  const auto order = detail::descending_order(c);
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!labels[order[r]]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(r + 1);
  }
  if (hits == 0.0) throw Error("auprc: undefined with zero positive labels");
  return sum / hits;
}

struct Quality {
  double brier = 0.0;
  double auprc = 0.0;
};

inline Quality score_quality(Scores c, const Labels& labels) { return {brier(c, labels), auprc(c, labels)}; }

struct Selective {
  std::vector<double> thresholds;
  std::vector<double> coverage;  // aligned with thresholds
  double auacc = 0.0;
};

// Prefix accuracies acc_n over records in descending confidence order.
inline std::vector<double> prefix_accuracy(Scores c, const Labels& labels) {
  detail::check_lengths(c, labels.size(), "selective_metrics");
  const auto order = detail::descending_order(c);
  std::vector<double> acc(order.size());
  double correct = 0.0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    correct += labels[order[n]] ? 1.0 : 0.0;
    acc[n] = correct / static_cast<double>(n + 1);
  }
  return acc;
}

inline Selective selective_metrics(Scores c, const Labels& labels,
                                   std::vector<double> thresholds = {0.90, 0.95}) {
  const auto acc = prefix_accuracy(c, labels);
  if (acc.empty()) throw Error("selective_metrics: no records");
  const double total = static_cast<double>(acc.size());
  Selective s;
  s.thresholds = std::move(thresholds);
  for (double tau : s.thresholds) {
    double cov = 0.0;
    for (std::size_t n = acc.size(); n-- > 0;) {
      if (acc[n] >= tau) {
        cov = static_cast<double>(n + 1) / total;
        break;
      }
    }
    s.coverage.push_back(cov);
  }
  double area = 0.0;
  double prev_x = 0.0;
  double prev_y = acc[0];
  for (std::size_t n = 0; n < acc.size(); ++n) {
    const double x = static_cast<double>(n + 1) / total;
    area += 0.5 * (x - prev_x) * (acc[n] + prev_y);
    prev_x = x;
    prev_y = acc[n];
  }
  s.auacc = area;
  return s;
}

// (coverage, accuracy) at coverage k/points for k = 1..points, plus the full
// prefix when there are fewer records than points.
inline std::vector<std::pair<double, double>> accuracy_coverage_curve(Scores c, const Labels& labels,
                                                                      std::size_t points = 100) {
  const auto acc = prefix_accuracy(c, labels);
  std::vector<std::pair<double, double>> out;
  if (acc.empty()) return out;
  const std::size_t n = acc.size();
  if (n <= points) {
    for (std::size_t i = 0; i < n; ++i) {
      out.emplace_back(static_cast<double>(i + 1) / static_cast<double>(n), acc[i]);
    }
    return out;
  }
  for (std::size_t k = 1; k <= points; ++k) {
    const std::size_t m = (k * n + points - 1) / points;
    out.emplace_back(static_cast<double>(m) / static_cast<double>(n), acc[m - 1]);
  }
  return out;
}

struct BootstrapComparison {
  double delta = 0.0;  // AUROC(A) - AUROC(B) on the full sample
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  int resamples = 0;
  bool significant() const { return p_value < 0.05; }
};

inline BootstrapComparison paired_bootstrap(Scores a, Scores b, const Labels& labels, int resamples = 1000,
                                            std::uint64_t seed = 42, std::size_t threads = 1) {
  detail::check_lengths(a, labels.size(), "paired_bootstrap");
  detail::check_lengths(b, labels.size(), "paired_bootstrap");
  if (resamples <= 0) throw Error("paired_bootstrap: resamples must be positive");
  const Labels& y = labels;
  BootstrapComparison out;
  out.resamples = resamples;
  const auto full_a = auroc_value(a, labels);
  const auto full_b = auroc_value(b, labels);
  if (full_a.degenerate) throw Error("paired_bootstrap: labels contain a single class");
  out.delta = full_a.value - full_b.value;
  const auto deltas =
      parallel_map<double>(static_cast<std::size_t>(resamples), threads, [&](std::size_t r) {
        Rng rng = Rng::substream(seed, r);
        const auto rows = detail::two_class_resample(y, rng);
        return *detail::auroc_indexed(a, y, rows) - *detail::auroc_indexed(b, y, rows);
      });
  out.ci_low = detail::percentile(deltas, 0.025);
  out.ci_high = detail::percentile(deltas, 0.975);
  double le = 0.0;
  double ge = 0.0;
  for (double d : deltas) {
    if (d <= 0.0) le += 1.0;
    if (d >= 0.0) ge += 1.0;
  }
  const double n = static_cast<double>(deltas.size());
  out.p_value = std::min(1.0, 2.0 * std::min(le / n, ge / n));
  return out;
}

struct MetricReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> auroc;
  std::optional<std::pair<double, double>> auroc_ci;
  std::optional<double> ece;
  std::optional<double> brier;
  std::optional<double> auprc;
  std::optional<double> coverage_at_90;
  std::optional<double> coverage_at_95;
  std::optional<double> auacc;
  // Names of metrics that are undefined on this sample, with the value
  // (if any) being the documented stand-in.
  std::vector<std::string> degenerate;
};

struct EvaluateOptions {
  int bootstrap_resamples = 1000;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
};

inline MetricReport evaluate(Scores c, const Labels& labels, const EvaluateOptions& opt = {}) {
  detail::check_lengths(c, labels.size(), "evaluate");
  MetricReport r;
  r.n = c.size();
  if (c.empty()) {
    r.degenerate = {"auroc", "ece", "brier", "auprc", "coverage_at_90", "coverage_at_95", "auacc"};
    return r;
  }
  r.accuracy = static_cast<double>(std::count(labels.begin(), labels.end(), true)) /
               static_cast<double>(r.n);
  const auto a = auroc(c, labels, opt.bootstrap_resamples, opt.seed, opt.threads);
  r.auroc = a.value;
  r.auroc_ci = a.ci;
  if (a.degenerate) r.degenerate.emplace_back("auroc");
  r.ece = ece(c, labels);
  r.brier = brier(c, labels);
  if (std::find(labels.begin(), labels.end(), true) != labels.end()) {
    r.auprc = auprc(c, labels);
  } else {
    r.degenerate.emplace_back("auprc");
  }
  const auto s = selective_metrics(c, labels);
  r.coverage_at_90 = s.coverage[0];
  r.coverage_at_95 = s.coverage[1];
  r.auacc = s.auacc;
  return r;
}

inline void to_json(json& j, const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j = json{{"n", r.n},
           {"accuracy", r.accuracy},
           {"auroc", opt(r.auroc)},
           {"auroc_ci", r.auroc_ci ? json::array({r.auroc_ci->first, r.auroc_ci->second})
                                   : json(nullptr)},
           {"ece", opt(r.ece)},
           {"brier", opt(r.brier)},
           {"auprc", opt(r.auprc)},
           {"coverage_at_90", opt(r.coverage_at_90)},
           {"coverage_at_95", opt(r.coverage_at_95)},
           {"auacc", opt(r.auacc)},
           {"degenerate", r.degenerate}};
}

inline void from_json(const json& j, MetricReport& r) {
  auto opt = [&j](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  r.n = j.at("n").get<std::size_t>();
  r.accuracy = j.value("accuracy", 0.0);
  r.auroc = opt("auroc");
  if (j.contains("auroc_ci") && j.at("auroc_ci").is_array()) {
    r.auroc_ci = std::make_pair(j.at("auroc_ci")[0].get<double>(), j.at("auroc_ci")[1].get<double>());
  }
  r.ece = opt("ece");
  r.brier = opt("brier");
  r.auprc = opt("auprc");
  r.coverage_at_90 = opt("coverage_at_90");
  r.coverage_at_95 = opt("coverage_at_95");
  r.auacc = opt("auacc");
  r.degenerate = j.value("degenerate", std::vector<std::string>{});
}

inline void to_json(json& j, const BootstrapComparison& b) {
  j = json{{"delta_auroc", b.delta},
           {"ci", json::array({b.ci_low, b.ci_high})},
           {"p_value", b.p_value},
           {"significant", b.significant()},
           {"resamples", b.resamples}};
}

struct ScoreRow {
  std::string id;
  double confidence = 0.0;
  bool correct = false;
};

// Reads "id,confidence,correct" rows (header required). `correct` is 0/1 or
// true/false.
inline std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scores file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty scores file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(text::to_lower(text::trim(cell)));
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(path + ": header lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = col("id");
  const std::size_t conf_col = col("confidence");
  const std::size_t correct_col = col("correct");
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(text::trim(cell));
    const std::string where = path + ":" + std::to_string(line_no);
    if (cells.size() < header.size()) throw Error(where + ": too few columns");
    ScoreRow r;
    r.id = cells[id_col];
    try {
      std::size_t used = 0;
      r.confidence = std::stod(cells[conf_col], &used);
      if (used != cells[conf_col].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(where + ": confidence '" + cells[conf_col] + "' is not a number");
    }
    const std::string c = text::to_lower(cells[correct_col]);
    if (c == "1" || c == "true") {
      r.correct = true;
    } else if (c == "0" || c == "false") {
      r.correct = false;
    } else {
      throw Error(where + ": correct must be 0/1 or true/false");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ensconf::metrics
