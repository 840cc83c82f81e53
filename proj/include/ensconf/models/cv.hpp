#pragma once

// Stratified k-fold cross-validation producing pooled out-of-fold confidences.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ensconf/models/classifier.hpp"
#include "ensconf/util/parallel.hpp"
#include "ensconf/util/rng.hpp"

namespace ensconf::models {

struct CvPlan {
  int folds = 5;
  std::uint64_t seed = 42;
  std::vector<int> fold_of;  // fold index per record
  std::vector<std::vector<Eigen::Index>> train;
  std::vector<std::vector<Eigen::Index>> test;
};

// Each class is shuffled with the seed and dealt round-robin across folds,
// positives first and negatives continuing the rotation, so fold sizes differ
// by at most one and each fold's class counts differ by at most one.
inline CvPlan make_cv_plan(const std::vector<bool>& labels, int folds = 5, std::uint64_t seed = 42) {
  if (folds < 2) throw Error("make_cv_plan: need at least 2 folds");
  std::vector<Eigen::Index> pos;
  std::vector<Eigen::Index> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] ? pos : neg).push_back(static_cast<Eigen::Index>(i));
  }
  if (pos.size() < static_cast<std::size_t>(folds) || neg.size() < static_cast<std::size_t>(folds)) {
    throw Error("cross-validation needs at least " + std::to_string(folds) +
                " records of each class (have " + std::to_string(pos.size()) + " correct, " +
                std::to_string(neg.size()) + " incorrect)");
  }
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  CvPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.fold_of.assign(labels.size(), -1);
  std::size_t slot = 0;
  for (const auto* cls : {&pos, &neg}) {
    for (auto i : *cls) plan.fold_of[static_cast<std::size_t>(i)] = static_cast<int>(slot++ % folds);
  }
  plan.train.resize(static_cast<std::size_t>(folds));
  plan.test.resize(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto f = static_cast<std::size_t>(plan.fold_of[i]);
    for (std::size_t g = 0; g < plan.test.size(); ++g) {
      (g == f ? plan.test[g] : plan.train[g]).push_back(static_cast<Eigen::Index>(i));
    }
  }
  return plan;
}

struct CvResult {
  Eigen::VectorXd oof;  // one out-of-fold confidence per record
  CvPlan plan;
  std::vector<Classifier> models;  // one per fold
};

// Fits a Standardizer and model on each fold's training rows and predicts its
// held-out rows. MLP folds are seeded with seed + fold index.
inline CvResult cross_validate(const Eigen::MatrixXd& raw, const std::vector<bool>& labels,
                               ModelKind kind, const TrainOptions& opt = {}, int folds = 5,
                               std::uint64_t seed = 42, std::size_t threads = 1) {
  if (static_cast<std::size_t>(raw.rows()) != labels.size()) {
    throw Error("cross_validate: feature rows and labels differ in length");
  }
  CvResult out;
  out.plan = make_cv_plan(labels, folds, seed);
  const Eigen::VectorXd y = to_vector(labels);
  out.models = parallel_map<Classifier>(
      static_cast<std::size_t>(folds), threads, [&](std::size_t f) {
        TrainOptions fold_opt = opt;
        fold_opt.mlp.seed = opt.mlp.seed + f;
        return fit_classifier(detail::rows_of(raw, out.plan.train[f]),
                              detail::rows_of(y, out.plan.train[f]), kind, fold_opt);
      });
  out.oof = Eigen::VectorXd::Constant(raw.rows(), -1.0);
  for (std::size_t f = 0; f < out.models.size(); ++f) {
    const Eigen::VectorXd p = out.models[f].predict(detail::rows_of(raw, out.plan.test[f]));
    for (std::size_t i = 0; i < out.plan.test[f].size(); ++i) {
      out.oof(out.plan.test[f][i]) = p(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

inline CvResult cross_validate(const std::vector<FeatureVector>& rows, const std::vector<bool>& labels,
                               ModelKind kind, const TrainOptions& opt = {}, int folds = 5,
                               std::uint64_t seed = 42, std::size_t threads = 1) {
  CvResult r = cross_validate(features::to_matrix(rows), labels, kind, opt, folds, seed, threads);
  if (!rows.empty()) {
    for (auto& m : r.models) {
      m.layout = rows.front().layout;
      m.feature_names = features::feature_names(rows.front().layout);
    }
  }
  return r;
}

}  // namespace ensconf::models
