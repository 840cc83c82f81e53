#pragma once

// A fitted confidence model: the training-fold Standardizer plus either a
// logistic or an MLP head. Serializes to JSON losslessly.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/features.hpp"
#include "ensconf/models/logistic.hpp"
#include "ensconf/models/mlp.hpp"

namespace ensconf::models {

enum class ModelKind { logistic, mlp };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "mlp"; }
inline ModelKind parse_model_kind(std::string_view s) {
  return parse_enum(s, std::array{ModelKind::logistic, ModelKind::mlp}, "model kind");
}

struct TrainOptions {
  LogisticOptions logistic;
  MlpHyperparameters mlp;
};

struct Classifier {
  ModelKind kind = ModelKind::logistic;
  std::optional<Layout> layout;
  std::vector<std::string> feature_names;
  features::Standardizer standardizer;
  LogisticModel logistic;
  MlpModel mlp;

  Eigen::VectorXd predict(const Eigen::MatrixXd& raw) const {
    const Eigen::MatrixXd x = standardizer.apply(raw);
    return kind == ModelKind::logistic ? predict_proba(logistic, x) : predict_proba(mlp, x);
  }
};

// Fits the Standardizer and the model on the given (raw) training rows.
inline Classifier fit_classifier(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y, ModelKind kind,
                                 const TrainOptions& opt = {}) {
  Classifier c;
  c.kind = kind;
  c.standardizer = features::Standardizer::fit(raw);
  const Eigen::MatrixXd x = c.standardizer.apply(raw);
  if (kind == ModelKind::logistic) {
    c.logistic = train_logistic(x, y, opt.logistic);
  } else {
    c.mlp = train_mlp(x, y, opt.mlp);
  }
  return c;
}

namespace detail {

inline json to_json_vector(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Row-major nested arrays.
inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const Eigen::Index cols = rows.empty() ? cols_if_empty : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw Error("ragged matrix in model JSON");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

}  // namespace detail

inline json to_json(const Classifier& c) {
  json j;
  j["format"] = "ensconf-classifier/1";
  j["kind"] = to_string(c.kind);
  j["layout"] = c.layout ? json(std::string(to_string(*c.layout))) : json(nullptr);
  j["feature_names"] = c.feature_names;
  j["standardizer"] = {{"mean", detail::to_json_vector(c.standardizer.mean())},
                       {"scale", detail::to_json_vector(c.standardizer.scale())}};
  if (c.kind == ModelKind::logistic) {
    j["logistic"] = {{"weights", detail::to_json_vector(c.logistic.weights)},
                     {"intercept", c.logistic.intercept},
                     {"lambda", c.logistic.lambda},
                     {"iterations", c.logistic.iterations},
                     {"gradient_norm", c.logistic.gradient_norm},
                     {"constant", c.logistic.constant}};
  } else if (c.mlp.fallback) {
    const auto& f = *c.mlp.fallback;
    j["mlp"] = {{"fallback_logistic",
                 {{"weights", detail::to_json_vector(f.weights)},
                  {"intercept", f.intercept},
                  {"lambda", f.lambda},
                  {"iterations", f.iterations},
                  {"gradient_norm", f.gradient_norm},
                  {"constant", f.constant}}}};
  } else {
    const auto& p = c.mlp.params;
    j["mlp"] = {{"w1", detail::to_json_matrix(p.w1)},
                {"b1", detail::to_json_vector(p.b1)},
                {"w2", detail::to_json_matrix(p.w2)},
                {"b2", detail::to_json_vector(p.b2)},
                {"w3", detail::to_json_vector(p.w3.transpose())},
                {"b3", p.b3},
                {"best_epoch", c.mlp.best_epoch},
                {"epochs_run", c.mlp.epochs_run}};
  }
  return j;
}

namespace detail {

inline LogisticModel logistic_from_json(const json& j) {
  LogisticModel m;
  m.weights = vector_from_json(j.at("weights"));
  m.intercept = j.at("intercept").get<double>();
  m.lambda = j.value("lambda", 1.0);
  m.iterations = j.value("iterations", 0);
  m.gradient_norm = j.value("gradient_norm", 0.0);
  m.constant = j.value("constant", false);
  return m;
}

}  // namespace detail

inline Classifier classifier_from_json(const json& j) {
  Classifier c;
  c.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!j.at("layout").is_null()) c.layout = parse_layout(j.at("layout").get<std::string>());
  c.feature_names = j.value("feature_names", std::vector<std::string>{});
  c.standardizer = features::Standardizer(detail::vector_from_json(j.at("standardizer").at("mean")),
                                          detail::vector_from_json(j.at("standardizer").at("scale")));
  if (c.kind == ModelKind::logistic) {
    c.logistic = detail::logistic_from_json(j.at("logistic"));
  } else {
    const json& m = j.at("mlp");
    if (m.contains("fallback_logistic")) {
      c.mlp.fallback = detail::logistic_from_json(m.at("fallback_logistic"));
    } else {
      auto& p = c.mlp.params;
      p.w1 = detail::matrix_from_json(m.at("w1"), c.standardizer.dim());
      p.b1 = detail::vector_from_json(m.at("b1"));
      p.w2 = detail::matrix_from_json(m.at("w2"));
      p.b2 = detail::vector_from_json(m.at("b2"));
      p.w3 = detail::vector_from_json(m.at("w3")).transpose();
      p.b3 = m.at("b3").get<double>();
      c.mlp.best_epoch = m.value("best_epoch", -1);
      c.mlp.epochs_run = m.value("epochs_run", 0);
    }
  }
  return c;
}

}  // namespace ensconf::models
