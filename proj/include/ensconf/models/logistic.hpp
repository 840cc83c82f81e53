#pragma once

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ensconf/util/error.hpp"

namespace ensconf::models {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline Eigen::VectorXd to_vector(const std::vector<bool>& y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i] ? 1.0 : 0.0;
  return v;
}

struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double lambda = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  // Trained on a single class: predicts the (clamped) base rate everywhere.
  bool constant = false;
};

struct LogisticOptions {
  double lambda = 1.0;
  int max_iterations = 500;
  double tolerance = 1e-8;
};

// Minimizes sum_i [softplus(z_i) - y_i z_i] + (lambda/2)|w|^2 with z = Xw + b
// by damped Newton steps from zero. The intercept is not penalized.
inline LogisticModel train_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const LogisticOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (y.size() != n) throw Error("train_logistic: label count does not match rows");
  if (n == 0) throw Error("train_logistic: no training rows");
  if (!x.allFinite() || !y.allFinite()) throw Error("train_logistic: non-finite input");

  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(d);
  m.lambda = opt.lambda;
  const double positives = y.sum();
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    const double rate = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    m.intercept = std::log(rate / (1.0 - rate));
    m.constant = true;
    spdlog::warn("train_logistic: single-class training data, constant model at rate {}", rate);
    return m;
  }

  // Augmented design [X 1], parameters theta = [w; b].
  Eigen::MatrixXd xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, opt.lambda);
  penalty(d) = 0.0;

  auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd z = xa * t;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += softplus(z(i)) - y(i) * z(i);
    return f + 0.5 * (penalty.array() * t.array().square()).sum();
  };

  double f = objective(theta);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd z = xa * theta;
    Eigen::VectorXd p(n);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      s(i) = p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd grad = xa.transpose() * (p - y) + penalty.cwiseProduct(theta);
    m.gradient_norm = grad.norm();
    m.iterations = it;
    if (m.gradient_norm <= opt.tolerance) break;
    Eigen::MatrixXd hess = xa.transpose() * s.asDiagonal() * xa;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double f_next = objective(next);
    const double slope = grad.dot(step);
    while (f_next > f - 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      f_next = objective(next);
    }
    if (f_next > f) break;  // no further decrease at machine precision
    theta = next;
    f = f_next;
    m.iterations = it + 1;
  }
  m.weights = theta.head(d);
  m.intercept = theta(d);
  if (!m.weights.allFinite() || !std::isfinite(m.intercept)) {
    throw Error("train_logistic: optimization diverged");
  }
  return m;
}

inline LogisticModel train_logistic(const Eigen::MatrixXd& x, const std::vector<bool>& y,
                                    const LogisticOptions& opt = {}) {
  return train_logistic(x, to_vector(y), opt);
}

inline Eigen::VectorXd predict_proba(const LogisticModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.weights.size()) {
    throw Error("predict_proba: model expects " + std::to_string(m.weights.size()) +
                " features, got " + std::to_string(x.cols()));
  }
  const Eigen::VectorXd z = (x * m.weights).array() + m.intercept;
  return z.unaryExpr([](double v) { return std::clamp(sigmoid(v), 1e-15, 1.0 - 1e-15); });
}

}  // namespace ensconf::models
