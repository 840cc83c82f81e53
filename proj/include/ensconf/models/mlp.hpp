#pragma once

// Two hidden ReLU layers, sigmoid output, binary cross-entropy, AdamW with
// decoupled weight decay, dropout during training, early stopping on a
// stratified validation split with best-epoch restore.

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ensconf/models/logistic.hpp"
#include "ensconf/util/rng.hpp"

namespace ensconf::models {

struct MlpHyperparameters {
  int hidden = 32;
  double dropout = 0.3;
  double learning_rate = 5e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 15;
  // Share of the training fold held out for early stopping; 0 trains on all
  // rows for max_epochs with no early stopping.
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;
};

struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x d
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;
  Eigen::RowVectorXd w3;  // 1 x hidden
  double b3 = 0.0;

  static MlpParams zeros(Eigen::Index d, Eigen::Index h) {
    return {Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(h, h),
            Eigen::VectorXd::Zero(h),    Eigen::RowVectorXd::Zero(h), 0.0};
  }

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static MlpParams fan_in_uniform(Eigen::Index d, Eigen::Index h, Rng& rng) {
    MlpParams p = zeros(d, h);
    auto fill = [&rng](auto& m, double fan_in) {
      const double bound = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    };
    fill(p.w1, static_cast<double>(d));
    fill(p.b1, static_cast<double>(d));
    fill(p.w2, static_cast<double>(h));
    fill(p.b2, static_cast<double>(h));
    fill(p.w3, static_cast<double>(h));
    p.b3 = rng.uniform(-1.0 / std::sqrt(static_cast<double>(h)), 1.0 / std::sqrt(static_cast<double>(h)));
    return p;
  }

  Eigen::Index input_dim() const { return w1.cols(); }

  // Flattened view order: w1, b1, w2, b2, w3, b3.
  Eigen::Index parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
  }
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(parameter_count());
    Eigen::Index o = 0;
    auto put = [&](const auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) v(o++) = m.data()[i];
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w3);
    v(o) = b3;
    return v;
  }
  void unflatten(const Eigen::VectorXd& v) {
    Eigen::Index o = 0;
    auto get = [&](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = v(o++);
    };
    get(w1);
    get(b1);
    get(w2);
    get(b2);
    get(w3);
    b3 = v(o);
  }
};

// Dropout keep-masks (already scaled by 1/(1-rate)), one column per example.
struct DropoutMasks {
  Eigen::MatrixXd h1;
  Eigen::MatrixXd h2;
};

// Output logits for rows of x; masks are applied when given.
inline Eigen::RowVectorXd mlp_logits(const MlpParams& p, const Eigen::MatrixXd& x,
                                     const DropoutMasks* masks = nullptr) {
  Eigen::MatrixXd a1 = ((p.w1 * x.transpose()).colwise() + p.b1).cwiseMax(0.0);
  if (masks) a1.array() *= masks->h1.array();
  Eigen::MatrixXd a2 = ((p.w2 * a1).colwise() + p.b2).cwiseMax(0.0);
  if (masks) a2.array() *= masks->h2.array();
  return (p.w3 * a2).array() + p.b3;
}

// Mean binary cross-entropy over rows of x and its gradient.
inline double mlp_loss_and_grad(const MlpParams& p, const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y, MlpParams* grad,
                                const DropoutMasks* masks = nullptr) {
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd xt = x.transpose();
  const Eigen::MatrixXd z1 = (p.w1 * xt).colwise() + p.b1;
  Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  if (masks) a1.array() *= masks->h1.array();
  const Eigen::MatrixXd z2 = (p.w2 * a1).colwise() + p.b2;
  Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
  if (masks) a2.array() *= masks->h2.array();
  const Eigen::RowVectorXd z3 = (p.w3 * a2).array() + p.b3;

  double loss = 0.0;
  Eigen::RowVectorXd dz3(z3.size());
  for (Eigen::Index i = 0; i < z3.size(); ++i) {
    loss += softplus(z3(i)) - y(i) * z3(i);
    dz3(i) = (sigmoid(z3(i)) - y(i)) / n;
  }
  loss /= n;
  if (!grad) return loss;

  grad->w3 = dz3 * a2.transpose();
  grad->b3 = dz3.sum();
  Eigen::MatrixXd da2 = p.w3.transpose() * dz3;
  if (masks) da2.array() *= masks->h2.array();
  const Eigen::MatrixXd dz2 = da2.array() * (z2.array() > 0.0).cast<double>();
  grad->w2 = dz2 * a1.transpose();
  grad->b2 = dz2.rowwise().sum();
  Eigen::MatrixXd da1 = p.w2.transpose() * dz2;
  if (masks) da1.array() *= masks->h1.array();
  const Eigen::MatrixXd dz1 = da1.array() * (z1.array() > 0.0).cast<double>();
  grad->w1 = dz1 * x;
  grad->b1 = dz1.rowwise().sum();
  return loss;
}

struct MlpModel {
  MlpParams params;
  MlpHyperparameters hyper;
  int best_epoch = -1;
  int epochs_run = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<double> validation_history;
  std::vector<double> training_history;
  // Set when the training fold was too small for the network.
  std::optional<LogisticModel> fallback;
};

inline Eigen::VectorXd predict_proba(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (m.fallback) return predict_proba(*m.fallback, x);
  if (x.cols() != m.params.input_dim()) {
    throw Error("predict_proba: model expects " + std::to_string(m.params.input_dim()) +
                " features, got " + std::to_string(x.cols()));
  }
  const Eigen::RowVectorXd z = mlp_logits(m.params, x);
  Eigen::VectorXd p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = std::clamp(sigmoid(z(i)), 1e-15, 1.0 - 1e-15);
  return p;
}

namespace detail {

// Seeded stratified split: returns (train, validation) index lists, each class
// contributing round(fraction * count) rows (at least one) to validation.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_holdout(
    const Eigen::VectorXd& y, double fraction, Rng& rng) {
  std::vector<Eigen::Index> pos;
  std::vector<Eigen::Index> neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0.5 ? pos : neg).push_back(i);
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> val;
  for (auto* cls : {&pos, &neg}) {
    rng.shuffle(*cls);
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(cls->size()))));
    for (std::size_t i = 0; i < cls->size(); ++i) (i < take ? val : train).push_back((*cls)[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

inline Eigen::VectorXd rows_of(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(idx[i]);
  return out;
}

class AdamW {
 public:
  AdamW(Eigen::Index n, const MlpHyperparameters& h)
      : h_(h), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g) {
    ++t_;
    theta *= 1.0 - h_.learning_rate * h_.weight_decay;
    m_ = h_.beta1 * m_ + (1.0 - h_.beta1) * g;
    v_ = h_.beta2 * v_ + (1.0 - h_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(h_.beta1, t_);
    const double c2 = 1.0 - std::pow(h_.beta2, t_);
    theta.array() -= h_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + h_.epsilon);
  }

 private:
  MlpHyperparameters h_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

}  // namespace detail

inline MlpModel train_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const MlpHyperparameters& hyper = {}) {
  if (y.size() != x.rows()) throw Error("train_mlp: label count does not match rows");
  if (!x.allFinite()) throw Error("train_mlp: non-finite input");
  MlpModel model;
  model.hyper = hyper;

  const double positives = y.sum();
  const double negatives = static_cast<double>(y.size()) - positives;
  const bool use_validation = hyper.validation_fraction > 0.0;
  const double min_per_class = use_validation ? 2.0 : 1.0;
  if (positives < min_per_class || negatives < min_per_class) {
    spdlog::warn("train_mlp: fewer than {} examples of a class, falling back to logistic",
                 min_per_class);
    model.fallback = train_logistic(x, y);
    return model;
  }

  Rng rng(hyper.seed);
  std::vector<Eigen::Index> train_idx;
  std::vector<Eigen::Index> val_idx;
  if (use_validation) {
    std::tie(train_idx, val_idx) = detail::stratified_holdout(y, hyper.validation_fraction, rng);
  } else {
    for (Eigen::Index i = 0; i < y.size(); ++i) train_idx.push_back(i);
  }
  const Eigen::MatrixXd xv = detail::rows_of(x, val_idx);
  const Eigen::VectorXd yv = detail::rows_of(y, val_idx);

  const Eigen::Index h = hyper.hidden;
  model.params = MlpParams::fan_in_uniform(x.cols(), h, rng);
  Eigen::VectorXd theta = model.params.flatten();
  detail::AdamW opt(theta.size(), hyper);
  MlpParams work = model.params;
  MlpParams grad = MlpParams::zeros(x.cols(), h);
  Eigen::VectorXd best = theta;
  int since_best = 0;
  const double keep = 1.0 - hyper.dropout;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + static_cast<std::size_t>(hyper.batch_size));
      const std::vector<Eigen::Index> batch(train_idx.begin() + static_cast<long>(start),
                                            train_idx.begin() + static_cast<long>(end));
      const Eigen::MatrixXd xb = detail::rows_of(x, batch);
      const Eigen::VectorXd yb = detail::rows_of(y, batch);
      work.unflatten(theta);
      double loss = 0.0;
      if (hyper.dropout > 0.0) {
        DropoutMasks masks{Eigen::MatrixXd(h, xb.rows()), Eigen::MatrixXd(h, xb.rows())};
        for (Eigen::Index i = 0; i < masks.h1.size(); ++i) {
          masks.h1.data()[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        for (Eigen::Index i = 0; i < masks.h2.size(); ++i) {
          masks.h2.data()[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        loss = mlp_loss_and_grad(work, xb, yb, &grad, &masks);
      } else {
        loss = mlp_loss_and_grad(work, xb, yb, &grad);
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      opt.step(theta, grad.flatten());
    }
    model.training_history.push_back(epoch_loss / static_cast<double>(train_idx.size()));
    model.epochs_run = epoch + 1;
    if (!use_validation) {
      best = theta;
      model.best_epoch = epoch;
      continue;
    }
    work.unflatten(theta);
    const double val_loss = mlp_loss_and_grad(work, xv, yv, nullptr);
    model.validation_history.push_back(val_loss);
    if (val_loss < model.best_validation_loss) {
      model.best_validation_loss = val_loss;
      model.best_epoch = epoch;
      best = theta;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }
  }
  model.params.unflatten(best);
  return model;
}

inline MlpModel train_mlp(const Eigen::MatrixXd& x, const std::vector<bool>& y,
                          const MlpHyperparameters& hyper = {}) {
  return train_mlp(x, to_vector(y), hyper);
}

}  // namespace ensconf::models
