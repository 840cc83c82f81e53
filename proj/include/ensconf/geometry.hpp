#pragma once

// Cosine geometry of the agents' reasoning embeddings.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/util/error.hpp"

namespace ensconf::geometry {

// K embeddings, one per row.
struct EmbeddingSet {
  Eigen::MatrixXd vectors;
  bool normalized = false;

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

// Rows scaled to unit L2 norm. Zero rows are rejected.
inline EmbeddingSet normalize(Eigen::MatrixXd vectors) {
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const double n = vectors.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error("embedding " + std::to_string(i) + " has zero or non-finite norm");
    }
    vectors.row(i) /= n;
  }
  return {std::move(vectors), true};
}

inline EmbeddingSet from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("embedding set is empty");
  const std::size_t d = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) {
      throw Error("embedding dimension mismatch: " + std::to_string(rows[i].size()) + " vs " +
                  std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return normalize(std::move(m));
}

inline std::vector<std::vector<double>> to_rows(const EmbeddingSet& e) {
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(e.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const Eigen::RowVectorXd row = e.vectors.row(i);
    out.emplace_back(row.data(), row.data() + row.size());
  }
  return out;
}

// One L2-normalized vector per text. `expected_dim` of 0 accepts any dimension.
inline EmbeddingSet embed_texts(const std::vector<std::string>& texts,
                                orchestration::Backend& backend, const std::string& model,
                                std::size_t expected_dim = 0) {
  if (texts.empty()) throw Error("embed_texts: no texts");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error("embed_texts: text " + std::to_string(i) + " is empty");
  }
  const auto rows = backend.embed(model, texts);
  if (rows.size() != texts.size()) throw Error("embed_texts: backend returned wrong count");
  auto set = from_rows(rows);
  if (expected_dim != 0 && static_cast<std::size_t>(set.dim()) != expected_dim) {
    throw Error("embed_texts: dimension " + std::to_string(set.dim()) + " but configured " +
                std::to_string(expected_dim));
  }
  return set;
}

template <typename U, typename V>
double cosine_distance(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<V>& v) {
  if (u.size() != v.size()) throw Error("cosine_distance: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error("cosine_distance: zero-norm input");
  const double d = 1.0 - u.dot(v) / (nu * nv);
  return std::clamp(d, 0.0, 2.0);
}

inline double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return cosine_distance(Map(u.data(), static_cast<Eigen::Index>(u.size())),
                         Map(v.data(), static_cast<Eigen::Index>(v.size())));
}

namespace detail {

// Centroids can cancel to zero; treat that as orthogonal rather than failing.
template <typename U, typename V>
double centroid_distance(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<V>& v) {
  constexpr double kTiny = 1e-12;
  if (u.norm() < kTiny || v.norm() < kTiny) return 1.0;
  return cosine_distance(u, v);
}

inline double mean_pairwise(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  if (idx.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      sum += cosine_distance(x.row(idx[a]), x.row(idx[b]));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

inline Eigen::RowVectorXd centroid(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x.cols());
  for (auto i : idx) c += x.row(i);
  return c / static_cast<double>(idx.size());
}

}  // namespace detail

// Share of variance on the first principal component, computed from the
// eigenvalues of the K x K centered Gram matrix. A cloud with total variance
// below 1e-12 is treated as perfectly aligned (1.0).
inline double pca_first_ratio(const Eigen::MatrixXd& points) {
  const Eigen::Index k = points.rows();
  if (k < 2) throw Error("pca_first_ratio: need at least 2 points");
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  const Eigen::MatrixXd gram = centered * centered.transpose() / static_cast<double>(k - 1);
  if (gram.trace() < 1e-12) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(0.0);
  const double total = ev.sum();
  if (total < 1e-12) return 1.0;
  return std::clamp(ev.maxCoeff() / total, 0.0, 1.0);
}

// The seven geometry features. Centroids are plain means of the unit vectors.
inline GeometryFeatures compute_geometry(const EmbeddingSet& embeddings,
                                         const std::vector<bool>& majority_mask) {
  const Eigen::Index k = embeddings.size();
  if (k < 2) throw Error("compute_geometry: need at least 2 embeddings");
  if (static_cast<Eigen::Index>(majority_mask.size()) != k) {
    throw Error("compute_geometry: mask size does not match embedding count");
  }
  const EmbeddingSet unit = embeddings.normalized ? embeddings : normalize(embeddings.vectors);
  const Eigen::MatrixXd& x = unit.vectors;

  std::vector<Eigen::Index> all;
  std::vector<Eigen::Index> maj;
  std::vector<Eigen::Index> mino;
  for (Eigen::Index i = 0; i < k; ++i) {
    all.push_back(i);
    (majority_mask[static_cast<std::size_t>(i)] ? maj : mino).push_back(i);
  }
  if (maj.empty()) throw Error("compute_geometry: majority mask is empty");

  GeometryFeatures g;
  g.overall_dispersion = detail::mean_pairwise(x, all);
  g.majority_cohesion = detail::mean_pairwise(x, maj);
  g.minority_cohesion = detail::mean_pairwise(x, mino);
  const Eigen::RowVectorXd maj_c = detail::centroid(x, maj);
  const Eigen::RowVectorXd all_c = detail::centroid(x, all);
  g.majority_centrality = detail::centroid_distance(maj_c, all_c);
  if (!mino.empty()) {
    const Eigen::RowVectorXd min_c = detail::centroid(x, mino);
    g.cluster_distance = detail::centroid_distance(maj_c, min_c);
    double sum = 0.0;
    for (auto i : mino) sum += detail::centroid_distance(x.row(i), maj_c);
    g.minority_outlier_degree = sum / static_cast<double>(mino.size());
  }
  g.pca_variance_ratio = pca_first_ratio(x);
  return g;
}

}  // namespace ensconf::geometry
