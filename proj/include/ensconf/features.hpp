#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/util/error.hpp"

namespace ensconf::features {

// Column names per layout, in vector order.
inline const std::vector<std::string>& feature_names(Layout layout) {
  static const std::vector<std::string> m1{"c_vote", "e_overlap", "e_new",    "e_str",  "e_conf",
                                           "e_cplx", "d_early",   "d_middle", "d_late"};
  static const std::vector<std::string> m2{"c_vote",           "dispersion",     "maj_cohesion",
                                           "cluster_dist",     "minority_outlier", "maj_centrality",
                                           "min_cohesion",     "pca_ratio"};
  static const std::vector<std::string> m3{
      "c_vote",       "mean_verbalized", "e_overlap",        "e_new",          "e_str",
      "e_conf",       "e_cplx",          "d_early",          "d_middle",       "d_late",
      "dispersion",   "maj_cohesion",    "cluster_dist",     "minority_outlier", "maj_centrality",
      "min_cohesion", "pca_ratio"};
  switch (layout) {
    case Layout::M1: return m1;
    case Layout::M2: return m2;
    case Layout::M3: return m3;
  }
  return m1;
}

inline std::size_t feature_index(Layout layout, const std::string& name) {
  const auto& names = feature_names(layout);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error("feature '" + name + "' is not part of layout " + std::string(to_string(layout)));
}

struct FeatureInputs {
  double vote_confidence = 0.0;
  std::optional<StructureFeatures> structure;
  std::optional<GeometryFeatures> geometry;
  // Mean verbalized confidence of the majority agents.
  std::optional<double> mean_verbalized;
};

namespace detail {

inline void append_structure(std::vector<double>& v, const StructureFeatures& s) {
  v.insert(v.end(), {s.evidence_overlap, s.minority_new_info, s.minority_strength,
                     s.majority_conf_language, s.reasoning_complexity});
  v.push_back(s.divergence_depth == DivergenceDepth::early ? 1.0 : 0.0);
  v.push_back(s.divergence_depth == DivergenceDepth::middle ? 1.0 : 0.0);
  v.push_back(s.divergence_depth == DivergenceDepth::late ? 1.0 : 0.0);
}

inline void append_geometry(std::vector<double>& v, const GeometryFeatures& g) {
  v.insert(v.end(), {g.overall_dispersion, g.majority_cohesion, g.cluster_distance,
                     g.minority_outlier_degree, g.majority_centrality, g.minority_cohesion,
                     g.pca_variance_ratio});
}

template <typename T>
const T& require(const std::optional<T>& v, Layout layout, const char* field) {
  if (!v) {
    throw Error("assemble_features: layout " + std::string(to_string(layout)) + " requires " +
                field);
  }
  return *v;
}

}  // namespace detail

inline FeatureVector assemble_features(const FeatureInputs& in, Layout layout) {
  FeatureVector fv{layout, {}};
  fv.values.reserve(layout_size(layout));
  fv.values.push_back(in.vote_confidence);
  switch (layout) {
    case Layout::M1:
      detail::append_structure(fv.values, detail::require(in.structure, layout, "structure"));
      break;
    case Layout::M2:
      detail::append_geometry(fv.values, detail::require(in.geometry, layout, "geometry"));
      break;
    case Layout::M3:
      fv.values.push_back(detail::require(in.mean_verbalized, layout, "mean_verbalized"));
      detail::append_structure(fv.values, detail::require(in.structure, layout, "structure"));
      detail::append_geometry(fv.values, detail::require(in.geometry, layout, "geometry"));
      break;
  }
  return fv;
}

inline Eigen::MatrixXd to_matrix(const std::vector<FeatureVector>& rows) {
  if (rows.empty()) return {};
  const Layout layout = rows.front().layout;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(layout_size(layout)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].layout != layout || rows[i].values.size() != layout_size(layout)) {
      throw Error("to_matrix: mixed feature layouts");
    }
    for (std::size_t j = 0; j < rows[i].values.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
    }
  }
  return m;
}

// Per-column z-scoring with statistics from training rows only. Columns whose
// standard deviation is below 1e-12 are centered but not scaled.
class Standardizer {
 public:
  static constexpr double kMinStd = 1e-12;

  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd scale)
      : mean_(std::move(mean)), scale_(std::move(scale)) {}

  static Standardizer fit(const Eigen::MatrixXd& train) {
    if (train.rows() < 2) throw Error("Standardizer: need at least 2 training rows");
    Eigen::VectorXd mean = train.colwise().mean().transpose();
    Eigen::VectorXd scale(train.cols());
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
      const double var = (train.col(j).array() - mean(j)).square().mean();
      const double sd = std::sqrt(var);
      scale(j) = sd < kMinStd ? 1.0 : sd;
    }
    return {std::move(mean), std::move(scale)};
  }

  static Standardizer fit(const std::vector<FeatureVector>& train) {
    return fit(to_matrix(train));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != dim()) {
      throw Error("Standardizer: expected " + std::to_string(dim()) + " columns, got " +
                  std::to_string(x.cols()));
    }
    return (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
  }

  FeatureVector apply(const FeatureVector& v) const {
    if (static_cast<Eigen::Index>(v.values.size()) != dim()) {
      throw Error("Standardizer: layout " + std::string(to_string(v.layout)) +
                  " does not match fitted dimension " + std::to_string(dim()));
    }
    FeatureVector out = v;
    for (std::size_t j = 0; j < out.values.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.values[j] = (out.values[j] - mean_(jj)) / scale_(jj);
    }
    return out;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

// CSV with a header naming every position: id,correct,<feature names...>
inline void write_csv(std::ostream& out, Layout layout, const std::vector<std::string>& ids,
                      const std::vector<FeatureVector>& rows, const std::vector<bool>& correct) {
  if (ids.size() != rows.size() || correct.size() != rows.size()) {
    throw Error("write_csv: ids, rows and labels differ in length");
  }
  out << "id,correct";
  for (const auto& n : feature_names(layout)) out << ',' << n;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << ids[i] << ',' << (correct[i] ? 1 : 0);
    for (double v : rows[i].values) out << ',' << v;
    out << '\n';
  }
}

}  // namespace ensconf::features
