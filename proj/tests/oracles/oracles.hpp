#pragma once

// Deliberately naive reference implementations used only by tests. Nothing
// here shares code with the library: plain loops over std::vector.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Pairwise Mann-Whitney count, ties worth one half.
inline std::optional<double> auroc(const Vec& c, const std::vector<bool>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (c[i] > c[j]) wins += 1.0;
      if (c[i] == c[j]) wins += 0.5;
    }
  }
  if (pairs == 0.0) return std::nullopt;
  return wins / pairs;
}

inline double ece(const Vec& c, const std::vector<bool>& y, int bins = 10) {
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    double n = 0.0;
    double hits = 0.0;
    double conf = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const bool inside = (c[i] > lo || (b == 0 && c[i] >= lo)) && c[i] <= hi;
      if (!inside) continue;
      n += 1.0;
      hits += y[i] ? 1.0 : 0.0;
      conf += c[i];
    }
    if (n > 0) total += n / static_cast<double>(c.size()) * std::fabs(hits / n - conf / n);
  }
  return total;
}

inline double brier(const Vec& c, const std::vector<bool>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = c[i] - (y[i] ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(c.size());
}

// Selection sort by descending confidence; equal confidences keep record order.
inline std::vector<std::size_t> ranking(const Vec& c) {
  std::vector<std::size_t> order;
  std::vector<bool> used(c.size(), false);
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::size_t best = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (used[i]) continue;
      if (best == c.size() || c[i] > c[best]) best = i;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

inline double average_precision(const Vec& c, const std::vector<bool>& y) {
  const auto order = ranking(c);
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!y[order[r]]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(r + 1);
  }
  return sum / hits;
}

struct SelectiveResult {
  double coverage_90 = 0.0;
  double coverage_95 = 0.0;
  double auacc = 0.0;
};

inline SelectiveResult selective(const Vec& c, const std::vector<bool>& y) {
  const auto order = ranking(c);
  const std::size_t n = order.size();
  Vec acc(n);
  for (std::size_t k = 1; k <= n; ++k) {
    double hits = 0.0;
    for (std::size_t r = 0; r < k; ++r) hits += y[order[r]] ? 1.0 : 0.0;
    acc[k - 1] = hits / static_cast<double>(k);
  }
  SelectiveResult s;
  for (std::size_t k = 1; k <= n; ++k) {
    const double cov = static_cast<double>(k) / static_cast<double>(n);
    if (acc[k - 1] >= 0.90) s.coverage_90 = std::max(s.coverage_90, cov);
    if (acc[k - 1] >= 0.95) s.coverage_95 = std::max(s.coverage_95, cov);
  }
  std::vector<std::pair<double, double>> pts{{0.0, acc[0]}};
  for (std::size_t k = 1; k <= n; ++k) pts.emplace_back(static_cast<double>(k) / n, acc[k - 1]);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    s.auacc += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return s;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double cosine_distance(const Vec& a, const Vec& b) {
  return 1.0 - dot(a, b) / (norm(a) * norm(b));
}

inline Vec mean_of(const Mat& pts, const std::vector<std::size_t>& idx) {
  Vec m(pts[0].size(), 0.0);
  for (auto i : idx) {
    for (std::size_t d = 0; d < m.size(); ++d) m[d] += pts[i][d];
  }
  for (auto& v : m) v /= static_cast<double>(idx.size());
  return m;
}

inline double mean_pairwise(const Mat& pts, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  int n = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (a >= b) continue;
      s += cosine_distance(pts[idx[a]], pts[idx[b]]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / n;
}

// Cyclic Jacobi rotations on a symmetric matrix; returns its eigenvalues.
inline Vec jacobi_eigenvalues(Mat a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = cs * akp - sn * akq;
          a[k][q] = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = cs * apk - sn * aqk;
          a[q][k] = sn * apk + cs * aqk;
        }
      }
    }
  }
  Vec ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

// Explained-variance share of the first component from the full D x D covariance.
inline double pca_ratio_covariance(const Mat& pts) {
  const std::size_t k = pts.size();
  const std::size_t d = pts[0].size();
  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Vec mu = mean_of(pts, all);
  Mat cov(d, Vec(d, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        cov[a][b] += (pts[i][a] - mu[a]) * (pts[i][b] - mu[b]) / static_cast<double>(k - 1);
      }
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov[a][a];
  if (trace < 1e-12) return 1.0;
  const Vec ev = jacobi_eigenvalues(cov);
  double top = 0.0;
  double sum = 0.0;
  for (double v : ev) {
    top = std::max(top, v);
    sum += std::max(v, 0.0);
  }
  return top / sum;
}

struct Geometry {
  double dispersion, maj_cohesion, cluster_distance, outlier, centrality, min_cohesion, pca;
};

// Brute-force seven features; `pts` need not be normalized.
inline Geometry geometry(Mat pts, const std::vector<bool>& majority) {
  for (auto& p : pts) {
    const double n = norm(p);
    for (auto& v : p) v /= n;
  }
  std::vector<std::size_t> all;
  std::vector<std::size_t> maj;
  std::vector<std::size_t> mino;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    all.push_back(i);
    (majority[i] ? maj : mino).push_back(i);
  }
  Geometry g{};
  g.dispersion = mean_pairwise(pts, all);
  g.maj_cohesion = mean_pairwise(pts, maj);
  g.min_cohesion = mean_pairwise(pts, mino);
  const Vec mc = mean_of(pts, maj);
  g.centrality = cosine_distance(mc, mean_of(pts, all));
  if (!mino.empty()) {
    g.cluster_distance = cosine_distance(mc, mean_of(pts, mino));
    double s = 0.0;
    for (auto i : mino) s += cosine_distance(pts[i], mc);
    g.outlier = s / static_cast<double>(mino.size());
  }
  g.pca = pca_ratio_covariance(pts);
  return g;
}

// Central differences of f at x, step h.
inline Vec finite_difference(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Shannon entropy in bits of a count vector.
inline double entropy_bits(const std::vector<int>& counts) {
  double total = 0.0;
  for (int c : counts) total += c;
  double h = 0.0;
  for (int c : counts) {
    if (c == 0) continue;
    const double p = c / total;
    h -= p * std::log(p) / std::log(2.0);
  }
  return h;
}

}  // namespace oracle
