#pragma once

// Reference implementations written independently of the library code paths,
// used to cross-check it.

#include <owttt/adapter.hpp>
#include <owttt/metrics.hpp>
#include <owttt/types.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace oracle {

struct GridMinimum {
  double tau = 1.0;
  bool degenerate = true;
};

// Exhaustive scan of the 101 candidates, straight from the definition: for
// each tau, split into {s <= tau} and {s > tau} and add the two population
// variances. Long double accumulation; strict < keeps the smallest tau.
inline GridMinimum brute_force_threshold(std::span<const double> raw, double lo = 0.0,
                                         double hi = 1.0) {
  std::vector<double> s;
  for (double v : raw) s.push_back(std::clamp(v, 0.0, 1.0));
  GridMinimum best;
  if (s.size() < 8) return best;
  long double best_obj = std::numeric_limits<long double>::infinity();
  for (int k = 0; k <= 100; ++k) {
    const double tau = k / 100.0;
    if (tau < lo - 1e-12 || tau > hi + 1e-12) continue;
    long double sum_lo = 0, sum_hi = 0;
    std::size_t n_lo = 0, n_hi = 0;
    for (double v : s) {
      if (v > tau) {
        sum_hi += v;
        ++n_hi;
      } else {
        sum_lo += v;
        ++n_lo;
      }
    }
    if (n_lo == 0 || n_hi == 0) continue;
    const long double m_lo = sum_lo / n_lo, m_hi = sum_hi / n_hi;
    long double v_lo = 0, v_hi = 0;
    for (double v : s) {
      if (v > tau) v_hi += (v - m_hi) * (v - m_hi);
      else v_lo += (v - m_lo) * (v - m_lo);
    }
    const long double obj = v_lo / n_lo + v_hi / n_hi;
    if (obj < best_obj) {
      best_obj = obj;
      best.tau = tau;
      best.degenerate = false;
    }
  }
  return best;
}

// Central differences of f around W, one entry at a time.
inline owttt::Matrix finite_difference(const std::function<double(const owttt::Matrix &)> &f,
                                       const owttt::Matrix &w, double h = 1e-5) {
  owttt::Matrix g(w.rows(), w.cols());
  owttt::Matrix probe = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2 * h);
    }
  return g;
}

inline double relative_error(const owttt::Matrix &a, const owttt::Matrix &b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

struct Recount {
  std::optional<double> acc_s, acc_n, acc_h;
};

inline Recount recount(std::span<const owttt::PredictionRecord> records, int num_known) {
  int weak = 0, weak_ok = 0, strong = 0, strong_ok = 0;
  for (const auto &r : records) {
    if (r.hidden_label < num_known) {
      ++weak;
      if (r.predicted_label == r.hidden_label) ++weak_ok;
    } else {
      ++strong;
      if (r.predicted_label == owttt::kReject) ++strong_ok;
    }
  }
  Recount out;
  if (weak > 0) out.acc_s = double(weak_ok) / weak;
  if (strong > 0) out.acc_n = double(strong_ok) / strong;
  if (out.acc_s && out.acc_n) {
    const double s = *out.acc_s, n = *out.acc_n;
    out.acc_h = (s + n) == 0 ? 0.0 : 2 * s * n / (s + n);
  }
  return out;
}

inline owttt::Vector random_unit(std::mt19937_64 &rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  owttt::Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = n(rng);
  return v / v.norm();
}

inline owttt::Matrix random_matrix(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c,
                                   double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  owttt::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

} // namespace oracle
