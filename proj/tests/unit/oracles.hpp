#pragma once

// Independent reference implementations used by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bagsac/numerics.hpp"

namespace oracle {

using bagsac::Matrix;
using bagsac::Mlp;
using bagsac::Vector;

/// Scalar triple loop over the flat parameter layout: per layer the weight
/// (n_out x n_in, column-major) followed by the bias.
inline std::vector<double> naive_forward(const Mlp& net, const std::vector<double>& x) {
  const auto& sizes = net.layer_sizes();
  const Vector& p = net.parameters();
  std::vector<double> a = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int n_in = sizes[l];
    const int n_out = sizes[l + 1];
    std::vector<double> z(static_cast<std::size_t>(n_out), 0.0);
    for (int o = 0; o < n_out; ++o) {
      double s = 0.0;
      for (int i = 0; i < n_in; ++i) s += p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(i * n_out + o))] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = s;
    }
    off += static_cast<std::size_t>(n_in * n_out);
    for (int o = 0; o < n_out; ++o) z[static_cast<std::size_t>(o)] += p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(o))];
    off += static_cast<std::size_t>(n_out);
    if (l + 2 < sizes.size()) {
      for (double& v : z) v = net.hidden_activation() == bagsac::Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
    }
    a = z;
  }
  return a;
}

/// Central differences of a scalar function of the net's parameters.
inline Vector finite_difference(Mlp& net, const std::function<double()>& loss, double h = 1e-5) {
  const Vector base = net.parameters();
  Vector g(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Vector p = base;
    p[i] = base[i] + h;
    net.set_parameters(p);
    const double up = loss();
    p[i] = base[i] - h;
    net.set_parameters(p);
    const double down = loss();
    g[i] = (up - down) / (2.0 * h);
  }
  net.set_parameters(base);
  return g;
}

struct GradientMatch {
  std::size_t total = 0;
  std::size_t within_tight = 0;  // relative error <= tight
  std::size_t within_loose = 0;  // relative error <= loose
  double worst = 0.0;

  double tight_fraction() const { return total == 0 ? 1.0 : static_cast<double>(within_tight) / static_cast<double>(total); }
};

/// Relative error |a - f| / max(|a|, |f|, floor).
inline GradientMatch compare_gradients(const Vector& analytic, const Vector& numeric, double tight = 1e-4,
                                       double loose = 1e-3, double floor = 1e-6) {
  GradientMatch m;
  m.total = static_cast<std::size_t>(analytic.size());
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    const double rel = std::abs(analytic[i] - numeric[i]) / denom;
    if (rel <= tight) ++m.within_tight;
    if (rel <= loose) ++m.within_loose;
    m.worst = std::max(m.worst, rel);
  }
  return m;
}

/// Ordered-pair double loop: sum_{i != j} ||p_i - p_j||^2 / (N (N - 1)).
inline double brute_force_disagreement(const std::vector<Vector>& p) {
  const double n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (i != j)
        for (Eigen::Index k = 0; k < p[i].size(); ++k) s += (p[i][k] - p[j][k]) * (p[i][k] - p[j][k]);
  return s / (n * (n - 1.0));
}

/// Sort, then interpolate at position q * (n - 1).
inline double sorted_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace oracle
