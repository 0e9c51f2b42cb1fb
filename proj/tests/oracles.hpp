#pragma once

// Naive reference implementations used only by tests. They work on dense
// int matrices built straight from trace events and follow the textbook
// formulas literally, sharing no code with the library's packed paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "imago/trace.hpp"

namespace oracle {

using Dense = std::vector<std::vector<int>>;  // [feature-1][time-1]

inline Dense dense(const imago::Trace& t, imago::ImageShape shape) {
  Dense z(static_cast<std::size_t>(shape.features), std::vector<int>(static_cast<std::size_t>(shape.horizon), 0));
  for (const auto& e : t.events()) z[static_cast<std::size_t>(e.feature - 1)][static_cast<std::size_t>(e.time - 1)] = 1;
  return z;
}

struct Model {
  int features = 0, horizon = 0, levels = 0;
  Dense ci;                          // features x (horizon*levels)
  std::vector<std::vector<long>> pi;  // same shape
  std::vector<long> cw;
  std::vector<double> cl;
};

inline Model train(const std::vector<imago::Trace>& traces, imago::ImageShape shape, int levels) {
  Model m;
  m.features = shape.features;
  m.horizon = shape.horizon;
  m.levels = levels;
  const auto width = static_cast<std::size_t>(shape.horizon * levels);
  m.ci.assign(static_cast<std::size_t>(shape.features), std::vector<int>(width, 0));
  m.pi.assign(static_cast<std::size_t>(shape.features), std::vector<long>(width, 0));
  m.cw.assign(static_cast<std::size_t>(levels), 0);
  std::vector<std::vector<double>> labels(static_cast<std::size_t>(levels));
  for (const auto& t : traces) {
    const int tc = static_cast<int>(std::floor(levels * t.xi())) + 1 > levels
                       ? levels
                       : static_cast<int>(std::floor(levels * t.xi())) + 1;
    m.cw[static_cast<std::size_t>(tc - 1)] += 1;
    labels[static_cast<std::size_t>(tc - 1)].push_back(t.xi());
    for (const auto& e : t.events()) {
      const auto col = static_cast<std::size_t>((tc - 1) * shape.horizon + e.time - 1);
      m.ci[static_cast<std::size_t>(e.feature - 1)][col] = 1;
      m.pi[static_cast<std::size_t>(e.feature - 1)][col] += 1;
    }
  }
  // Labels summed in ascending order, the order the model contract fixes
  // for order independence.
  for (auto& l : labels) {
    std::sort(l.begin(), l.end());
    double s = 0.0;
    for (double x : l) s += x;
    m.cl.push_back(s);
  }
  return m;
}

inline double ca_distance(const Model& m, const Dense& z, int i) {
  double d = 0.0;
  for (int r = 0; r < m.features; ++r) {
    for (int c = 0; c < m.horizon; ++c) {
      d += std::abs(z[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -
                    m.ci[static_cast<std::size_t>(r)][static_cast<std::size_t>((i - 1) * m.horizon + c)]);
    }
  }
  return d;
}

inline double pa_distance(const Model& m, const Dense& z, int j) {
  double d = 0.0;
  for (int r = 0; r < m.features; ++r) {
    for (int c = 0; c < m.horizon; ++c) {
      const auto col = static_cast<std::size_t>((j - 1) * m.horizon + c);
      const double p = m.ci[static_cast<std::size_t>(r)][col] *
                       static_cast<double>(m.pi[static_cast<std::size_t>(r)][col]) /
                       static_cast<double>(m.cw[static_cast<std::size_t>(j - 1)]);
      d += std::fabs(z[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] - p);
    }
  }
  return d;
}

struct Decision {
  int cluster = 0;
  double xi_hat = 0.0;
};

// Distances within `tie_eps` count as ties; the smallest cluster wins.
template <class Distance>
Decision argmin_cluster(const Model& m, const Dense& z, Distance dist, double tie_eps) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= m.levels; ++i) {
    if (m.cw[static_cast<std::size_t>(i - 1)] == 0) continue;
    const double d = dist(m, z, i);
    if (d < best_d - tie_eps) {
      best = i;
      best_d = d;
    }
  }
  return {best, m.cl[static_cast<std::size_t>(best - 1)] / static_cast<double>(m.cw[static_cast<std::size_t>(best - 1)])};
}

inline Decision ca(const Model& m, const Dense& z) { return argmin_cluster(m, z, ca_distance, 0.0); }
inline Decision pa(const Model& m, const Dense& z) { return argmin_cluster(m, z, pa_distance, 1e-9); }

inline double fnn(const std::vector<Dense>& train, const std::vector<double>& labels, const Dense& z) {
  long best = std::numeric_limits<long>::max();
  double out = 0.0;
  for (std::size_t k = 0; k < train.size(); ++k) {
    long d = 0;
    for (std::size_t r = 0; r < z.size(); ++r) {
      for (std::size_t c = 0; c < z[r].size(); ++c) d += std::abs(z[r][c] - train[k][r][c]);
    }
    if (d < best) {
      best = d;
      out = labels[k];
    }
  }
  return out;
}

inline std::vector<std::vector<double>> lam(const std::vector<Dense>& train, const std::vector<double>& labels) {
  const auto rows = train.front().size();
  const auto cols = train.front().front().size();
  std::vector<std::vector<double>> m(rows, std::vector<double>(cols, -std::numeric_limits<double>::infinity()));
  for (std::size_t k = 0; k < train.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) m[r][c] = std::max(m[r][c], labels[k] - train[k][r][c]);
    }
  }
  return m;
}

inline double lam_predict(const std::vector<std::vector<double>>& m, const Dense& z) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m[r].size(); ++c) best = std::min(best, z[r][c] + m[r][c]);
  }
  return best;
}

/// Literal sweep: mean |xi - c| for every grid point, O(n * points).
inline std::vector<double> sweep(const std::vector<double>& labels, int points) {
  std::vector<double> out;
  for (int g = 0; g < points; ++g) {
    const double c = static_cast<double>(g) / (points - 1);
    double s = 0.0;
    for (double x : labels) s += std::fabs(x - c);
    out.push_back(s / static_cast<double>(labels.size()));
  }
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
