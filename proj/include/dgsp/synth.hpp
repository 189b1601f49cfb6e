#pragma once

#include <random>
#include <vector>

#include "dgsp/core.hpp"

// Deterministic synthetic fixtures: grid and geometric graphs plus
// bandlimited or white-noise signal batches. All randomness flows through
// the caller's generator, so a seed pins every byte of output.
namespace dgsp::synth {

inline EdgeList lattice_edges(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lattice: need rows, cols >= 1");
  EdgeList list;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index v = r * cols + c;
      if (c + 1 < cols) list.edges.push_back({v, v + 1, 1.0});
      if (r + 1 < rows) list.edges.push_back({v, v + cols, 1.0});
    }
  }
  return list;
}

/// Edges between vertical neighbours only (columns of the grid).
inline EdgeList lattice_vertical_edges(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lattice: need rows, cols >= 1");
  EdgeList list;
  for (Index r = 0; r + 1 < rows; ++r)
    for (Index c = 0; c < cols; ++c) list.edges.push_back({r * cols + c, (r + 1) * cols + c, 1.0});
  return list;
}

/// Edges between horizontal neighbours only (rows of the grid).
inline EdgeList lattice_horizontal_edges(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lattice: need rows, cols >= 1");
  EdgeList list;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c + 1 < cols; ++c) list.edges.push_back({r * cols + c, r * cols + c + 1, 1.0});
  return list;
}

/// Grid positions (col, row), optionally jittered so k-NN graphs on them
/// are non-degenerate.
inline std::vector<std::vector<double>> lattice_coords(Index rows, Index cols, double jitter = 0.0,
                                                       std::mt19937_64* gen = nullptr) {
  if (jitter > 0.0 && !gen)
    throw std::invalid_argument("lattice_coords: jitter needs a generator");
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(rows * cols));
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double x = static_cast<double>(c);
      double y = static_cast<double>(r);
      if (jitter > 0.0) {
        x += jitter * detail::draw_gaussian(*gen);
        y += jitter * detail::draw_gaussian(*gen);
      }
      pts.push_back({x, y});
    }
  return pts;
}

struct GeometricGraph {
  std::vector<std::vector<double>> coords;
  EdgeList edges;
};

/// Uniform points in the unit square, connected below the given radius.
inline GeometricGraph random_geometric(Index n, double radius, std::mt19937_64& gen) {
  if (n < 2) throw std::invalid_argument("random_geometric: need n >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("random_geometric: radius must be > 0");
  GeometricGraph g;
  g.coords.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    g.coords.push_back({detail::draw_unit(gen), detail::draw_unit(gen)});
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double dx = g.coords[static_cast<std::size_t>(i)][0] -
                        g.coords[static_cast<std::size_t>(j)][0];
      const double dy = g.coords[static_cast<std::size_t>(i)][1] -
                        g.coords[static_cast<std::size_t>(j)][1];
      if (dx * dx + dy * dy <= radius * radius) g.edges.edges.push_back({i, j, 1.0});
    }
  return g;
}

/// Rows are signals: random Gaussian coefficients on the bottom-m
/// eigenvectors of the reference operator, plus white Gaussian noise.
/// Draw order per signal: m coefficients, then n noise values.
inline Eigen::MatrixXd bandlimited_signals(const SymOperator& reference, Index m, double scale,
                                           double noise_sigma, Index count,
                                           std::mt19937_64& gen) {
  const Index n = reference.size();
  if (m < 1 || m > n) throw std::invalid_argument("bandlimited_signals: m must lie in [1, n]");
  if (count < 1) throw std::invalid_argument("bandlimited_signals: count must be >= 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("bandlimited_signals: sigma must be >= 0");
  const Eigen::MatrixXd base = reference.eigensystem().eigenvectors.leftCols(m);
  Eigen::MatrixXd rows(count, n);
  for (Index s = 0; s < count; ++s) {
    Eigen::VectorXd coeff(m);
    for (Index i = 0; i < m; ++i) coeff(i) = scale * detail::draw_gaussian(gen);
    Eigen::VectorXd f = base * coeff;
    for (Index i = 0; i < n; ++i) f(i) += noise_sigma * detail::draw_gaussian(gen);
    rows.row(s) = f.transpose();
  }
  return rows;
}

inline Eigen::MatrixXd random_signals(Index n, double scale, Index count, std::mt19937_64& gen) {
  if (n < 1 || count < 1) throw std::invalid_argument("random_signals: need n, count >= 1");
  Eigen::MatrixXd rows(count, n);
  for (Index s = 0; s < count; ++s)
    for (Index i = 0; i < n; ++i) rows(s, i) = scale * detail::draw_gaussian(gen);
  return rows;
}

}  // namespace dgsp::synth
