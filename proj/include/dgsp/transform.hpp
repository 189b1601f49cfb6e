#pragma once

#include <cmath>
#include <utility>

#include "dgsp/ensemble.hpp"

namespace dgsp {

/// Coefficient table of the distributional Fourier transform: entry (q,i) is
/// sqrt(w_q) * <f, v_{x_q}(i)>. With this scaling the Frobenius norm of the
/// table equals the signal norm exactly in the discretized measure.
struct SpectralCoefficients {
  Eigen::MatrixXd table;  // fiber_count x n
  OperatorEnsemble ensemble;

  Index fiber_count() const { return table.rows(); }
  Index vertex_count() const { return table.cols(); }
};

/// Per-fiber signals on V, one row per fiber. Rows produced by
/// fiberwise_inverse already carry their fiber weights.
struct FiberSignals {
  Eigen::MatrixXd table;  // fiber_count x n
};

namespace detail {

inline void check_signal_matches(const Signal& f, const OperatorEnsemble& ens, const char* where) {
  if (f.size() != ens.vertex_count())
    throw DimensionError(std::string(where) + ": signal length " + std::to_string(f.size()) +
                         " does not match ensemble vertex count " +
                         std::to_string(ens.vertex_count()));
  if (!same_vertex_set(f.vertex_set, ens.vertex_set()))
    throw DimensionError(std::string(where) + ": signal and ensemble vertex sets differ");
}

inline void check_table_shape(const Eigen::MatrixXd& table, const OperatorEnsemble& ens,
                              const char* where) {
  if (table.rows() != ens.fiber_count() || table.cols() != ens.vertex_count())
    throw DimensionError(std::string(where) + ": table shape " + std::to_string(table.rows()) + "x" +
                         std::to_string(table.cols()) + " does not match ensemble " +
                         std::to_string(ens.fiber_count()) + "x" +
                         std::to_string(ens.vertex_count()));
}

}  // namespace detail

/// Distributional Fourier transform.
inline SpectralCoefficients forward(const Signal& f, const OperatorEnsemble& ens) {
  detail::check_signal_matches(f, ens, "forward");
  const Index Q = ens.fiber_count();
  const Index n = ens.vertex_count();
  Eigen::MatrixXd table(Q, n);
  for (Index q = 0; q < Q; ++q) {
    const Fiber& fib = ens.fiber(q);
    table.row(q) =
        std::sqrt(fib.weight) * (fib.op.eigensystem().eigenvectors.transpose() * f.values).transpose();
  }
  return {std::move(table), ens};
}

/// Left inverse of the transform: sum over fibers of sqrt(w_q)-weighted
/// inverse fiber transforms, in fiber order.
inline Signal inverse(const SpectralCoefficients& c) {
  detail::check_table_shape(c.table, c.ensemble, "inverse");
  const Index n = c.ensemble.vertex_count();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Index q = 0; q < c.ensemble.fiber_count(); ++q) {
    const Fiber& fib = c.ensemble.fiber(q);
    out += std::sqrt(fib.weight) * (fib.op.eigensystem().eigenvectors * c.table.row(q).transpose());
  }
  return Signal(c.ensemble.vertex_set(), std::move(out));
}

/// Fiberwise inverse transforms. Row q = sqrt(w_q) * sum_i c(q,i) v_{x_q}(i),
/// so rows carry their fiber weights and summing them in fiber order
/// (ExpectationMode::Prescaled) reproduces inverse() exactly.
inline FiberSignals fiberwise_inverse(const SpectralCoefficients& c) {
  detail::check_table_shape(c.table, c.ensemble, "fiberwise_inverse");
  Eigen::MatrixXd rows(c.ensemble.fiber_count(), c.ensemble.vertex_count());
  for (Index q = 0; q < c.ensemble.fiber_count(); ++q) {
    const Fiber& fib = c.ensemble.fiber(q);
    rows.row(q) =
        std::sqrt(fib.weight) * (fib.op.eigensystem().eigenvectors * c.table.row(q).transpose()).transpose();
  }
  return {std::move(rows)};
}

enum class ExpectationMode {
  /// Rows came from fiberwise_inverse and already carry their weights:
  /// plain sum in fiber order.
  Prescaled,
  /// Rows are raw per-fiber signals: weighted mean sum_q w_q * row_q.
  Raw,
};

/// Aggregation over the base space.
inline Signal expectation(const FiberSignals& fs, const OperatorEnsemble& ens, ExpectationMode mode) {
  detail::check_table_shape(fs.table, ens, "expectation");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ens.vertex_count());
  for (Index q = 0; q < ens.fiber_count(); ++q) {
    const double scale = (mode == ExpectationMode::Prescaled) ? 1.0 : ens.fiber(q).weight;
    out += scale * fs.table.row(q).transpose();
  }
  return Signal(ens.vertex_set(), std::move(out));
}

}  // namespace dgsp
