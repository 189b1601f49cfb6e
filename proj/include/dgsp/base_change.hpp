#pragma once

#include <utility>
#include <vector>

#include "dgsp/filters.hpp"

namespace dgsp {

/// Kernel pulled back through a base map: entry (q,i) = Gamma(h(y_q), i),
/// one row per source fiber.
struct PullbackKernel {
  Eigen::MatrixXd table;
};

inline BaseMap stretch_map(double eta) { return BaseMap::stretch(eta); }

namespace detail {

inline std::vector<double> mapped_params(const BaseMap& h, const OperatorEnsemble& Y_ens) {
  if (h.kind() == BaseMap::Kind::Discrete)
    throw std::invalid_argument("base change: discrete maps need the target given as an ensemble");
  if (!Y_ens.has_params())
    throw std::invalid_argument("base change: source ensemble has no fiber parameters");
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(Y_ens.fiber_count()));
  for (const Fiber& f : Y_ens.fibers()) {
    const double x = h.map_param(*f.param);
    if (x < 0.0 || x > 1.0)
      throw std::invalid_argument("base change: mapped parameter " + std::to_string(x) +
                                  " leaves [0,1]");
    xs.push_back(x);
  }
  return xs;
}

inline void check_discrete_map(const BaseMap& h, const OperatorEnsemble& Y_ens,
                               const OperatorEnsemble& X_ens) {
  if (h.kind() != BaseMap::Kind::Discrete)
    throw std::invalid_argument("base change: ensemble targets require a discrete map");
  if (static_cast<Index>(h.index_map().size()) != Y_ens.fiber_count())
    throw std::invalid_argument("base change: index map covers " +
                                std::to_string(h.index_map().size()) + " fibers, source has " +
                                std::to_string(Y_ens.fiber_count()));
  for (std::size_t q : h.index_map())
    if (q >= static_cast<std::size_t>(X_ens.fiber_count()))
      throw std::invalid_argument("base change: index map points past the target ensemble");
}

}  // namespace detail

/// Gamma(h(y_q), .) rows for a functional map into an interval family.
inline PullbackKernel pullback_kernel(const FilterKernel& kernel, const BaseMap& h,
                                      const OperatorEnsemble& Y_ens,
                                      const IntervalFamily& family) {
  const auto xs = detail::mapped_params(h, Y_ens);
  const auto mult = fiber_multiplier(kernel);
  const Index Q = Y_ens.fiber_count();
  const Index n = Y_ens.vertex_count();
  PullbackKernel pk;
  pk.table.resize(Q, n);
  for (Index q = 0; q < Q; ++q) {
    const SymOperator op = fiber_at(family, xs[static_cast<std::size_t>(q)]);
    pk.table.row(q) = mult(xs[static_cast<std::size_t>(q)], op.eigensystem()).transpose();
  }
  return pk;
}

/// Gamma(h(y_q), .) rows for a discrete map into a compiled ensemble.
inline PullbackKernel pullback_kernel(const FilterKernel& kernel, const BaseMap& h,
                                      const OperatorEnsemble& Y_ens,
                                      const OperatorEnsemble& X_ens) {
  detail::check_discrete_map(h, Y_ens, X_ens);
  const Eigen::MatrixXd gamma = kernel.materialize(X_ens);
  PullbackKernel pk;
  pk.table.resize(Y_ens.fiber_count(), Y_ens.vertex_count());
  for (Index q = 0; q < Y_ens.fiber_count(); ++q)
    pk.table.row(q) = gamma.row(static_cast<Index>(h.index_map()[static_cast<std::size_t>(q)]));
  return pk;
}

/// F_{Gamma,h*}: fiberwise convolution at the mapped fiber, aggregated with
/// the source weights. Matrix = sum_q w_q V_{h(y_q)} diag(Gamma(h(y_q),.))
/// V_{h(y_q)}^T, so it depends on h only through the pushforward of mu_Y.
inline Eigen::MatrixXd pullback_filter_via_fibers(const FilterKernel& kernel, const BaseMap& h,
                                                  const OperatorEnsemble& Y_ens,
                                                  const IntervalFamily& family) {
  const auto xs = detail::mapped_params(h, Y_ens);
  const auto mult = fiber_multiplier(kernel);
  const Index Q = Y_ens.fiber_count();
  const Index n = Y_ens.vertex_count();
  std::vector<Eigen::MatrixXd> terms(static_cast<std::size_t>(Q));
  detail::parallel_for(static_cast<std::size_t>(Q), [&](std::size_t q) {
    const SymOperator op = fiber_at(family, xs[q]);
    const EigenSystem& eig = op.eigensystem();
    const Eigen::VectorXd g = mult(xs[q], eig);
    terms[q] = Y_ens.fiber(static_cast<Index>(q)).weight * eig.eigenvectors * g.asDiagonal() *
               eig.eigenvectors.transpose();
  });
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& term : terms) m += term;
  return m;
}

inline Eigen::MatrixXd pullback_filter_via_fibers(const FilterKernel& kernel, const BaseMap& h,
                                                  const OperatorEnsemble& Y_ens,
                                                  const OperatorEnsemble& X_ens) {
  detail::check_discrete_map(h, Y_ens, X_ens);
  if (X_ens.vertex_count() != Y_ens.vertex_count())
    throw DimensionError("base change: source and target ensembles disagree on vertex count");
  const Eigen::MatrixXd gamma = kernel.materialize(X_ens);
  const Index n = Y_ens.vertex_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index q = 0; q < Y_ens.fiber_count(); ++q) {
    const Index p = static_cast<Index>(h.index_map()[static_cast<std::size_t>(q)]);
    const EigenSystem& eig = X_ens.fiber(p).op.eigensystem();
    m += Y_ens.fiber(q).weight * eig.eigenvectors * gamma.row(p).transpose().asDiagonal() *
         eig.eigenvectors.transpose();
  }
  return m;
}

/// F_{Gamma^h}: the pulled-back kernel applied with the *source* fiber
/// eigenvectors. Matrix = sum_q w_q V_{y_q} diag(Gamma(h(y_q),.)) V_{y_q}^T.
/// Generally not a convolution filter on Y, and != F_{Gamma,h*} unless the
/// eigenvectors at y_q and h(y_q) agree (identity, inclusion, stretch).
inline Eigen::MatrixXd pullback_kernel_filter(const PullbackKernel& pk,
                                              const OperatorEnsemble& Y_ens) {
  return convolution_matrix(FilterKernel::from_table(pk.table), Y_ens).matrix;
}

inline Eigen::MatrixXd pullback_kernel_filter(const FilterKernel& kernel, const BaseMap& h,
                                              const OperatorEnsemble& Y_ens,
                                              const IntervalFamily& family) {
  return pullback_kernel_filter(pullback_kernel(kernel, h, Y_ens, family), Y_ens);
}

inline Eigen::MatrixXd pullback_kernel_filter(const FilterKernel& kernel, const BaseMap& h,
                                              const OperatorEnsemble& Y_ens,
                                              const OperatorEnsemble& X_ens) {
  return pullback_kernel_filter(pullback_kernel(kernel, h, Y_ens, X_ens), Y_ens);
}

/// Witness that stretching the interval family only rescales each fiber:
/// with x = h_eta(y), H_x = x L1 + (1-x) eta L2 equals c L_y for
/// c = eta / (1 - y + y eta). Returns c and ||H_x - c L_y||_max.
struct StretchConsistency {
  double c = 0.0;
  double residual = 0.0;
};

inline StretchConsistency stretch_consistency(const SymOperator& L1, const SymOperator& L2,
                                              double eta, double y) {
  if (!(eta > 0.0)) throw std::invalid_argument("stretch_consistency: eta must be > 0");
  if (y < 0.0 || y > 1.0) throw std::invalid_argument("stretch_consistency: y must lie in [0,1]");
  if (L1.size() != L2.size())
    throw DimensionError("stretch_consistency: operators have mismatched sizes");
  const double x = y * eta / (1.0 - y + y * eta);
  const double c = eta / (1.0 - y + y * eta);
  const Eigen::MatrixXd H = x * L1.matrix() + (1.0 - x) * eta * L2.matrix();
  const Eigen::MatrixXd Ly = y * L1.matrix() + (1.0 - y) * L2.matrix();
  StretchConsistency out;
  out.c = c;
  out.residual = (H - c * Ly).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace dgsp
