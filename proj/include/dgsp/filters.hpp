#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dgsp/transform.hpp"

namespace dgsp {

/// Frequency band Y: a set of frequency indices per fiber, or the shorthand
/// bottom(m) = indices 0..m-1 on every fiber. Empty bands are allowed.
class BandSpec {
 public:
  static BandSpec bottom(Index m) {
    if (m < 0) throw std::invalid_argument("BandSpec: bottom(m) needs m >= 0");
    BandSpec b;
    b.bottom_ = m;
    return b;
  }

  static BandSpec per_fiber(std::vector<std::vector<Index>> sets) {
    BandSpec b;
    b.sets_ = std::move(sets);
    return b;
  }

  bool is_bottom() const { return bottom_.has_value(); }
  Index bottom_width() const { return *bottom_; }

  std::vector<Index> indices_for(Index q, Index fiber_count, Index n) const {
    if (bottom_) {
      if (*bottom_ > n)
        throw std::invalid_argument("BandSpec: bottom(" + std::to_string(*bottom_) +
                                    ") exceeds n = " + std::to_string(n));
      std::vector<Index> idx(static_cast<std::size_t>(*bottom_));
      for (Index i = 0; i < *bottom_; ++i) idx[static_cast<std::size_t>(i)] = i;
      return idx;
    }
    if (static_cast<Index>(sets_.size()) != fiber_count)
      throw DimensionError("BandSpec: per-fiber set count " + std::to_string(sets_.size()) +
                           " does not match fiber count " + std::to_string(fiber_count));
    const auto& s = sets_[static_cast<std::size_t>(q)];
    for (Index i : s)
      if (i < 0 || i >= n)
        throw std::invalid_argument("BandSpec: frequency index " + std::to_string(i) + " out of range");
    return s;
  }

 private:
  std::optional<Index> bottom_;
  std::vector<std::vector<Index>> sets_;
};

/// Kernel on fibers x frequency indices. Table-backed kinds (table, lambda,
/// signal) carry an explicit fiber_count x n matrix; band kernels stay
/// symbolic until materialized against an ensemble.
struct FilterKernel {
  enum class Kind { Table, Band, Lambda, Signal };

  Kind kind = Kind::Table;
  Eigen::MatrixXd table;
  std::optional<BandSpec> band;

  static FilterKernel from_table(Eigen::MatrixXd t) { return {Kind::Table, std::move(t), std::nullopt}; }
  static FilterKernel from_band(BandSpec b) { return {Kind::Band, {}, std::move(b)}; }

  Eigen::MatrixXd materialize(const OperatorEnsemble& ens) const {
    const Index Q = ens.fiber_count();
    const Index n = ens.vertex_count();
    if (kind == Kind::Band) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(Q, n);
      for (Index q = 0; q < Q; ++q)
        for (Index i : band->indices_for(q, Q, n)) t(q, i) = 1.0;
      return t;
    }
    if (table.rows() != Q || table.cols() != n)
      throw DimensionError("FilterKernel: table shape " + std::to_string(table.rows()) + "x" +
                           std::to_string(table.cols()) + " does not match ensemble " +
                           std::to_string(Q) + "x" + std::to_string(n));
    return table;
  }
};

/// Kernel Lambda: (x,i) -> lambda_x(i). Its filter is the mean operator E[x].
inline FilterKernel lambda_kernel(const OperatorEnsemble& ens) {
  Eigen::MatrixXd t(ens.fiber_count(), ens.vertex_count());
  for (Index q = 0; q < ens.fiber_count(); ++q)
    t.row(q) = ens.fiber(q).op.eigensystem().eigenvalues.transpose();
  return {FilterKernel::Kind::Lambda, std::move(t), std::nullopt};
}

/// Kernel induced by a signal g: the transform table of g. The induced
/// filter sends f to inverse(forward(g) .* forward(f)).
inline FilterKernel signal_kernel(const Signal& g, const OperatorEnsemble& ens) {
  return {FilterKernel::Kind::Signal, forward(g, ens).table, std::nullopt};
}

/// Kernel that is 1 everywhere; its filter is the identity.
inline FilterKernel all_pass_kernel(const OperatorEnsemble& ens) {
  return FilterKernel::from_table(Eigen::MatrixXd::Ones(ens.fiber_count(), ens.vertex_count()));
}

/// Materialized convolution filter sum_q w_q sum_i Gamma(q,i) v v^T.
struct ConvolutionFilter {
  Eigen::MatrixXd matrix;
  FilterKernel kernel;

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return matrix * f; }
  Signal apply(const Signal& f) const { return Signal(f.vertex_set, matrix * f.values); }
};

namespace detail {

// Warn when a kernel is evaluated per index across a near-degenerate
// eigenvalue cluster; the per-index application is basis-dependent there.
inline void warn_on_degenerate_fibers(const Eigen::MatrixXd& table, const OperatorEnsemble& ens) {
  const Index n = ens.vertex_count();
  const double kernel_scale = 1.0 + table.cwiseAbs().maxCoeff();
  for (Index q = 0; q < ens.fiber_count(); ++q) {
    const Eigen::VectorXd& ev = ens.fiber(q).op.eigensystem().eigenvalues;
    const double gap_tol = 1e-9 * (1.0 + std::abs(ev(n - 1)));
    for (Index i = 0; i + 1 < n; ++i) {
      if (ev(i + 1) - ev(i) < gap_tol &&
          std::abs(table(q, i + 1) - table(q, i)) > 1e-9 * kernel_scale) {
        warn("fiber '" + ens.fiber(q).op.name() + "' has eigenvalue gap " +
             std::to_string(ev(i + 1) - ev(i)) + " at index " + std::to_string(i) +
             " but the kernel differs across the cluster; result is basis-dependent");
        break;
      }
    }
  }
}

}  // namespace detail

/// Build the dense filter matrix for a kernel. Per-fiber terms are computed
/// in parallel; the reduction is sequential in fiber order.
inline ConvolutionFilter convolution_matrix(const FilterKernel& kernel, const OperatorEnsemble& ens) {
  const Index Q = ens.fiber_count();
  const Index n = ens.vertex_count();
  const Eigen::MatrixXd table = kernel.materialize(ens);
  detail::warn_on_degenerate_fibers(table, ens);

  std::vector<Eigen::MatrixXd> terms(static_cast<std::size_t>(Q));
  detail::parallel_for(static_cast<std::size_t>(Q), [&](std::size_t q) {
    const Fiber& fib = ens.fiber(static_cast<Index>(q));
    const Eigen::MatrixXd& V = fib.op.eigensystem().eigenvectors;
    terms[q] = fib.weight * (V * table.row(static_cast<Index>(q)).asDiagonal() * V.transpose());
  });
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& term : terms) m += term;
  return {std::move(m), kernel};
}

/// Band-pass filter B_Y: an expectation of orthogonal projections, with
/// spectrum inside [0,1]. Not a projection itself unless the distribution
/// is a delta.
inline ConvolutionFilter band_pass(const BandSpec& band, const OperatorEnsemble& ens) {
  return convolution_matrix(FilterKernel::from_band(band), ens);
}

/// ||B f - f||_2; f is (Y,eps)-bandlimited for every eps at or above this.
inline double bandlimit_residual(const Signal& f, const ConvolutionFilter& B) {
  if (B.matrix.rows() != f.size())
    throw DimensionError("bandlimit_residual: filter size " + std::to_string(B.matrix.rows()) +
                         " does not match signal length " + std::to_string(f.size()));
  return (B.matrix * f.values - f.values).norm();
}

/// Filter whose fiber action is sum_i a_i(t) x_t^i with each coefficient
/// a_i a polynomial in the family parameter t.
struct BiPolynomial {
  Eigen::MatrixXd coeffs;  // n x (degree+1); (i,s) = coefficient of t^s in a_i
  Index degree = 0;
  IntervalFamily family;
};

/// Evaluates a kernel's multiplier vector on the fiber at parameter t.
using FiberMultiplier = std::function<Eigen::VectorXd(double t, const EigenSystem& es)>;

/// Turn a symbolic kernel into a multiplier callable usable at any t.
/// Table and signal kernels are tied to compiled fibers and are rejected.
inline FiberMultiplier fiber_multiplier(const FilterKernel& kernel) {
  switch (kernel.kind) {
    case FilterKernel::Kind::Lambda:
      return [](double, const EigenSystem& es) { return es.eigenvalues; };
    case FilterKernel::Kind::Band: {
      if (!kernel.band->is_bottom())
        throw std::invalid_argument("fiber_multiplier: per-fiber band sets are tied to compiled fibers");
      const Index m = kernel.band->bottom_width();
      return [m](double, const EigenSystem& es) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(es.size());
        for (Index i = 0; i < m && i < es.size(); ++i) v(i) = 1.0;
        return v;
      };
    }
    default:
      throw std::invalid_argument("fiber_multiplier: table kernels are only defined at compiled fibers");
  }
}

/// Fit a bi-polynomial representation: per parameter in tprime, solve the
/// Vandermonde system in the fiber's eigenvalues to express the multiplier
/// as a degree n-1 polynomial in x_t, then least-squares fit each monomial
/// coefficient by a degree-d polynomial in t.
inline BiPolynomial fit_bipolynomial(const IntervalFamily& family, const FiberMultiplier& gamma,
                                     const std::vector<double>& tprime, Index degree) {
  if (degree < 0) throw std::invalid_argument("fit_bipolynomial: degree must be >= 0");
  if (static_cast<Index>(tprime.size()) < degree + 1)
    throw std::invalid_argument("fit_bipolynomial: need at least degree+1 parameters");
  const Index n = family.L1.size();
  const Index T = static_cast<Index>(tprime.size());

  Eigen::MatrixXd poly_at_t(T, n);  // row per t: coefficients a_0..a_{n-1}
  for (Index k = 0; k < T; ++k) {
    const double t = tprime[static_cast<std::size_t>(k)];
    const SymOperator x_t = fiber_at(family, t);
    const EigenSystem& es = x_t.eigensystem();
    const Eigen::VectorXd& ev = es.eigenvalues;
    const double gap_tol = 1e-9 * (1.0 + std::abs(ev(n - 1)));
    for (Index i = 0; i + 1 < n; ++i)
      if (ev(i + 1) - ev(i) <= gap_tol)
        throw NumericalError("fit_bipolynomial: fiber at t=" + std::to_string(t) +
                             " has repeated eigenvalues (gap " + std::to_string(ev(i + 1) - ev(i)) +
                             " at index " + std::to_string(i) + ")");

    Eigen::MatrixXd vand(n, n);
    for (Index i = 0; i < n; ++i) {
      double p = 1.0;
      for (Index s = 0; s < n; ++s) {
        vand(i, s) = p;
        p *= ev(i);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(vand, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!(cond < 1e12))
      throw NumericalError("fit_bipolynomial: Vandermonde at t=" + std::to_string(t) +
                           " is ill-conditioned (estimate " + std::to_string(cond) + ")");
    poly_at_t.row(k) = svd.solve(gamma(t, es)).transpose();
  }

  Eigen::MatrixXd tv(T, degree + 1);
  for (Index k = 0; k < T; ++k) {
    double p = 1.0;
    for (Index s = 0; s <= degree; ++s) {
      tv(k, s) = p;
      p *= tprime[static_cast<std::size_t>(k)];
    }
  }
  Eigen::MatrixXd sol = tv.colPivHouseholderQr().solve(poly_at_t);  // (d+1) x n
  return {sol.transpose(), degree, family};
}

inline BiPolynomial fit_bipolynomial(const IntervalFamily& family, const FilterKernel& kernel,
                                     const std::vector<double>& tprime, Index degree) {
  return fit_bipolynomial(family, fiber_multiplier(kernel), tprime, degree);
}

/// Evaluate sum_i a_i(t) x_t^i with Horner evaluation of both the t-polys
/// and the matrix polynomial.
inline Eigen::MatrixXd eval_bipolynomial(const BiPolynomial& bp, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("eval_bipolynomial: t = " + std::to_string(t) + " outside [0,1]");
  const Index n = bp.family.L1.size();
  Eigen::VectorXd a(n);
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index s = bp.degree; s >= 0; --s) acc = acc * t + bp.coeffs(i, s);
    a(i) = acc;
  }
  const Eigen::MatrixXd x = fiber_at(bp.family, t).matrix();
  Eigen::MatrixXd m = a(n - 1) * Eigen::MatrixXd::Identity(n, n);
  for (Index i = n - 2; i >= 0; --i) {
    m = m * x;
    m.diagonal().array() += a(i);
  }
  return m;
}

}  // namespace dgsp
