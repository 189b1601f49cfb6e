#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "dgsp/filters.hpp"

namespace dgsp {

/// Eigendecomposition of a band-pass filter. Eigenvalues ascend and are
/// checked to lie in [-1e-10, 1+1e-10], then clipped into [0,1].
struct BandPassSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  Eigen::MatrixXd source_matrix;

  Index size() const { return eigenvalues.size(); }
};

inline BandPassSpectrum analyze(const ConvolutionFilter& B) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B.matrix);
  if (solver.info() != Eigen::Success)
    throw NumericalError("analyze: eigendecomposition of band-pass filter failed");
  BandPassSpectrum s;
  s.eigenvalues = solver.eigenvalues();
  s.eigenvectors = solver.eigenvectors();
  detail::apply_sign_convention(s.eigenvectors);
  s.source_matrix = B.matrix;
  for (Index i = 0; i < s.size(); ++i) {
    if (s.eigenvalues(i) < -1e-10 || s.eigenvalues(i) > 1.0 + 1e-10)
      throw NumericalError("analyze: band-pass eigenvalue " + std::to_string(s.eigenvalues(i)) +
                           " escapes [0,1]; the ensemble is malformed");
    s.eigenvalues(i) = std::clamp(s.eigenvalues(i), 0.0, 1.0);
  }
  return s;
}

/// Cut selection: keep the top m = n-j eigenvectors either by sample budget
/// or by an eigenvalue threshold on the discarded part.
struct CutRule {
  enum class Mode { Budget, Threshold };
  Mode mode = Mode::Budget;
  Index budget = 0;
  double threshold = 0.0;

  static CutRule by_budget(Index m) { return {Mode::Budget, m, 0.0}; }
  static CutRule by_threshold(double tau) { return {Mode::Threshold, 0, tau}; }
};

/// A uniqueness set V_j with its certificate data: G_j holds the V_j-rows of
/// the top n-j eigenvectors of B_Y, sigma_j = ||G_j^{-1}||_2, and lambda_j is
/// the largest discarded eigenvalue (0 when nothing is discarded).
struct SamplingPlan {
  Index j = 0;
  std::vector<Index> vertices;  // V_j, ascending, size n-j
  Eigen::MatrixXd basis;        // n x (n-j): eigenvectors j+1..n of B_Y
  Eigen::MatrixXd G;            // (n-j) x (n-j)
  double sigma_j = 0.0;
  double lambda_j = 0.0;
};

/// Pick V_j by column-pivoted QR on the transposed eigenvector block: the
/// greedy pivot order selects well-conditioned rows, which keeps sigma_j
/// small.
inline SamplingPlan plan(const BandPassSpectrum& spectrum, const CutRule& cut) {
  const Index n = spectrum.size();
  Index j = 0;
  if (cut.mode == CutRule::Mode::Budget) {
    if (cut.budget < 1 || cut.budget > n)
      throw std::invalid_argument("plan: budget must lie in [1, n]");
    j = n - cut.budget;
  } else {
    if (!(cut.threshold >= 0.0 && cut.threshold < 1.0))
      throw std::invalid_argument("plan: threshold must lie in [0, 1)");
    while (j < n && spectrum.eigenvalues(j) <= cut.threshold) ++j;
  }
  const double lambda_j = (j == 0) ? 0.0 : spectrum.eigenvalues(j - 1);
  if (lambda_j >= 1.0)
    throw CertificateError("plan: lambda_j = 1 at j = " + std::to_string(j) +
                           "; the reconstruction bound cannot be certified");

  const Index m = n - j;
  Eigen::MatrixXd basis = spectrum.eigenvectors.rightCols(m);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis.transpose());
  const auto& perm = qr.colsPermutation().indices();
  std::vector<Index> selected(static_cast<std::size_t>(m));
  for (Index r = 0; r < m; ++r) selected[static_cast<std::size_t>(r)] = perm(r);
  std::sort(selected.begin(), selected.end());

  Eigen::MatrixXd G(m, m);
  for (Index r = 0; r < m; ++r) G.row(r) = basis.row(selected[static_cast<std::size_t>(r)]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const double smin = svd.singularValues()(m - 1);
  const double cond = svd.singularValues()(0) / smin;
  if (!(cond < 1e12))
    throw NumericalError("plan: selected G_j is numerically singular (condition estimate " +
                         std::to_string(cond) + ")");

  SamplingPlan p;
  p.j = j;
  p.vertices = std::move(selected);
  p.basis = std::move(basis);
  p.G = std::move(G);
  p.sigma_j = 1.0 / smin;
  p.lambda_j = lambda_j;
  return p;
}

/// Reconstruction from samples on V_j with the certified error bounds.
struct ReconstructionReport {
  Signal f_prime;
  double epsilon = 0.0;
  Index j = 0;
  double bound_a = 0.0;        // eps (1+sigma_j) / (1-lambda_j)
  double epsilon_prime = 0.0;  // eps (1 + 2(1+sigma_j)/(1-lambda_j))
};

/// Interpolate the unique element of span(v_{j+1..n}) matching the samples.
/// The coefficient system G_j c = f_{V_j} is solved by factorization.
inline ReconstructionReport reconstruct(const SamplingPlan& p,
                                        const std::map<Index, double>& samples, double epsilon,
                                        const std::shared_ptr<const VertexSet>& vertex_set) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("reconstruct: epsilon must be >= 0");
  if (samples.size() != p.vertices.size())
    throw std::invalid_argument("reconstruct: got " + std::to_string(samples.size()) +
                                " samples for a uniqueness set of size " +
                                std::to_string(p.vertices.size()));
  Eigen::VectorXd rhs(static_cast<Index>(p.vertices.size()));
  for (std::size_t r = 0; r < p.vertices.size(); ++r) {
    auto it = samples.find(p.vertices[r]);
    if (it == samples.end())
      throw std::invalid_argument("reconstruct: sample set does not cover vertex " +
                                  std::to_string(p.vertices[r]));
    rhs(static_cast<Index>(r)) = it->second;
  }
  Eigen::VectorXd coeff = p.G.colPivHouseholderQr().solve(rhs);
  Eigen::VectorXd values = p.basis * coeff;
  for (std::size_t r = 0; r < p.vertices.size(); ++r) {
    const double dev = std::abs(values(p.vertices[r]) - rhs(static_cast<Index>(r)));
    if (dev > 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      throw NumericalError("reconstruct: interpolation failed on V_j (deviation " +
                           std::to_string(dev) + ")");
  }

  ReconstructionReport rep;
  rep.f_prime = Signal(vertex_set, std::move(values));
  rep.epsilon = epsilon;
  rep.j = p.j;
  const double factor = (1.0 + p.sigma_j) / (1.0 - p.lambda_j);
  rep.bound_a = epsilon * factor;
  rep.epsilon_prime = epsilon * (1.0 + 2.0 * factor);
  return rep;
}

inline ReconstructionReport reconstruct(const SamplingPlan& p,
                                        const std::map<Index, double>& samples, double epsilon) {
  return reconstruct(p, samples, epsilon, VertexSet::make(p.basis.rows()));
}

/// Convenience: sample an existing signal at the plan's vertices.
inline std::map<Index, double> take_samples(const SamplingPlan& p, const Signal& f) {
  std::map<Index, double> samples;
  for (Index v : p.vertices) samples[v] = f.values(v);
  return samples;
}

/// Checks the convexity of the (Y,eps)-bandlimited set on a concrete pair:
/// both inputs must satisfy the residual bound, and then so does their
/// midpoint. Also confirms 0 is interior for eps > 0.
inline bool convexity_check(const Signal& f, const Signal& g, const ConvolutionFilter& B,
                            double epsilon) {
  const double rf = bandlimit_residual(f, B);
  const double rg = bandlimit_residual(g, B);
  if (rf > epsilon || rg > epsilon)
    throw std::invalid_argument("convexity_check: inputs are not (Y,eps)-bandlimited (residuals " +
                                std::to_string(rf) + ", " + std::to_string(rg) + ")");
  Signal mid(f.vertex_set, 0.5 * (f.values + g.values));
  const double rm = bandlimit_residual(mid, B);
  if (rm > epsilon + 1e-12)
    throw NumericalError("convexity_check: midpoint residual " + std::to_string(rm) +
                         " exceeds eps " + std::to_string(epsilon));
  if (epsilon > 0.0) {
    Signal zero(f.vertex_set, Eigen::VectorXd::Zero(f.size()));
    if (!(bandlimit_residual(zero, B) < epsilon))
      throw NumericalError("convexity_check: zero signal is not interior");
  }
  return true;
}

}  // namespace dgsp
