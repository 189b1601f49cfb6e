#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dgsp/common.hpp"

namespace dgsp {

using Index = Eigen::Index;

/// Finite set of vertices carrying the signals. Labels default to "0".."n-1".
struct VertexSet {
  Index n = 0;
  std::vector<std::string> labels;

  static std::shared_ptr<const VertexSet> make(Index n) {
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = std::to_string(i);
    return make(n, std::move(labels));
  }

  static std::shared_ptr<const VertexSet> make(Index n, std::vector<std::string> labels) {
    if (n < 1) throw std::invalid_argument("VertexSet: n must be >= 1");
    if (static_cast<Index>(labels.size()) != n)
      throw std::invalid_argument("VertexSet: label count does not match n");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (static_cast<Index>(seen.size()) != n)
      throw std::invalid_argument("VertexSet: labels must be pairwise distinct");
    auto vs = std::make_shared<VertexSet>();
    vs->n = n;
    vs->labels = std::move(labels);
    return vs;
  }
};

inline bool same_vertex_set(const VertexSet& a, const VertexSet& b) {
  return a.n == b.n && a.labels == b.labels;
}

inline bool same_vertex_set(const std::shared_ptr<const VertexSet>& a,
                            const std::shared_ptr<const VertexSet>& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return same_vertex_set(*a, *b);
}

/// A real-valued signal on a vertex set.
struct Signal {
  std::shared_ptr<const VertexSet> vertex_set;
  Eigen::VectorXd values;

  Signal() = default;
  Signal(std::shared_ptr<const VertexSet> vs, Eigen::VectorXd vals)
      : vertex_set(std::move(vs)), values(std::move(vals)) {
    if (!vertex_set) throw std::invalid_argument("Signal: null vertex set");
    if (values.size() != vertex_set->n)
      throw DimensionError("Signal: value count " + std::to_string(values.size()) +
                           " does not match vertex count " + std::to_string(vertex_set->n));
    if (!values.allFinite()) throw std::invalid_argument("Signal: values must be finite");
  }

  Index size() const { return values.size(); }
};

/// Eigendecomposition with a deterministic basis. Eigenvalues ascend; each
/// eigenvector is flipped so its largest-magnitude entry is positive (first
/// such entry on ties), making repeated decompositions bit-identical.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  const char* sign_convention = "max-abs-entry-positive";

  Index size() const { return eigenvalues.size(); }
};

namespace detail {

inline void apply_sign_convention(Eigen::MatrixXd& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    Index best = 0;
    double best_abs = std::abs(vectors(0, c));
    for (Index r = 1; r < vectors.rows(); ++r) {
      double a = std::abs(vectors(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (vectors(best, c) < 0) vectors.col(c) = -vectors.col(c);
  }
}

struct OperatorData {
  Eigen::MatrixXd matrix;
  std::string name;
  bool allow_indefinite = false;
  mutable std::once_flag eig_once;
  mutable std::unique_ptr<const EigenSystem> eig;
};

}  // namespace detail

/// Symmetric positive semi-definite operator on a vertex set. The matrix is
/// immutable; the eigendecomposition is computed on first use and cached, so
/// copies share both. PSD is verified at decomposition time (smallest
/// eigenvalue >= -1e-8*(1+lambda_max)) unless `allow_indefinite` was set,
/// which is the documented escape hatch for raw adjacency-style inputs.
class SymOperator {
 public:
  SymOperator() = default;

  explicit SymOperator(Eigen::MatrixXd matrix, std::string name = "operator",
                       bool allow_indefinite = false)
      : data_(std::make_shared<detail::OperatorData>()) {
    if (matrix.rows() != matrix.cols())
      throw DimensionError("SymOperator '" + name + "': matrix must be square");
    if (matrix.rows() < 1) throw std::invalid_argument("SymOperator: empty matrix");
    if (!matrix.allFinite())
      throw NumericalError("SymOperator '" + name + "': matrix has non-finite entries");
    const double scale = 1.0 + matrix.cwiseAbs().maxCoeff();
    const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
      throw std::invalid_argument("SymOperator '" + name + "': matrix is not symmetric (|M-M^T|_max = " +
                                  std::to_string(asym) + ")");
    data_->matrix = 0.5 * (matrix + matrix.transpose());
    data_->name = std::move(name);
    data_->allow_indefinite = allow_indefinite;
  }

  bool valid() const { return static_cast<bool>(data_); }
  Index size() const { return data_->matrix.rows(); }
  const Eigen::MatrixXd& matrix() const { return data_->matrix; }
  const std::string& name() const { return data_->name; }

  /// Cached deterministic eigendecomposition; thread-safe, computed once.
  const EigenSystem& eigensystem() const {
    std::call_once(data_->eig_once, [&] { data_->eig = decompose(); });
    return *data_->eig;
  }

  bool operator==(const SymOperator& other) const {
    if (data_ == other.data_) return true;
    return data_->matrix == other.data_->matrix;
  }

 private:
  std::unique_ptr<const EigenSystem> decompose() const {
    const Eigen::MatrixXd& m = data_->matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
      throw NumericalError("eigendecomposition failed to converge for '" + data_->name + "'");
    auto es = std::make_unique<EigenSystem>();
    es->eigenvalues = solver.eigenvalues();
    es->eigenvectors = solver.eigenvectors();
    detail::apply_sign_convention(es->eigenvectors);

    const Index n = m.rows();
    const double lambda_max = es->eigenvalues(n - 1);
    if (!data_->allow_indefinite) {
      const double floor = -1e-8 * (1.0 + std::abs(lambda_max));
      if (es->eigenvalues(0) < floor)
        throw NumericalError("operator '" + data_->name + "' is not PSD: smallest eigenvalue " +
                             std::to_string(es->eigenvalues(0)));
    }
    const double ortho = (es->eigenvectors.transpose() * es->eigenvectors -
                          Eigen::MatrixXd::Identity(n, n))
                             .cwiseAbs()
                             .maxCoeff();
    if (ortho > 1e-10)
      throw NumericalError("eigenvectors of '" + data_->name + "' lost orthonormality");
    for (Index i = 0; i < n; ++i) {
      const double resid = (m * es->eigenvectors.col(i) -
                            es->eigenvalues(i) * es->eigenvectors.col(i))
                               .norm();
      if (resid > 1e-8 * (1.0 + std::abs(es->eigenvalues(i))))
        throw NumericalError("eigenpair residual too large for '" + data_->name + "'");
    }
    return es;
  }

  std::shared_ptr<detail::OperatorData> data_;
};

struct Edge {
  Index u = 0;
  Index v = 0;
  double w = 1.0;
};

/// Undirected weighted edge list; pairs are unordered and must be unique.
struct EdgeList {
  std::vector<Edge> edges;

  void validate(Index n) const {
    std::set<std::pair<Index, Index>> seen;
    for (const Edge& e : edges) {
      if (e.u == e.v) throw std::invalid_argument("EdgeList: self-loop at vertex " + std::to_string(e.u));
      if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
        throw std::invalid_argument("EdgeList: vertex index out of range [0," + std::to_string(n) + ")");
      if (!(e.w > 0.0)) throw std::invalid_argument("EdgeList: non-positive weight on edge (" +
                                                    std::to_string(e.u) + "," + std::to_string(e.v) + ")");
      auto key = std::minmax(e.u, e.v);
      if (!seen.insert(key).second)
        throw std::invalid_argument("EdgeList: duplicate edge (" + std::to_string(key.first) + "," +
                                    std::to_string(key.second) + ")");
    }
  }
};

/// Combinatorial weighted Laplacian L = D - W.
inline SymOperator laplacian_from_edges(const EdgeList& edges, Index n,
                                        std::string name = "laplacian") {
  edges.validate(n);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : edges.edges) {
    L(e.u, e.u) += e.w;
    L(e.v, e.v) += e.w;
    L(e.u, e.v) -= e.w;
    L(e.v, e.u) -= e.w;
  }
  return SymOperator(std::move(L), std::move(name));
}

enum class KnnWeight { Unit, GaussianKernel };

/// Symmetrized k-nearest-neighbor graph from Euclidean coordinates. An edge
/// (u,v) is present iff v is among u's k nearest neighbors or vice versa.
/// Distance ties break toward the lower index; coincident points are rejected.
inline EdgeList knn_graph(const std::vector<std::vector<double>>& coords, Index k,
                          KnnWeight weight_rule = KnnWeight::Unit, double sigma = 1.0) {
  const Index n = static_cast<Index>(coords.size());
  if (n < 2) throw std::invalid_argument("knn_graph: need at least 2 points");
  if (k < 1 || k >= n) throw std::invalid_argument("knn_graph: k must satisfy 1 <= k < n");
  const std::size_t dim = coords.front().size();
  for (const auto& p : coords)
    if (p.size() != dim) throw DimensionError("knn_graph: inconsistent point dimensions");

  Eigen::MatrixXd d2(n, n);
  for (Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double diff = coords[static_cast<std::size_t>(i)][c] - coords[static_cast<std::size_t>(j)][c];
        s += diff * diff;
      }
      if (s == 0.0)
        throw std::invalid_argument("knn_graph: duplicate points at indices " + std::to_string(i) +
                                    " and " + std::to_string(j));
      d2(i, j) = s;
      d2(j, i) = s;
    }
  }

  std::set<std::pair<Index, Index>> pairs;
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(n) - 1);
  for (Index i = 0; i < n; ++i) {
    order.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (d2(i, a) != d2(i, b)) return d2(i, a) < d2(i, b);
      return a < b;
    });
    for (Index r = 0; r < k; ++r) {
      Index j = order[static_cast<std::size_t>(r)];
      pairs.insert(std::minmax(i, j));
    }
  }

  EdgeList out;
  out.edges.reserve(pairs.size());
  for (const auto& [u, v] : pairs) {
    double w = 1.0;
    if (weight_rule == KnnWeight::GaussianKernel) w = std::exp(-d2(u, v) / (sigma * sigma));
    out.edges.push_back({u, v, w});
  }
  return out;
}

/// Explicit form of SymOperator::eigensystem for call-site symmetry with the
/// rest of the toolkit.
inline const EigenSystem& eigendecompose(const SymOperator& op) { return op.eigensystem(); }

}  // namespace dgsp
