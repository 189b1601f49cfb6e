#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "dgsp/core.hpp"

namespace dgsp {

/// Unnormalized density on the family parameter interval [0,1]. Total mass is
/// fixed by the quadrature at compile time, so only the shape matters here.
struct DensitySpec {
  enum class Kind { Uniform, TruncatedGaussian, PiecewiseConstant, Table };

  Kind kind = Kind::Uniform;
  double mean = 0.5;
  double stddev = 1.0;
  std::vector<double> breakpoints;  // ascending, inside (0,1)
  std::vector<double> heights;      // breakpoints.size()+1 cell values
  std::vector<double> nodes;        // table: ascending in [0,1]
  std::vector<double> values;

  static DensitySpec uniform() { return {}; }

  static DensitySpec truncated_gaussian(double mean, double stddev) {
    if (!(stddev > 0.0)) throw std::invalid_argument("DensitySpec: stddev must be > 0");
    DensitySpec d;
    d.kind = Kind::TruncatedGaussian;
    d.mean = mean;
    d.stddev = stddev;
    return d;
  }

  static DensitySpec piecewise_constant(std::vector<double> breakpoints, std::vector<double> heights) {
    if (heights.size() != breakpoints.size() + 1)
      throw std::invalid_argument("DensitySpec: need one height per cell");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      if (breakpoints[i] <= 0.0 || breakpoints[i] >= 1.0)
        throw std::invalid_argument("DensitySpec: breakpoints must lie inside (0,1)");
      if (i > 0 && breakpoints[i] <= breakpoints[i - 1])
        throw std::invalid_argument("DensitySpec: breakpoints must be strictly increasing");
    }
    for (double h : heights)
      if (!(h >= 0.0)) throw std::invalid_argument("DensitySpec: heights must be nonnegative");
    DensitySpec d;
    d.kind = Kind::PiecewiseConstant;
    d.breakpoints = std::move(breakpoints);
    d.heights = std::move(heights);
    return d;
  }

  static DensitySpec table(std::vector<double> nodes, std::vector<double> values) {
    if (nodes.size() < 2 || nodes.size() != values.size())
      throw std::invalid_argument("DensitySpec: table needs >= 2 matching nodes/values");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] < 0.0 || nodes[i] > 1.0)
        throw std::invalid_argument("DensitySpec: table nodes must lie in [0,1]");
      if (i > 0 && nodes[i] <= nodes[i - 1])
        throw std::invalid_argument("DensitySpec: table nodes must be strictly increasing");
      if (!(values[i] >= 0.0)) throw std::invalid_argument("DensitySpec: table values must be nonnegative");
    }
    DensitySpec d;
    d.kind = Kind::Table;
    d.nodes = std::move(nodes);
    d.values = std::move(values);
    return d;
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::Uniform:
        return 1.0;
      case Kind::TruncatedGaussian: {
        const double z = (t - mean) / stddev;
        return std::exp(-0.5 * z * z);
      }
      case Kind::PiecewiseConstant: {
        std::size_t cell = 0;
        while (cell < breakpoints.size() && t >= breakpoints[cell]) ++cell;
        return heights[cell];
      }
      case Kind::Table: {
        if (t <= nodes.front()) return values.front();
        if (t >= nodes.back()) return values.back();
        std::size_t hi = 1;
        while (nodes[hi] < t) ++hi;
        const double frac = (t - nodes[hi - 1]) / (nodes[hi] - nodes[hi - 1]);
        return values[hi - 1] + frac * (values[hi] - values[hi - 1]);
      }
    }
    return 0.0;
  }
};

/// Quadrature on (0,1) used to discretize interval families.
struct QuadratureRule {
  enum class Kind { UniformMidpoint, GaussLegendre };

  Kind kind = Kind::UniformMidpoint;
  Index Q = 32;

  static QuadratureRule uniform_midpoint(Index Q) { return make(Kind::UniformMidpoint, Q); }
  static QuadratureRule gauss_legendre(Index Q) { return make(Kind::GaussLegendre, Q); }

  static QuadratureRule make(Kind kind, Index Q) {
    if (Q < 1) throw std::invalid_argument("QuadratureRule: Q must be >= 1");
    return {kind, Q};
  }

  /// Nodes ascending inside (0,1) with positive weights summing to 1.
  void nodes_weights(std::vector<double>& t, std::vector<double>& u) const {
    t.assign(static_cast<std::size_t>(Q), 0.0);
    u.assign(static_cast<std::size_t>(Q), 0.0);
    if (kind == Kind::UniformMidpoint) {
      for (Index q = 0; q < Q; ++q) {
        t[static_cast<std::size_t>(q)] = (static_cast<double>(q) + 0.5) / static_cast<double>(Q);
        u[static_cast<std::size_t>(q)] = 1.0 / static_cast<double>(Q);
      }
      return;
    }
    // Gauss-Legendre on [-1,1] by Newton iteration on P_Q, then mapped to [0,1].
    const Index m = (Q + 1) / 2;
    for (Index i = 0; i < m; ++i) {
      double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(Q) + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = 0.0;
        for (Index j = 0; j < Q; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * static_cast<double>(j) + 1.0) * x * p1 - static_cast<double>(j) * p2) /
               (static_cast<double>(j) + 1.0);
        }
        pp = static_cast<double>(Q) * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * pp * pp);
      t[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
      u[static_cast<std::size_t>(i)] = 0.5 * w;
      t[static_cast<std::size_t>(Q - 1 - i)] = 0.5 * (1.0 + x);
      u[static_cast<std::size_t>(Q - 1 - i)] = 0.5 * w;
    }
  }
};

/// One-parameter operator family L_t = t*L1 + (1-t)*L2.
struct IntervalFamily {
  SymOperator L1;
  SymOperator L2;
};

/// Fiber of an interval family at parameter t; eigendecomposed lazily.
inline SymOperator fiber_at(const IntervalFamily& family, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("fiber_at: parameter t = " + std::to_string(t) + " outside [0,1]");
  if (family.L1.size() != family.L2.size())
    throw DimensionError("fiber_at: family endpoints have mismatched sizes");
  Eigen::MatrixXd m = t * family.L1.matrix() + (1.0 - t) * family.L2.matrix();
  return SymOperator(std::move(m), "fiber(t=" + std::to_string(t) + ")");
}

/// Declarative description of a distribution of operators. Compiled into an
/// OperatorEnsemble before any computation touches it.
class DistributionSpec {
 public:
  enum class Variant { Delta, Discrete, IntervalFamilyV };

  static DistributionSpec delta(SymOperator op) {
    DistributionSpec s;
    s.variant_ = Variant::Delta;
    s.operators_ = {std::move(op)};
    return s;
  }

  static DistributionSpec discrete(std::vector<SymOperator> ops, std::vector<double> weights) {
    if (ops.empty() || ops.size() != weights.size())
      throw std::invalid_argument("DistributionSpec: need matching nonempty operators/weights");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("DistributionSpec: discrete weights must be positive");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("DistributionSpec: discrete weights must sum to 1 (got " +
                                  std::to_string(sum) + ")");
    DistributionSpec s;
    s.variant_ = Variant::Discrete;
    s.operators_ = std::move(ops);
    s.weights_ = std::move(weights);
    return s;
  }

  static DistributionSpec interval_family(SymOperator L1, SymOperator L2, DensitySpec density,
                                          QuadratureRule quadrature) {
    DistributionSpec s;
    s.variant_ = Variant::IntervalFamilyV;
    s.family_ = IntervalFamily{std::move(L1), std::move(L2)};
    s.density_ = std::move(density);
    s.quadrature_ = quadrature;
    return s;
  }

  Variant variant() const { return variant_; }
  const std::vector<SymOperator>& operators() const { return operators_; }
  const std::vector<double>& weights() const { return weights_; }
  const IntervalFamily& family() const { return *family_; }
  const DensitySpec& density() const { return density_; }
  const QuadratureRule& quadrature() const { return quadrature_; }

 private:
  Variant variant_ = Variant::Delta;
  std::vector<SymOperator> operators_;
  std::vector<double> weights_;
  std::optional<IntervalFamily> family_;
  DensitySpec density_;
  QuadratureRule quadrature_;
};

/// One weighted fiber of a compiled ensemble.
struct Fiber {
  SymOperator op;
  double weight = 1.0;
  std::optional<double> param;
};

/// Finite weighted list of operators: the compiled form every distribution
/// takes before any transform or filter is evaluated. Weights are
/// renormalized to sum to 1; all downstream reductions run in fiber order.
class OperatorEnsemble {
 public:
  OperatorEnsemble() = default;

  explicit OperatorEnsemble(std::vector<Fiber> fibers,
                            std::shared_ptr<const VertexSet> vertex_set = nullptr)
      : fibers_(std::move(fibers)) {
    if (fibers_.empty()) throw std::invalid_argument("OperatorEnsemble: no fibers");
    const Index n = fibers_.front().op.size();
    for (const Fiber& f : fibers_) {
      if (f.op.size() != n) throw DimensionError("OperatorEnsemble: fibers have mismatched sizes");
      if (!(f.weight > 0.0)) throw std::invalid_argument("OperatorEnsemble: weights must be positive");
    }
    const bool has_params = fibers_.front().param.has_value();
    for (std::size_t q = 0; q < fibers_.size(); ++q) {
      if (fibers_[q].param.has_value() != has_params)
        throw std::invalid_argument("OperatorEnsemble: params must be set on all fibers or none");
      if (has_params && q > 0 && !(*fibers_[q].param > *fibers_[q - 1].param))
        throw std::invalid_argument("OperatorEnsemble: params must be strictly increasing");
    }
    double sum = 0.0;
    for (const Fiber& f : fibers_) sum += f.weight;
    if (std::abs(sum - 1.0) > 1e-6)
      warn("ensemble weights sum to " + std::to_string(sum) + "; renormalizing");
    for (Fiber& f : fibers_) f.weight /= sum;
    vertex_set_ = vertex_set ? std::move(vertex_set) : VertexSet::make(n);
    if (vertex_set_->n != n) throw DimensionError("OperatorEnsemble: vertex set does not match fibers");
  }

  Index fiber_count() const { return static_cast<Index>(fibers_.size()); }
  Index vertex_count() const { return fibers_.front().op.size(); }
  const Fiber& fiber(Index q) const { return fibers_[static_cast<std::size_t>(q)]; }
  const std::vector<Fiber>& fibers() const { return fibers_; }
  const std::shared_ptr<const VertexSet>& vertex_set() const { return vertex_set_; }

  bool has_params() const { return fibers_.front().param.has_value(); }

  /// Weighted expectation of the fiber operators.
  Eigen::MatrixXd mean_operator() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(vertex_count(), vertex_count());
    for (const Fiber& f : fibers_) m += f.weight * f.op.matrix();
    return m;
  }

 private:
  std::vector<Fiber> fibers_;
  std::shared_ptr<const VertexSet> vertex_set_;
};

/// Compile a distribution specification into its finite weighted ensemble.
/// Quadrature nodes where the density vanishes are dropped.
inline OperatorEnsemble compile(const DistributionSpec& spec,
                                std::shared_ptr<const VertexSet> vertex_set = nullptr) {
  std::vector<Fiber> fibers;
  switch (spec.variant()) {
    case DistributionSpec::Variant::Delta:
      fibers.push_back({spec.operators().front(), 1.0, std::nullopt});
      break;
    case DistributionSpec::Variant::Discrete:
      for (std::size_t i = 0; i < spec.operators().size(); ++i)
        fibers.push_back({spec.operators()[i], spec.weights()[i], std::nullopt});
      break;
    case DistributionSpec::Variant::IntervalFamilyV: {
      std::vector<double> t, u;
      spec.quadrature().nodes_weights(t, u);
      double total = 0.0;
      for (std::size_t q = 0; q < t.size(); ++q) total += spec.density()(t[q]) * u[q];
      if (!(total > 0.0))
        throw NumericalError("compile: density vanishes at every quadrature node (zero total mass)");
      for (std::size_t q = 0; q < t.size(); ++q) {
        const double w = spec.density()(t[q]) * u[q] / total;
        if (w > 0.0) fibers.push_back({fiber_at(spec.family(), t[q]), w, t[q]});
      }
      break;
    }
  }
  // Eigendecompose fibers up front (in parallel); this is also where a
  // non-PSD fiber is reported.
  detail::parallel_for(fibers.size(), [&](std::size_t q) { fibers[q].op.eigensystem(); });
  return OperatorEnsemble(std::move(fibers), std::move(vertex_set));
}

/// Measurable map between base spaces. Parameter variants act on the family
/// parameter in [0,1]; the discrete variant re-assigns fiber indices.
class BaseMap {
 public:
  enum class Kind { Discrete, ParamFunction, Coarsening, Stretch };

  static BaseMap discrete(std::vector<std::size_t> index_map) {
    if (index_map.empty()) throw std::invalid_argument("BaseMap: empty index map");
    BaseMap h;
    h.kind_ = Kind::Discrete;
    h.index_map_ = std::move(index_map);
    return h;
  }

  static BaseMap param_function(std::function<double(double)> fwd,
                                std::function<double(double)> inverse = nullptr) {
    if (!fwd) throw std::invalid_argument("BaseMap: null function");
    BaseMap h;
    h.kind_ = Kind::ParamFunction;
    h.fwd_ = std::move(fwd);
    h.inv_ = std::move(inverse);
    return h;
  }

  static BaseMap coarsening(std::vector<double> breakpoints, std::vector<double> reps) {
    if (reps.size() != breakpoints.size() + 1)
      throw std::invalid_argument("BaseMap: coarsening needs one representative per cell");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      if (breakpoints[i] <= 0.0 || breakpoints[i] >= 1.0)
        throw std::invalid_argument("BaseMap: coarsening breakpoints must lie inside (0,1)");
      if (i > 0 && breakpoints[i] <= breakpoints[i - 1])
        throw std::invalid_argument("BaseMap: coarsening breakpoints must be strictly increasing");
    }
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const double lo = (i == 0) ? 0.0 : breakpoints[i - 1];
      const double hi = (i == breakpoints.size()) ? 1.0 : breakpoints[i];
      if (reps[i] < lo || reps[i] > hi)
        throw std::invalid_argument("BaseMap: representative " + std::to_string(reps[i]) +
                                    " lies outside its cell");
    }
    BaseMap h;
    h.kind_ = Kind::Coarsening;
    h.breakpoints_ = std::move(breakpoints);
    h.reps_ = std::move(reps);
    return h;
  }

  static BaseMap stretch(double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("BaseMap: stretch eta must be > 0");
    BaseMap h;
    h.kind_ = Kind::Stretch;
    h.eta_ = eta;
    return h;
  }

  static BaseMap identity() {
    return param_function([](double t) { return t; }, [](double x) { return x; });
  }

  Kind kind() const { return kind_; }
  double eta() const { return eta_; }
  const std::vector<std::size_t>& index_map() const { return index_map_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& representatives() const { return reps_; }

  /// h(y) for parameter variants.
  double map_param(double y) const {
    switch (kind_) {
      case Kind::ParamFunction:
        return fwd_(y);
      case Kind::Coarsening: {
        std::size_t cell = 0;
        while (cell < breakpoints_.size() && y >= breakpoints_[cell]) ++cell;
        return reps_[cell];
      }
      case Kind::Stretch:
        return y * eta_ / (1.0 - y + y * eta_);
      case Kind::Discrete:
        break;
    }
    throw std::invalid_argument("BaseMap: discrete map has no parameter action");
  }

  bool has_inverse() const { return kind_ == Kind::Stretch || static_cast<bool>(inv_); }

  /// Exact inverse where available (stretch, or a supplied callable).
  double inverse_param(double x) const {
    if (kind_ == Kind::Stretch) return x / (x + eta_ - x * eta_);
    if (inv_) return inv_(x);
    throw std::invalid_argument("BaseMap: no inverse available");
  }

  std::size_t map_index(std::size_t q) const {
    if (kind_ != Kind::Discrete) throw std::invalid_argument("BaseMap: not a discrete map");
    if (q >= index_map_.size())
      throw std::invalid_argument("BaseMap: map undefined on fiber " + std::to_string(q));
    return index_map_[q];
  }

 private:
  Kind kind_ = Kind::ParamFunction;
  std::vector<std::size_t> index_map_;
  std::function<double(double)> fwd_;
  std::function<double(double)> inv_;
  std::vector<double> breakpoints_;
  std::vector<double> reps_;
  double eta_ = 1.0;
};

/// Pushforward of a parametrized ensemble through h: fibers landing on the
/// same target parameter have their weights summed; target operators are
/// built exactly from the interval family at the mapped parameters.
inline OperatorEnsemble pushforward(const OperatorEnsemble& source, const BaseMap& h,
                                    const IntervalFamily& target_family) {
  if (h.kind() == BaseMap::Kind::Discrete)
    throw std::invalid_argument("pushforward: discrete maps need explicit target operators");
  if (!source.has_params())
    throw std::invalid_argument("pushforward: source ensemble has no fiber parameters");
  std::map<double, double> mass;  // target param -> summed weight, ascending
  for (const Fiber& f : source.fibers()) mass[h.map_param(*f.param)] += f.weight;
  std::vector<Fiber> fibers;
  fibers.reserve(mass.size());
  for (const auto& [x, w] : mass) fibers.push_back({fiber_at(target_family, x), w, x});
  return OperatorEnsemble(std::move(fibers), source.vertex_set());
}

/// Discrete pushforward: source fiber q contributes its weight to
/// target_ops[h(q)]; unhit targets are dropped.
inline OperatorEnsemble pushforward(const OperatorEnsemble& source, const BaseMap& h,
                                    const std::vector<SymOperator>& target_ops) {
  if (h.kind() != BaseMap::Kind::Discrete)
    throw std::invalid_argument("pushforward: expected a discrete map");
  std::map<std::size_t, double> mass;
  for (Index q = 0; q < source.fiber_count(); ++q) {
    const std::size_t j = h.map_index(static_cast<std::size_t>(q));
    if (j >= target_ops.size())
      throw std::invalid_argument("pushforward: target index " + std::to_string(j) + " out of range");
    mass[j] += source.fiber(q).weight;
  }
  std::vector<Fiber> fibers;
  fibers.reserve(mass.size());
  for (const auto& [j, w] : mass) fibers.push_back({target_ops[j], w, std::nullopt});
  return OperatorEnsemble(std::move(fibers), source.vertex_set());
}

}  // namespace dgsp
