#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "dgsp/ensemble.hpp"

namespace dgsp {

/// Training signals, optionally labelled (nonzero label = abnormal).
struct TrainingSet {
  std::vector<Signal> signals;
  std::optional<std::vector<double>> labels;

  static TrainingSet make(std::vector<Signal> signals,
                          std::optional<std::vector<double>> labels = std::nullopt) {
    if (signals.empty()) throw std::invalid_argument("TrainingSet: no signals");
    for (const Signal& s : signals)
      if (!same_vertex_set(*s.vertex_set, *signals.front().vertex_set))
        throw DimensionError("TrainingSet: signals live on different vertex sets");
    if (labels && labels->size() != signals.size())
      throw std::invalid_argument("TrainingSet: " + std::to_string(labels->size()) +
                                  " labels for " + std::to_string(signals.size()) + " signals");
    return {std::move(signals), std::move(labels)};
  }

  Index size() const { return static_cast<Index>(signals.size()); }
};

/// Fraction of signal energy above frequency index b (1-based) in the
/// classical Fourier basis of x. Always in [0,1].
inline double highfreq_loss(const SymOperator& x, const Signal& f, Index b) {
  if (f.size() != x.size())
    throw DimensionError("highfreq_loss: signal length " + std::to_string(f.size()) +
                         " does not match operator size " + std::to_string(x.size()));
  if (b < 1 || b > x.size())
    throw std::invalid_argument("highfreq_loss: bandwidth must lie in [1, n]");
  const double norm = f.values.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("highfreq_loss: zero signal");
  const Eigen::VectorXd fhat = x.eigensystem().eigenvectors.transpose() * f.values;
  const double high = fhat.tail(x.size() - b).norm();
  return std::min(high / norm, 1.0);
}

/// Threshold detector on the high-frequency energy fraction. A bandwidth of
/// 0 means "pick the default ceil(n/20) at evaluation time".
struct AnomalyDetector {
  double threshold = 0.5;
  Index bandwidth = 0;

  Index bandwidth_for(Index n) const {
    if (bandwidth > 0) return bandwidth;
    return (n + 19) / 20;
  }
};

/// 0 when the detector classifies f correctly, 1 otherwise. The detector
/// flags f abnormal when its high-frequency fraction exceeds the threshold.
inline double anomaly_loss(const SymOperator& x, const Signal& f, bool is_abnormal,
                           const AnomalyDetector& detector) {
  const bool flagged = highfreq_loss(x, f, detector.bandwidth_for(x.size())) > detector.threshold;
  return flagged == is_abnormal ? 0.0 : 1.0;
}

struct LossSpec {
  enum class Kind { HighFreq, Anomaly, Custom };

  Kind kind = Kind::HighFreq;
  Index bandwidth = 1;
  AnomalyDetector detector;
  Eigen::MatrixXd losses;  // candidates x signals

  static LossSpec highfreq(Index b) {
    if (b < 1) throw std::invalid_argument("LossSpec: bandwidth must be >= 1");
    LossSpec s;
    s.kind = Kind::HighFreq;
    s.bandwidth = b;
    return s;
  }

  static LossSpec anomaly(AnomalyDetector d) {
    if (!(d.threshold >= 0.0)) throw std::invalid_argument("LossSpec: threshold must be >= 0");
    LossSpec s;
    s.kind = Kind::Anomaly;
    s.detector = d;
    return s;
  }

  static LossSpec custom(Eigen::MatrixXd table) {
    for (Index c = 0; c < table.rows(); ++c)
      for (Index i = 0; i < table.cols(); ++i)
        if (!std::isfinite(table(c, i)) || table(c, i) < 0.0)
          throw std::invalid_argument("LossSpec: custom losses must be finite and >= 0");
    LossSpec s;
    s.kind = Kind::Custom;
    s.losses = std::move(table);
    return s;
  }
};

struct RiskTable {
  std::vector<SymOperator> candidates;
  std::vector<double> risks;

  Index size() const { return static_cast<Index>(candidates.size()); }
};

/// r(x_c) = (1/k) sum_i loss(x_c, f_i), summed in signal order. Candidates
/// are evaluated in parallel.
inline RiskTable empirical_risk(const std::vector<SymOperator>& candidates,
                                const TrainingSet& train, const LossSpec& loss) {
  if (candidates.empty()) throw std::invalid_argument("empirical_risk: no candidates");
  const Index k = train.size();
  if (loss.kind == LossSpec::Kind::Anomaly && !train.labels)
    throw std::invalid_argument("empirical_risk: anomaly loss needs labelled signals");
  if (loss.kind == LossSpec::Kind::Custom &&
      (loss.losses.rows() != static_cast<Index>(candidates.size()) || loss.losses.cols() != k))
    throw DimensionError("empirical_risk: custom loss table is " +
                         std::to_string(loss.losses.rows()) + "x" +
                         std::to_string(loss.losses.cols()) + ", expected " +
                         std::to_string(candidates.size()) + "x" + std::to_string(k));

  RiskTable table;
  table.candidates = candidates;
  table.risks.assign(candidates.size(), 0.0);
  detail::parallel_for(candidates.size(), [&](std::size_t c) {
    double sum = 0.0;
    for (Index i = 0; i < k; ++i) {
      double value = 0.0;
      try {
        switch (loss.kind) {
          case LossSpec::Kind::HighFreq:
            value = highfreq_loss(candidates[c], train.signals[static_cast<std::size_t>(i)],
                                  loss.bandwidth);
            break;
          case LossSpec::Kind::Anomaly:
            value = anomaly_loss(candidates[c], train.signals[static_cast<std::size_t>(i)],
                                 (*train.labels)[static_cast<std::size_t>(i)] != 0.0,
                                 loss.detector);
            break;
          case LossSpec::Kind::Custom:
            value = loss.losses(static_cast<Index>(c), i);
            break;
        }
      } catch (const std::exception& e) {
        throw std::invalid_argument("empirical_risk: loss failed on signal " + std::to_string(i) +
                                    ": " + e.what());
      }
      sum += value;
    }
    table.risks[c] = sum / static_cast<double>(k);
  });
  return table;
}

/// Gibbs posterior settings. An empty prior means uniform. gamma = 0 is
/// allowed and reproduces the prior.
struct GibbsConfig {
  double gamma = 1.0;
  std::vector<double> prior;

  void validate(std::size_t candidate_count) const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
      throw std::invalid_argument("GibbsConfig: gamma must be finite and >= 0");
    if (!prior.empty()) {
      if (prior.size() != candidate_count)
        throw std::invalid_argument("GibbsConfig: prior has " + std::to_string(prior.size()) +
                                    " entries for " + std::to_string(candidate_count) +
                                    " candidates");
      double sum = 0.0;
      for (double p : prior) {
        if (!(p > 0.0)) throw std::invalid_argument("GibbsConfig: prior weights must be > 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("GibbsConfig: prior sums to " + std::to_string(sum));
    }
  }

  double prior_at(std::size_t c, std::size_t count) const {
    return prior.empty() ? 1.0 / static_cast<double>(count) : prior[c];
  }
};

/// w_c proportional to exp(-gamma r_c) mu0(c), normalized. Exponents are
/// max-shifted, so the largest term is exactly 1 and the normalizer never
/// underflows.
inline std::vector<double> gibbs_exact(const std::vector<double>& risks, const GibbsConfig& cfg) {
  if (risks.empty()) throw std::invalid_argument("gibbs_exact: no candidates");
  cfg.validate(risks.size());
  std::vector<double> logw(risks.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < risks.size(); ++c) {
    if (!std::isfinite(risks[c])) throw NumericalError("gibbs_exact: risk is not finite");
    logw[c] = -cfg.gamma * risks[c] + std::log(cfg.prior_at(c, risks.size()));
    shift = std::max(shift, logw[c]);
  }
  if (!std::isfinite(shift)) throw NumericalError("gibbs_exact: all posterior weights underflow");
  std::vector<double> w(risks.size());
  double z = 0.0;
  for (std::size_t c = 0; c < risks.size(); ++c) {
    w[c] = std::exp(logw[c] - shift);
    z += w[c];
  }
  for (double& x : w) x /= z;
  return w;
}

inline std::vector<double> gibbs_exact(const RiskTable& table, const GibbsConfig& cfg) {
  return gibbs_exact(table.risks, cfg);
}

struct MHConfig {
  enum class Proposal { UniformIndependent, NeighborWalk };

  std::int64_t steps = 100000;
  std::int64_t burn_in = 1000;
  std::int64_t thinning = 1;
  Proposal proposal = Proposal::UniformIndependent;
  Index walk_width = 1;
  std::uint64_t seed = 0;

  void validate(Index candidate_count) const {
    if (burn_in < 0 || steps <= burn_in)
      throw std::invalid_argument("MHConfig: need steps > burn_in >= 0");
    if (thinning < 1) throw std::invalid_argument("MHConfig: thinning must be >= 1");
    if (proposal == Proposal::NeighborWalk) {
      if (candidate_count < 2)
        throw std::invalid_argument("MHConfig: neighbor walk needs at least 2 candidates");
      if (walk_width < 1 || walk_width > candidate_count - 1)
        throw std::invalid_argument("MHConfig: walk width must lie in [1, candidates-1]");
    }
  }
};

struct MHResult {
  std::vector<double> frequencies;
  double acceptance_rate = 0.0;
  std::int64_t recorded = 0;
  std::int64_t accepted = 0;
};

namespace detail {

// Walk step with single boundary reflection; widths are capped at
// candidates-1 so one reflection always lands inside [0, C).
inline Index reflect(Index x, Index C) {
  if (x < 0) return -x - 1;
  if (x >= C) return 2 * C - 1 - x;
  return x;
}

inline double walk_proposal_prob(Index from, Index to, Index width, Index C) {
  Index hits = 0;
  for (Index d = -width; d <= width; ++d) {
    if (d == 0) continue;
    if (reflect(from + d, C) == to) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(2 * width);
}

}  // namespace detail

/// Metropolis-Hastings over candidate indices targeting the Gibbs
/// posterior. The chain starts at index 0; risks are fetched lazily and
/// cached. Identical seeds give identical chains.
inline MHResult mh_sample(const std::function<double(Index)>& risk_oracle, Index candidate_count,
                          const GibbsConfig& gibbs, const MHConfig& mh) {
  if (candidate_count < 1) throw std::invalid_argument("mh_sample: no candidates");
  if (!risk_oracle) throw std::invalid_argument("mh_sample: null risk oracle");
  gibbs.validate(static_cast<std::size_t>(candidate_count));
  mh.validate(candidate_count);

  std::vector<double> risk_cache(static_cast<std::size_t>(candidate_count),
                                 std::numeric_limits<double>::quiet_NaN());
  auto risk = [&](Index c) {
    double& slot = risk_cache[static_cast<std::size_t>(c)];
    if (std::isnan(slot)) {
      slot = risk_oracle(c);
      if (!std::isfinite(slot))
        throw NumericalError("mh_sample: risk of candidate " + std::to_string(c) +
                             " is not finite");
    }
    return slot;
  };

  std::mt19937_64 gen(mh.seed);
  const auto count = static_cast<std::size_t>(candidate_count);
  std::vector<std::int64_t> visits(count, 0);
  Index state = 0;
  std::int64_t accepted = 0;
  std::int64_t recorded = 0;

  for (std::int64_t step = 0; step < mh.steps; ++step) {
    Index next;
    double log_q_ratio = 0.0;  // log q(state|next) - log q(next|state)
    if (mh.proposal == MHConfig::Proposal::UniformIndependent) {
      next = static_cast<Index>(
          detail::draw_uniform(gen, static_cast<std::uint64_t>(candidate_count)));
    } else {
      const auto span = static_cast<std::uint64_t>(2 * mh.walk_width);
      const auto pick = static_cast<Index>(detail::draw_uniform(gen, span));
      const Index delta = (pick < mh.walk_width) ? pick - mh.walk_width : pick - mh.walk_width + 1;
      next = detail::reflect(state + delta, candidate_count);
      const double fwd = detail::walk_proposal_prob(state, next, mh.walk_width, candidate_count);
      const double bwd = detail::walk_proposal_prob(next, state, mh.walk_width, candidate_count);
      log_q_ratio = (bwd > 0.0) ? std::log(bwd) - std::log(fwd)
                                : -std::numeric_limits<double>::infinity();
    }

    if (next == state) {
      ++accepted;
    } else {
      const double log_a =
          -gibbs.gamma * (risk(next) - risk(state)) +
          std::log(gibbs.prior_at(static_cast<std::size_t>(next), count)) -
          std::log(gibbs.prior_at(static_cast<std::size_t>(state), count)) + log_q_ratio;
      const double u = detail::draw_unit(gen);
      if (std::log(std::max(u, 1e-300)) < log_a) {
        state = next;
        ++accepted;
      }
    }

    if (step >= mh.burn_in && (step - mh.burn_in) % mh.thinning == 0) {
      ++visits[static_cast<std::size_t>(state)];
      ++recorded;
    }
  }

  MHResult out;
  out.frequencies.resize(count);
  for (std::size_t c = 0; c < count; ++c)
    out.frequencies[c] = static_cast<double>(visits[c]) / static_cast<double>(recorded);
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(mh.steps);
  out.recorded = recorded;
  out.accepted = accepted;
  return out;
}

inline MHResult mh_sample(const RiskTable& table, const GibbsConfig& gibbs, const MHConfig& mh) {
  return mh_sample([&](Index c) { return table.risks[static_cast<std::size_t>(c)]; },
                   table.size(), gibbs, mh);
}

/// Package learned weights as a discrete distribution. Candidates whose
/// weight underflowed to zero are dropped.
inline DistributionSpec to_distribution(const std::vector<SymOperator>& candidates,
                                        const std::vector<double>& weights) {
  if (candidates.size() != weights.size())
    throw std::invalid_argument("to_distribution: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(candidates.size()) +
                                " candidates");
  std::vector<SymOperator> ops;
  std::vector<double> w;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (weights[c] > 0.0) {
      ops.push_back(candidates[c]);
      w.push_back(weights[c]);
    }
  }
  if (ops.empty()) throw NumericalError("to_distribution: all weights are zero");
  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;
  return DistributionSpec::discrete(std::move(ops), std::move(w));
}

}  // namespace dgsp
