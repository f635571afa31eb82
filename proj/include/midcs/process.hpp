#pragma once

// Seed-reproducible generators for the stationary sources studied by the
// library, with closed-form ground-truth dimensions where they are known.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "midcs/error.hpp"
#include "midcs/parallel.hpp"
#include "midcs/random.hpp"

namespace midcs {

enum class ProcessKind { IidMixed, IidUniform, GaussianStationary, MarkovChain, DigitShared, DigitIid };

inline const char* to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::IidMixed: return "IidMixed";
    case ProcessKind::IidUniform: return "IidUniform";
    case ProcessKind::GaussianStationary: return "GaussianStationary";
    case ProcessKind::MarkovChain: return "MarkovChain";
    case ProcessKind::DigitShared: return "DigitShared";
    case ProcessKind::DigitIid: return "DigitIid";
  }
  return "?";
}

inline ProcessKind process_kind_from_string(const std::string& name) {
  for (auto k : {ProcessKind::IidMixed, ProcessKind::IidUniform, ProcessKind::GaussianStationary,
                 ProcessKind::MarkovChain, ProcessKind::DigitShared, ProcessKind::DigitIid}) {
    if (name == to_string(k)) return k;
  }
  throw ParameterError("kind: unknown process kind '" + name + "'");
}

// X_i = 0 with probability 1 - p, uniform on [0, 1) otherwise.
struct MixedParams {
  double p = 0.5;
  bool operator==(const MixedParams&) const = default;
};

struct UniformParams {
  bool operator==(const UniformParams&) const = default;
};

// Autocovariance of a stationary Gaussian sequence. Ar1: r(k) = variance *
// rho^|k| (rho = 1 gives the rank-one constant-path process). Toeplitz: r(k) =
// autocov[k], zero beyond the list.
struct CovarianceSpec {
  enum class Type { Ar1, Toeplitz };
  Type type = Type::Ar1;
  double variance = 1.0;
  double rho = 0.0;
  std::vector<double> autocov;

  double at(std::size_t lag) const {
    if (type == Type::Ar1) return variance * std::pow(rho, static_cast<double>(lag));
    return lag < autocov.size() ? autocov[lag] : 0.0;
  }
  bool operator==(const CovarianceSpec&) const = default;
};

struct GaussianParams {
  CovarianceSpec covariance;
  bool operator==(const GaussianParams&) const = default;
};

// Finite-state chain started from its stationary law; state s emits
// emissions[s].
struct MarkovParams {
  std::vector<std::vector<double>> transition;
  std::vector<double> emissions;
  bool operator==(const MarkovParams&) const = default;
};

// Y = sum_{j in S} eps_j 2^-j, Z = sum_{j not in S} eps_j 2^-j, both truncated
// at depth b_max. Digit indices are 1-based.
struct DigitParams {
  std::vector<int> S;
  int b_max = 20;
  bool operator==(const DigitParams&) const = default;
};

using ProcessParams = std::variant<MixedParams, UniformParams, GaussianParams, MarkovParams, DigitParams>;

struct GroundTruth {
  double mid = 0.0;
  std::string note;
  bool operator==(const GroundTruth&) const = default;
};

struct ProcessSpec {
  ProcessKind kind = ProcessKind::IidUniform;
  ProcessParams params = UniformParams{};
  std::optional<GroundTruth> ground_truth;

  bool operator==(const ProcessSpec&) const = default;

  static ProcessSpec iid_uniform() { return {ProcessKind::IidUniform, UniformParams{}, std::nullopt}; }
  static ProcessSpec iid_mixed(double p) { return {ProcessKind::IidMixed, MixedParams{p}, std::nullopt}; }
  static ProcessSpec gaussian_ar1(double variance, double rho) {
    CovarianceSpec c;
    c.type = CovarianceSpec::Type::Ar1;
    c.variance = variance;
    c.rho = rho;
    return {ProcessKind::GaussianStationary, GaussianParams{c}, std::nullopt};
  }
  static ProcessSpec gaussian_toeplitz(std::vector<double> autocov) {
    CovarianceSpec c;
    c.type = CovarianceSpec::Type::Toeplitz;
    c.autocov = std::move(autocov);
    return {ProcessKind::GaussianStationary, GaussianParams{c}, std::nullopt};
  }
  static ProcessSpec markov(std::vector<std::vector<double>> transition, std::vector<double> emissions) {
    return {ProcessKind::MarkovChain, MarkovParams{std::move(transition), std::move(emissions)}, std::nullopt};
  }
  static ProcessSpec digit_shared(std::vector<int> S, int b_max) {
    return {ProcessKind::DigitShared, DigitParams{std::move(S), b_max}, std::nullopt};
  }
  static ProcessSpec digit_iid(std::vector<int> S, int b_max) {
    return {ProcessKind::DigitIid, DigitParams{std::move(S), b_max}, std::nullopt};
  }
};

// Realizations of X^n, one per row. For the digit processes `family` records
// which digit family produced each value (1 = Y, 0 = Z): one entry per trial
// for DigitShared, one per coordinate for DigitIid, empty otherwise.
struct SampleBatch {
  std::size_t n = 0;
  std::size_t trials = 0;
  std::vector<double> data;
  std::uint64_t seed = 0;
  ProcessSpec spec;
  std::vector<std::uint8_t> family;

  std::span<const double> row(std::size_t t) const { return {data.data() + t * n, n}; }
  std::span<double> row(std::size_t t) { return {data.data() + t * n, n}; }
  double at(std::size_t t, std::size_t i) const { return data[t * n + i]; }

  // The first `len` coordinates of every trial; a sample of X^len by
  // stationarity.
  SampleBatch prefix(std::size_t len) const {
    if (len == 0 || len > n) throw ParameterError("prefix: length must be in [1, n]");
    SampleBatch out;
    out.n = len;
    out.trials = trials;
    out.seed = seed;
    out.spec = spec;
    out.data.resize(len * trials);
    for (std::size_t t = 0; t < trials; ++t) {
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(t * n), len,
                  out.data.begin() + static_cast<std::ptrdiff_t>(t * len));
    }
    if (spec.kind == ProcessKind::DigitShared) {
      out.family = family;
    } else if (spec.kind == ProcessKind::DigitIid) {
      out.family.resize(len * trials);
      for (std::size_t t = 0; t < trials; ++t) {
        std::copy_n(family.begin() + static_cast<std::ptrdiff_t>(t * n), len,
                    out.family.begin() + static_cast<std::ptrdiff_t>(t * len));
      }
    }
    return out;
  }
};

inline constexpr std::size_t kMaxBatchElements = std::size_t{1} << 28;

namespace detail {

inline bool markov_irreducible(const std::vector<std::vector<double>>& P) {
  const std::size_t k = P.size();
  for (std::size_t start = 0; start < k; ++start) {
    std::vector<bool> seen(k, false);
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = true;
    std::size_t reached = 1;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v = 0; v < k; ++v) {
        if (P[u][v] > 0.0 && !seen[v]) {
          seen[v] = true;
          ++reached;
          q.push(v);
        }
      }
    }
    if (reached != k) return false;
  }
  return true;
}

// Period of an irreducible chain: gcd over edges (u, v) of level(u) + 1 -
// level(v), with levels from a BFS rooted at state 0.
inline std::size_t markov_period(const std::vector<std::vector<double>>& P) {
  const std::size_t k = P.size();
  std::vector<long> level(k, -1);
  std::queue<std::size_t> q;
  level[0] = 0;
  q.push(0);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t v = 0; v < k; ++v) {
      if (P[u][v] > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        q.push(v);
      }
    }
  }
  long g = 0;
  for (std::size_t u = 0; u < k; ++u) {
    for (std::size_t v = 0; v < k; ++v) {
      if (P[u][v] > 0.0) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return static_cast<std::size_t>(g);
}

inline std::vector<double> markov_stationary(const std::vector<std::vector<double>>& P) {
  const auto k = static_cast<Eigen::Index>(P.size());
  Eigen::MatrixXd M(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      M(i, j) = P[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - (i == j ? 1.0 : 0.0);
    }
  }
  M.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1.0;
  Eigen::VectorXd pi = M.colPivHouseholderQr().solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
  return out;
}

inline std::size_t draw_state(Engine& rng, std::span<const double> probs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    acc += probs[s];
    if (u < acc) return s;
  }
  // Rounding left u beyond the cumulative sum; return the last reachable state.
  for (std::size_t s = probs.size(); s-- > 0;) {
    if (probs[s] > 0.0) return s;
  }
  return 0;
}

// Digit masks over bit positions 0..b_max-1 (bit j-1 carries digit j).
inline std::pair<std::uint64_t, std::uint64_t> digit_masks(const DigitParams& d) {
  std::uint64_t in_s = 0;
  for (int j : d.S) {
    if (j >= 1 && j <= d.b_max) in_s |= std::uint64_t{1} << (j - 1);
  }
  const std::uint64_t all = d.b_max >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << d.b_max) - 1;
  return {in_s, all & ~in_s};
}

// Value sum_j bit_{j-1}(digits) 2^-j; exact for b_max <= 52.
inline double digits_to_value(std::uint64_t digits, int b_max) {
  // Reverse the digit order so that digit 1 is the most significant bit.
  std::uint64_t mantissa = 0;
  for (int j = 1; j <= b_max; ++j) {
    mantissa = (mantissa << 1) | ((digits >> (j - 1)) & 1u);
  }
  return std::ldexp(static_cast<double>(mantissa), -b_max);
}

}  // namespace detail

// Throws ParameterError naming the first violated invariant.
inline void validate(const ProcessSpec& spec) {
  auto require_params = [&](bool ok) {
    if (!ok) throw ParameterError(std::string("params: parameter record does not match kind ") + to_string(spec.kind));
  };
  switch (spec.kind) {
    case ProcessKind::IidMixed: {
      require_params(std::holds_alternative<MixedParams>(spec.params));
      const double p = std::get<MixedParams>(spec.params).p;
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("params.p: must lie in [0, 1]");
      break;
    }
    case ProcessKind::IidUniform:
      require_params(std::holds_alternative<UniformParams>(spec.params));
      break;
    case ProcessKind::GaussianStationary: {
      require_params(std::holds_alternative<GaussianParams>(spec.params));
      const auto& c = std::get<GaussianParams>(spec.params).covariance;
      if (c.type == CovarianceSpec::Type::Ar1) {
        if (!(c.variance >= 0.0) || !std::isfinite(c.variance)) {
          throw ParameterError("params.covariance.variance: must be finite and >= 0");
        }
        if (!(std::abs(c.rho) <= 1.0)) throw ParameterError("params.covariance.rho: must lie in [-1, 1]");
      } else {
        if (c.autocov.empty()) throw ParameterError("params.covariance.autocov: must be non-empty");
        if (!(c.autocov[0] >= 0.0)) throw ParameterError("params.covariance.autocov: lag-0 variance must be >= 0");
        for (double v : c.autocov) {
          if (!std::isfinite(v)) throw ParameterError("params.covariance.autocov: entries must be finite");
        }
      }
      break;
    }
    case ProcessKind::MarkovChain: {
      require_params(std::holds_alternative<MarkovParams>(spec.params));
      const auto& m = std::get<MarkovParams>(spec.params);
      const std::size_t k = m.transition.size();
      if (k == 0) throw ParameterError("params.transition: must be non-empty");
      if (m.emissions.size() != k) throw ParameterError("params.emissions: need one value per state");
      for (const auto& row : m.transition) {
        if (row.size() != k) throw ParameterError("params.transition: must be square");
        double sum = 0.0;
        for (double v : row) {
          if (!(v >= 0.0)) throw ParameterError("params.transition: entries must be >= 0");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ParameterError("params.transition: rows must sum to 1 within 1e-12");
      }
      for (double v : m.emissions) {
        if (!std::isfinite(v)) throw ParameterError("params.emissions: values must be finite");
      }
      if (!detail::markov_irreducible(m.transition)) throw ParameterError("params.transition: chain must be irreducible");
      if (detail::markov_period(m.transition) != 1) throw ParameterError("params.transition: chain must be aperiodic");
      break;
    }
    case ProcessKind::DigitShared:
    case ProcessKind::DigitIid: {
      require_params(std::holds_alternative<DigitParams>(spec.params));
      const auto& d = std::get<DigitParams>(spec.params);
      if (d.b_max < 1 || d.b_max > 52) throw ParameterError("params.b_max: must lie in [1, 52]");
      for (int j : d.S) {
        if (j < 1 || j > d.b_max) throw ParameterError("params.S: indices must lie in [1, b_max]");
      }
      break;
    }
  }
  if (spec.ground_truth) {
    const double g = spec.ground_truth->mid;
    if (!(g >= 0.0 && g <= 1.0)) throw ParameterError("ground_truth.mid: must lie in [0, 1]");
  }
}

namespace detail {

// Symmetric square root factor of the n x n Toeplitz covariance, eigenvalues
// below 1e-12 clipped to zero.
inline Eigen::MatrixXd gaussian_factor(const CovarianceSpec& cov, std::size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd sigma(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      sigma(i, j) = cov.at(static_cast<std::size_t>(std::abs(i - j)));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericError("params.covariance: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-9 * scale) {
    throw ParameterError("params.covariance: Toeplitz matrix is not positive semidefinite at n = " + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < N; ++i) lambda(i) = lambda(i) < 1e-12 ? 0.0 : std::sqrt(lambda(i));
  return eig.eigenvectors() * lambda.asDiagonal();
}

}  // namespace detail

// Draws `trials` independent realizations of X^n. Trial t uses its own stream
// derived from (seed, t), so output is bit-identical for identical arguments
// and independent of the worker count.
inline SampleBatch sample_process(const ProcessSpec& spec, std::size_t n, std::size_t trials, std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw ParameterError("n: block length must be >= 1");
  if (trials < 1) throw ParameterError("trials: must be >= 1");
  if (n > kMaxBatchElements / trials) {
    throw BudgetError("capacity: n * trials exceeds " + std::to_string(kMaxBatchElements) + " samples");
  }
  SampleBatch batch;
  batch.n = n;
  batch.trials = trials;
  batch.seed = seed;
  batch.spec = spec;
  batch.data.assign(n * trials, 0.0);

  switch (spec.kind) {
    case ProcessKind::IidMixed: {
      const double p = std::get<MixedParams>(spec.params).p;
      parallel_for(trials, [&](std::size_t t) {
        Engine rng = make_engine(seed, "trial", t);
        auto row = batch.row(t);
        for (std::size_t i = 0; i < n; ++i) {
          const double coin = uniform01(rng);
          const double value = uniform01(rng);
          row[i] = coin < p ? value : 0.0;
        }
      });
      break;
    }
    case ProcessKind::IidUniform:
      parallel_for(trials, [&](std::size_t t) {
        Engine rng = make_engine(seed, "trial", t);
        for (double& v : batch.row(t)) v = uniform01(rng);
      });
      break;
    case ProcessKind::GaussianStationary: {
      const Eigen::MatrixXd L = detail::gaussian_factor(std::get<GaussianParams>(spec.params).covariance, n);
      parallel_for(trials, [&](std::size_t t) {
        Engine rng = make_engine(seed, "trial", t);
        Eigen::VectorXd z(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
        const Eigen::VectorXd x = L * z;
        auto row = batch.row(t);
        for (std::size_t i = 0; i < n; ++i) row[i] = x(static_cast<Eigen::Index>(i));
      });
      break;
    }
    case ProcessKind::MarkovChain: {
      const auto& m = std::get<MarkovParams>(spec.params);
      const std::vector<double> pi = detail::markov_stationary(m.transition);
      parallel_for(trials, [&](std::size_t t) {
        Engine rng = make_engine(seed, "trial", t);
        auto row = batch.row(t);
        std::size_t state = detail::draw_state(rng, pi);
        for (std::size_t i = 0; i < n; ++i) {
          if (i > 0) state = detail::draw_state(rng, m.transition[state]);
          row[i] = m.emissions[state];
        }
      });
      break;
    }
    case ProcessKind::DigitShared:
    case ProcessKind::DigitIid: {
      const auto& d = std::get<DigitParams>(spec.params);
      const auto [mask_y, mask_z] = detail::digit_masks(d);
      const bool shared = spec.kind == ProcessKind::DigitShared;
      batch.family.assign(shared ? trials : trials * n, 0);
      parallel_for(trials, [&](std::size_t t) {
        Engine rng = make_engine(seed, "trial", t);
        const bool trial_is_y = (rng() >> 63) != 0;
        if (shared) batch.family[t] = trial_is_y ? 1 : 0;
        auto row = batch.row(t);
        for (std::size_t i = 0; i < n; ++i) {
          bool is_y = trial_is_y;
          if (!shared) {
            is_y = (rng() >> 63) != 0;
            batch.family[t * n + i] = is_y ? 1 : 0;
          }
          const std::uint64_t digits = rng() & (is_y ? mask_y : mask_z);
          row[i] = detail::digits_to_value(digits, d.b_max);
        }
      });
      break;
    }
  }
  return batch;
}

// Exact dyadic rational 2^-exponent.
struct DyadicMass {
  int exponent = 0;
  double value() const { return std::ldexp(1.0, -exponent); }
  bool operator==(const DyadicMass&) const = default;
};

// Mass of a depth-b dyadic cell charged by the digit variable with support S:
// 2^-#(S intersect [1, b]).
inline DyadicMass dyadic_cell_mass(std::span<const int> S, int b) {
  if (b < 1) throw ParameterError("b: depth must be >= 1");
  if (b > 63) throw NumericError("b: depth above 63 is not representable exactly");
  std::vector<int> sorted(S.begin(), S.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  int count = 0;
  for (int j : sorted) {
    if (j >= 1 && j <= b) ++count;
  }
  return {count};
}

// Closed-form mean information dimension when one is known.
inline std::optional<GroundTruth> ground_truth_mid(const ProcessSpec& spec) {
  validate(spec);
  if (spec.ground_truth) return spec.ground_truth;
  switch (spec.kind) {
    case ProcessKind::IidMixed:
      return GroundTruth{std::get<MixedParams>(spec.params).p, "i.i.d. mixed source: mid = id(X_1) = p"};
    case ProcessKind::IidUniform:
      return GroundTruth{1.0, "i.i.d. absolutely continuous margin: mid = 1"};
    case ProcessKind::GaussianStationary: {
      const auto& c = std::get<GaussianParams>(spec.params).covariance;
      if (c.type == CovarianceSpec::Type::Ar1) {
        if (c.variance == 0.0 || std::abs(c.rho) == 1.0) {
          return GroundTruth{0.0, "Gaussian with rank(Sigma_n) <= 1: mid = lim rank/n = 0"};
        }
        return GroundTruth{1.0, "Gaussian AR(1), |rho| < 1: Sigma_n full rank, mid = 1"};
      }
      if (std::all_of(c.autocov.begin(), c.autocov.end(), [](double v) { return v == 0.0; })) {
        return GroundTruth{0.0, "degenerate Gaussian: mid = 0"};
      }
      return std::nullopt;
    }
    case ProcessKind::MarkovChain:
      return GroundTruth{0.0, "finite-alphabet emissions: H([X^n]_k) <= n log #states, mid = 0"};
    case ProcessKind::DigitShared:
    case ProcessKind::DigitIid:
      return GroundTruth{0.5, "digit process: mid = idimr = 1/2 at scales down to 2^-b_max"};
  }
  return std::nullopt;
}

}  // namespace midcs
