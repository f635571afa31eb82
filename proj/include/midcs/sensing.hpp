#pragma once

// Gaussian measurement matrices, Monte-Carlo audits of their small-ball and
// operator-norm tails, and desk-scale decoders.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "midcs/error.hpp"
#include "midcs/parallel.hpp"
#include "midcs/random.hpp"
#include "midcs/stats.hpp"

namespace midcs {

// ---------------------------------------------------------------- matrices

struct GateReport {
  bool evaluated = false;  // gates only apply once m n >= 1e4
  double mean = 0.0;
  double variance = 0.0;
  bool mean_ok = true;
  bool variance_ok = true;
  bool ok() const { return mean_ok && variance_ok; }
};

// Entries are drawn row by row from one stream, so the first m' rows of
// sample_matrix(m, n, seed) equal sample_matrix(m', n, seed).
struct SensingMatrix {
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd entries;

  GateReport gates() const {
    GateReport g;
    const double count = static_cast<double>(m * n);
    g.mean = entries.mean();
    g.variance = (entries.array() - g.mean).square().sum() / std::max(1.0, count - 1.0);
    if (count >= 1e4) {
      g.evaluated = true;
      g.mean_ok = std::abs(g.mean) <= 4.0 / std::sqrt(count);
      g.variance_ok = std::abs(g.variance - 1.0) <= 6.0 / std::sqrt(count);
    }
    return g;
  }

  SensingMatrix top_rows(std::size_t rows) const {
    if (rows < 1 || rows > m) throw ParameterError("m: row count must lie in [1, m]");
    return {rows, n, seed, entries.topRows(static_cast<Eigen::Index>(rows))};
  }
};

inline SensingMatrix sample_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ParameterError("m, n: must be >= 1");
  if (m > n) throw ParameterError("m: must not exceed n");
  SensingMatrix A{m, n, seed, Eigen::MatrixXd(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n))};
  Engine rng = make_engine(seed, "sensing-matrix");
  for (Eigen::Index i = 0; i < A.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.entries.cols(); ++j) A.entries(i, j) = standard_normal(rng);
  }
  return A;
}

// ---------------------------------------------------------------- audits

struct SmallBallRow {
  std::size_t m = 0;
  double eps = 0.0;
  std::size_t hits = 0;
  std::size_t trials = 0;
  double empirical = 0.0;
  double wilson_hi = 0.0;
  double bound = 0.0;  // e^m eps^m
  bool pass = false;
  // Even zero hits cannot bring the Wilson upper limit under the bound.
  bool power_limited = false;
};

struct SmallBallReport {
  std::vector<SmallBallRow> rows;
  std::vector<std::string> warnings;
};

// P(|A u| <= eps sqrt(m) |u|) for u = e_1, i.e. the chi-square(m) law of
// |A e_1|^2 below eps^2 m. One draw per trial serves every eps.
inline SmallBallReport small_ball_audit(std::size_t m, std::span<const double> eps_grid, std::size_t trials,
                                        std::uint64_t seed) {
  if (m < 1) throw ParameterError("m: must be >= 1");
  if (trials < 1) throw ParameterError("trials: must be >= 1");
  for (double e : eps_grid) {
    if (!(e > 0.0 && e < 1.0)) throw ParameterError("eps_grid: values must lie in (0, 1)");
  }
  SmallBallReport rep;
  if (trials < 1000) rep.warnings.push_back("fewer than 1e3 trials: audit has little power");
  std::vector<double> norms(trials);
  const std::size_t chunks = (trials + 4095) / 4096;
  parallel_for(chunks, [&](std::size_t c) {
    Engine rng = make_engine(seed, "small-ball", c);
    const std::size_t lo = c * 4096, hi = std::min(trials, lo + 4096);
    for (std::size_t t = lo; t < hi; ++t) {
      double q = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double g = standard_normal(rng);
        q += g * g;
      }
      norms[t] = q;
    }
  });
  const Interval floor_ci = wilson_interval(0, trials);
  for (double eps : eps_grid) {
    SmallBallRow row;
    row.m = m;
    row.eps = eps;
    row.trials = trials;
    const double threshold = eps * eps * static_cast<double>(m);
    row.hits = static_cast<std::size_t>(std::count_if(norms.begin(), norms.end(), [&](double q) { return q <= threshold; }));
    row.empirical = static_cast<double>(row.hits) / static_cast<double>(trials);
    row.wilson_hi = wilson_interval(row.hits, trials).hi;
    row.bound = std::exp(static_cast<double>(m) * (1.0 + std::log(eps)));
    row.pass = row.wilson_hi <= row.bound;
    row.power_limited = floor_ci.hi > row.bound;
    rep.rows.push_back(row);
  }
  return rep;
}

// Largest singular value by power iteration on A A^T.
inline double spectral_norm(const Eigen::MatrixXd& A, Engine& rng, double tol = 1e-8, std::size_t max_iter = 10000) {
  const Eigen::MatrixXd G = A * A.transpose();
  Eigen::VectorXd v(G.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = standard_normal(rng);
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = G * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return std::sqrt(std::max(0.0, next));
    lambda = next;
  }
  throw NumericError("spectral_norm: power iteration did not converge in " + std::to_string(max_iter) + " iterations");
}

struct NormPercentile {
  double percentile = 0.0;  // in [0, 100]
  double value = 0.0;       // quantile of |A| / sqrt(n)
};

struct NormAuditReport {
  std::size_t m = 0, n = 0, trials = 0;
  std::vector<NormPercentile> curve;
  double tail_level = 0.0;  // 2 e^-n
  bool exact_quantile = false;  // K_hat read at 1 - 2e^-n (else at the 99.9th percentile)
  double K_hat = 0.0;
  std::size_t column_bound_violations = 0;  // trials with |A| < largest column norm
};

inline NormAuditReport operator_norm_audit(std::size_t m, std::size_t n, std::size_t trials, std::uint64_t seed,
                                           std::vector<double> percentiles = {50.0, 90.0, 99.0, 99.9}) {
  if (m < 1 || n < 1) throw ParameterError("m, n: must be >= 1");
  if (m > n) throw ParameterError("m: must not exceed n");
  if (trials < 1) throw ParameterError("trials: must be >= 1");
  std::vector<double> scaled(trials);
  std::vector<std::uint8_t> violation(trials, 0);
  const double root_n = std::sqrt(static_cast<double>(n));
  parallel_for(trials, [&](std::size_t t) {
    const SensingMatrix A = sample_matrix(m, n, derive_seed(seed, "norm-audit", t));
    Engine start = make_engine(seed, "norm-audit-start", t);
    const double norm = spectral_norm(A.entries, start);
    const double col = A.entries.colwise().norm().maxCoeff();
    if (norm < col * (1.0 - 1e-7)) violation[t] = 1;
    scaled[t] = norm / root_n;
  });
  NormAuditReport rep;
  rep.m = m;
  rep.n = n;
  rep.trials = trials;
  for (double p : percentiles) rep.curve.push_back({p, quantile(scaled, p / 100.0)});
  rep.tail_level = 2.0 * std::exp(-static_cast<double>(n));
  rep.exact_quantile = n <= 12 && rep.tail_level * static_cast<double>(trials) >= 1.0;
  rep.K_hat = quantile(scaled, rep.exact_quantile ? std::max(0.0, 1.0 - rep.tail_level) : 0.999);
  rep.column_bound_violations = static_cast<std::size_t>(std::count(violation.begin(), violation.end(), 1));
  return rep;
}

// ---------------------------------------------------------------- decoders

inline double recovery_error(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) throw ParameterError("x_hat: length must match x");
  if (x.empty()) throw ParameterError("x: must be non-empty");
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

enum class DecodeStatus { Ok, Infeasible, BudgetExhausted };

inline const char* to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::Infeasible: return "infeasible";
    case DecodeStatus::BudgetExhausted: return "budget-exhausted";
  }
  return "?";
}

struct DecodeResult {
  std::vector<double> x_hat;
  double residual = 0.0;  // |A x_hat - y|_2
  DecodeStatus status = DecodeStatus::Ok;
  std::vector<std::size_t> support;  // sparse decoder only
  double entropy = 0.0;              // min-entropy decoder only
  std::uint64_t examined = 0;        // supports or lattice points evaluated
};

namespace detail {

inline double zero_tolerance(const Eigen::VectorXd& y) { return 1e-10 * std::max(1.0, y.norm()); }

// Least-squares state for a growing column set via modified Gram-Schmidt.
// Storage is preallocated and flat: the enumeration pushes and pops millions
// of columns per decode.
struct GramSchmidt {
  const double* a = nullptr;  // column-major m x n
  std::size_t m = 0;
  std::vector<double> q;    // m x capacity, orthonormal columns
  std::vector<double> r;    // capacity x capacity, upper triangular, column-major
  std::vector<double> res;  // m x (capacity + 1); column d is the residual after d columns
  std::vector<double> col_norm;
  std::vector<std::size_t> cols;
  std::size_t capacity = 0;

  GramSchmidt(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, std::size_t cap)
      : a(A.data()), m(static_cast<std::size_t>(A.rows())), q(m * cap), r(cap * cap, 0.0), res(m * (cap + 1)),
        col_norm(static_cast<std::size_t>(A.cols())), capacity(cap) {
    std::copy(y.data(), y.data() + y.size(), res.begin());
    for (std::size_t j = 0; j < col_norm.size(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[j * m + i] * a[j * m + i];
      col_norm[j] = std::sqrt(s);
    }
    cols.reserve(cap);
  }

  std::size_t depth() const { return cols.size(); }
  const double* residual() const { return res.data() + cols.size() * m; }
  double residual_norm() const {
    const double* v = residual();
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += v[i] * v[i];
    return std::sqrt(s);
  }

  // False (and no change) when column j is numerically dependent on the set.
  bool push(std::size_t j) {
    const std::size_t d = cols.size();
    double* v = q.data() + d * m;
    std::copy(a + j * m, a + (j + 1) * m, v);
    for (std::size_t c = 0; c < d; ++c) {
      const double* qc = q.data() + c * m;
      double proj = 0.0;
      for (std::size_t i = 0; i < m; ++i) proj += qc[i] * v[i];
      r[d * capacity + c] = proj;
      for (std::size_t i = 0; i < m; ++i) v[i] -= proj * qc[i];
    }
    double nv = 0.0;
    for (std::size_t i = 0; i < m; ++i) nv += v[i] * v[i];
    nv = std::sqrt(nv);
    if (!(nv > 1e-12 * std::max(1.0, col_norm[j]))) return false;
    r[d * capacity + d] = nv;
    for (std::size_t i = 0; i < m; ++i) v[i] /= nv;
    const double* prev = res.data() + d * m;
    double* next = res.data() + (d + 1) * m;
    double proj = 0.0;
    for (std::size_t i = 0; i < m; ++i) proj += v[i] * prev[i];
    for (std::size_t i = 0; i < m; ++i) next[i] = prev[i] - proj * v[i];
    cols.push_back(j);
    return true;
  }

  void pop() { cols.pop_back(); }

  std::vector<double> solution(std::size_t n, const Eigen::VectorXd& y) const {
    const std::size_t d = cols.size();
    std::vector<double> x(n, 0.0);
    std::vector<double> c(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const double* qk = q.data() + k * m;
      for (std::size_t i = 0; i < m; ++i) c[k] += qk[i] * y(static_cast<Eigen::Index>(i));
    }
    for (std::size_t k = d; k-- > 0;) {
      for (std::size_t l = k + 1; l < d; ++l) c[k] -= r[l * capacity + k] * c[l];
      c[k] /= r[k * capacity + k];
    }
    for (std::size_t k = 0; k < d; ++k) x[cols[k]] = c[k];
    return x;
  }
};

inline double binomial(std::size_t n, std::size_t k) {
  return std::exp(std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                  std::lgamma(static_cast<double>(n - k) + 1.0));
}

}  // namespace detail

struct SparseEnumOptions {
  std::size_t s_max = 1;
  double budget = 1e8;  // max supports in the full enumeration
  // Skip the greedy shortcut and always enumerate (for cross-checking).
  bool exhaustive_only = false;
  std::size_t zero_set_draws = 20000;  // random candidates before enumerating
  bool operator==(const SparseEnumOptions&) const = default;
};

// Support-enumeration decoder. Among supports |T| <= s_max, returns the least
// squares fit on A_T with the smallest residual; residuals within
// 1e-10 max(1, |y|) of each other count as tied, and ties go to the smaller
// support, then the lexicographically first one. Numerically rank-deficient
// supports are skipped.
//
// Greedy shortcut: when a greedy pass reaches a zero residual on T with
// |T| < m, the nonzero part S of the fit on T is returned. For y = A x with a
// Gaussian A drawn independently of x, every zero-residual support with fewer
// than m columns contains supp(x) almost surely (a missing column of supp(x)
// would have to land in a subspace of dimension < m), so S = supp(x) and it is
// the unique smallest zero-residual support: enumeration returns the same
// thing. With 2|S| <= m this only needs spark(A) = m + 1. Candidates come from
// greedy passes and then from random zero sets; enumeration only runs when
// both miss. exhaustive_only turns the shortcut off.
inline DecodeResult decode_sparse_enum(const Eigen::VectorXd& y, const Eigen::MatrixXd& A, const SparseEnumOptions& opt) {
  const auto m = static_cast<std::size_t>(A.rows());
  const auto n = static_cast<std::size_t>(A.cols());
  if (static_cast<std::size_t>(y.size()) != m) throw ParameterError("y: length must equal the row count of A");
  if (opt.s_max > n) throw ParameterError("s_max: must not exceed n");
  if (opt.s_max > m) throw ParameterError("s_max: must not exceed m");
  double total = 0.0;
  for (std::size_t k = 0; k <= opt.s_max; ++k) total += detail::binomial(n, k);
  if (total > opt.budget) {
    throw BudgetError("decode_sparse_enum: " + std::to_string(total) + " supports exceed the budget; reduce s_max");
  }
  const double tol = detail::zero_tolerance(y);
  DecodeResult best;
  best.residual = y.norm();
  best.x_hat.assign(n, 0.0);
  best.examined = 1;
  if (best.residual <= tol) return best;

  std::size_t size_cap = opt.s_max;
  if (!opt.exhaustive_only) {
    // Order-recursive matching pursuit: candidates are scored after
    // projecting out the chosen span. The pass may run past s_max, since any
    // zero-residual support below m columns prunes down to supp(x). If the
    // free pass misses, it is restarted with each column forced first.
    const std::size_t greedy_depth = std::max(opt.s_max, m - 1);
    // Prunes a zero-residual fit to its nonzero part and re-checks it.
    auto certify = [&](const std::vector<double>& fit, const std::vector<std::size_t>& over) -> std::optional<DecodeResult> {
      double peak = 0.0;
      for (std::size_t j : over) peak = std::max(peak, std::abs(fit[j]));
      std::vector<std::size_t> cols;
      for (std::size_t j : over) {
        if (std::abs(fit[j]) > 1e-9 * peak) cols.push_back(j);
      }
      if (cols.size() > opt.s_max || cols.size() >= m) return std::nullopt;
      std::sort(cols.begin(), cols.end());
      detail::GramSchmidt pruned(A, y, cols.size());
      for (std::size_t j : cols) {
        if (!pruned.push(j)) return std::nullopt;
      }
      if (!(pruned.residual_norm() <= tol)) return std::nullopt;
      DecodeResult out;
      out.x_hat = pruned.solution(n, y);
      out.residual = pruned.residual_norm();
      out.support = cols;
      out.examined = best.examined;
      return out;
    };
    auto greedy = [&](std::size_t first) -> std::optional<DecodeResult> {
      detail::GramSchmidt gs(A, y, greedy_depth);
      std::vector<bool> used(n, false);
      Eigen::MatrixXd P = A;
      while (gs.depth() < greedy_depth && gs.residual_norm() > tol) {
        std::size_t pick = n;
        if (gs.depth() == 0 && first < n) {
          pick = first;
        } else {
          double score = -1.0;
          const Eigen::Map<const Eigen::VectorXd> res(gs.residual(), static_cast<Eigen::Index>(m));
          for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            const auto col = P.col(static_cast<Eigen::Index>(j));
            const double norm = col.norm();
            if (!(norm > 1e-9 * gs.col_norm[j])) continue;
            const double s = std::abs(col.dot(res)) / norm;
            if (s > score) {
              score = s;
              pick = j;
            }
          }
        }
        if (pick == n) break;
        used[pick] = true;
        if (!gs.push(pick)) break;
        ++best.examined;
        const Eigen::Map<const Eigen::VectorXd> qn(gs.q.data() + (gs.depth() - 1) * m, static_cast<Eigen::Index>(m));
        P -= qn * (qn.transpose() * P);
      }
      if (!(gs.residual_norm() <= tol)) return std::nullopt;
      // A zero-residual support of this size exists, so enumeration stops by
      // then.
      size_cap = std::min(size_cap, gs.depth());
      if (gs.depth() >= m) return std::nullopt;
      return certify(gs.solution(n, y), gs.cols);
    };
    if (auto hit = greedy(n)) return *hit;
    for (std::size_t first = 0; first < n; ++first) {
      if (auto hit = greedy(first)) return *hit;
    }

    // Random zero sets: the solutions of A z = y form x + ker A, and forcing
    // z to vanish on n - m coordinates outside supp(x) pins z = x. A draw hits
    // with probability C(n - |supp x|, n - m) / C(n, n - m).
    // Capped at a quarter of the enumeration they stand in for.
    double enum_cost = 0.0;
    for (std::size_t k = 1; k <= std::min(size_cap, m - 1); ++k) enum_cost += detail::binomial(n, k);
    const auto draws = static_cast<std::size_t>(std::min(static_cast<double>(opt.zero_set_draws), enum_cost / 4.0));
    if (m < n && draws > 0) {
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (static_cast<std::size_t>(lu.rank()) == m) {
        const Eigen::MatrixXd N = lu.kernel();
        const Eigen::VectorXd x0 = lu.solve(y);
        const std::size_t f = n - m;
        Engine rng = make_engine(0, "sparse-enum-zero-sets");
        Eigen::MatrixXd M(f, f);
        Eigen::VectorXd rhs(f);
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        for (std::size_t draw = 0; draw < draws; ++draw) {
          const auto Z = sample_indices(rng, n, f);
          for (std::size_t r = 0; r < f; ++r) {
            M.row(static_cast<Eigen::Index>(r)) = N.row(static_cast<Eigen::Index>(Z[r]));
            rhs(static_cast<Eigen::Index>(r)) = -x0(static_cast<Eigen::Index>(Z[r]));
          }
          const Eigen::PartialPivLU<Eigen::MatrixXd> plu(M);
          const Eigen::VectorXd z = x0 + N * plu.solve(rhs);
          ++best.examined;
          const double peak = z.cwiseAbs().maxCoeff();
          std::size_t nonzero = 0;
          for (std::size_t i = 0; i < n; ++i) nonzero += std::abs(z(static_cast<Eigen::Index>(i))) > 1e-9 * peak;
          if (nonzero >= m) continue;
          if (auto hit = certify(std::vector<double>(z.data(), z.data() + n), all)) return *hit;
        }
      }
    }
  }

  // Enumeration by increasing support size, lexicographic within a size. The
  // first zero-residual support wins; otherwise keep the least residual.
  std::optional<std::vector<std::size_t>> best_support;
  double best_res = best.residual;
  std::vector<double> best_x = best.x_hat;
  for (std::size_t size = 1; size <= size_cap; ++size) {
    detail::GramSchmidt gs(A, y, size);
    bool found_zero = false;
    // Depth-first over increasing column indices.
    auto dfs = [&](auto&& self, std::size_t start) -> void {
      if (found_zero) return;
      if (gs.depth() == size) {
        ++best.examined;
        const double res = gs.residual_norm();
        if (res < best_res - tol) {
          best_res = res;
          best_support = gs.cols;
          best_x = gs.solution(n, y);
        }
        if (res <= tol) found_zero = true;
        return;
      }
      const std::size_t remaining = size - gs.depth();
      for (std::size_t j = start; j + remaining <= n && !found_zero; ++j) {
        if (!gs.push(j)) continue;
        self(self, j + 1);
        gs.pop();
      }
    };
    dfs(dfs, 0);
    if (found_zero) break;
  }
  best.x_hat = best_x;
  best.residual = (A * Eigen::Map<const Eigen::VectorXd>(best_x.data(), static_cast<Eigen::Index>(n)) - y).norm();
  best.support = best_support.value_or(std::vector<std::size_t>{});
  return best;
}

enum class SearchMode { Exhaustive, Anneal };

struct MinEntropyOptions {
  std::int64_t k = 2;  // lattice denominator
  double box = 1.0;    // candidates lie in [0, box]^n
  double tau = 1e-9;   // feasibility: |A x - y| <= tau sqrt(m)
  SearchMode mode = SearchMode::Exhaustive;
  double budget = 1e8;  // lattice points evaluated
  std::size_t anneal_iterations = 200000;
  std::uint64_t seed = 0;
  bool operator==(const MinEntropyOptions&) const = default;
};

namespace detail {

// Entropy in bits of the value histogram of a lattice vector, evaluated from
// sorted counts so equal multisets give bit-identical values.
inline double lattice_entropy(std::vector<std::size_t> counts) {
  counts.erase(std::remove(counts.begin(), counts.end(), std::size_t{0}), counts.end());
  std::sort(counts.begin(), counts.end());
  return entropy_from_counts(counts);
}

// Candidate order: entropy, then residual, then lexicographic (visit order).
struct LatticeBest {
  bool have = false;
  double entropy = 0.0;
  double residual = 0.0;
  std::vector<std::size_t> levels;

  bool offer(double h, double res, const std::vector<std::size_t>& lv) {
    if (have) {
      if (h > entropy + 1e-12) return false;
      if (h >= entropy - 1e-12) {
        if (res > residual) return false;
        if (res == residual && !std::lexicographical_compare(lv.begin(), lv.end(), levels.begin(), levels.end())) {
          return false;
        }
      }
    }
    have = true;
    entropy = h;
    residual = res;
    levels = lv;
    return true;
  }
};

struct LeastResidual {
  bool have = false;
  double residual = 0.0;
  std::vector<std::size_t> levels;

  void offer(double res, const std::vector<std::size_t>& lv) {
    if (have && !(res < residual)) return;
    have = true;
    residual = res;
    levels = lv;
  }
};

}  // namespace detail

// Min-empirical-entropy lattice decoder. Candidates have coordinates j / k
// with 0 <= j / k <= box; among those with |A x - y| <= tau sqrt(m) it returns
// one minimizing the entropy of the coordinate-value histogram, ties broken by
// smaller residual, then lexicographically. Without a feasible candidate the
// least-residual one is returned with status Infeasible.
inline DecodeResult decode_min_entropy(const Eigen::VectorXd& y, const Eigen::MatrixXd& A, const MinEntropyOptions& opt) {
  const auto m = static_cast<std::size_t>(A.rows());
  const auto n = static_cast<std::size_t>(A.cols());
  if (static_cast<std::size_t>(y.size()) != m) throw ParameterError("y: length must equal the row count of A");
  if (opt.k < 1) throw ParameterError("k: lattice denominator must be >= 1");
  if (!(opt.box >= 0.0)) throw ParameterError("box: amplitude bound must be >= 0");
  if (!(opt.tau >= 0.0)) throw ParameterError("tau: must be >= 0");
  const std::size_t L = static_cast<std::size_t>(std::floor(static_cast<double>(opt.k) * opt.box + 1e-9)) + 1;
  const double kd = static_cast<double>(opt.k);
  const double threshold = opt.tau * std::sqrt(static_cast<double>(m)) + 1e-12 * (1.0 + y.norm());

  detail::LatticeBest best;
  detail::LeastResidual fallback;
  std::uint64_t examined = 0;
  bool exhausted = false;

  if (opt.mode == SearchMode::Exhaustive) {
    const double points = std::pow(static_cast<double>(L), static_cast<double>(n));
    const auto budget = static_cast<std::uint64_t>(std::min(opt.budget, 1e18));
    std::vector<std::size_t> levels(n, 0), counts(L, 0);
    std::vector<Eigen::VectorXd> partial(n + 1, y);
    auto dfs = [&](auto&& self, std::size_t depth) -> void {
      if (exhausted) return;
      if (depth == n) {
        if (examined >= budget) {
          exhausted = true;
          return;
        }
        ++examined;
        const double res = partial[n].norm();
        fallback.offer(res, levels);
        if (res <= threshold) best.offer(detail::lattice_entropy(counts), res, levels);
        return;
      }
      for (std::size_t l = 0; l < L && !exhausted; ++l) {
        levels[depth] = l;
        ++counts[l];
        partial[depth + 1] = partial[depth] - A.col(static_cast<Eigen::Index>(depth)) * (static_cast<double>(l) / kd);
        self(self, depth + 1);
        --counts[l];
      }
    };
    dfs(dfs, 0);
    exhausted = exhausted || static_cast<double>(examined) < points;
  } else {
    Engine rng = make_engine(opt.seed, "anneal");
    std::vector<std::size_t> levels(n, 0), counts(L, 0);
    counts[0] = n;
    Eigen::VectorXd r = y;
    const double ynorm = std::max(y.norm(), 1e-12);
    const double weight = static_cast<double>(n);
    auto objective = [&](double h, double res) { return h + weight * std::max(0.0, res - threshold) / ynorm; };
    double h = detail::lattice_entropy(counts), res = r.norm();
    double current = objective(h, res);
    auto record = [&] {
      ++examined;
      fallback.offer(res, levels);
      if (res <= threshold) best.offer(h, res, levels);
    };
    record();
    const std::size_t iters = std::min<std::size_t>(opt.anneal_iterations, static_cast<std::size_t>(opt.budget));
    const double t0 = 1.0, t1 = 1e-3;
    for (std::size_t it = 0; it < iters && L > 1; ++it) {
      const double temp = t0 * std::pow(t1 / t0, static_cast<double>(it) / static_cast<double>(std::max<std::size_t>(1, iters - 1)));
      const auto i = static_cast<std::size_t>(uniform_index(rng, n));
      std::size_t l = static_cast<std::size_t>(uniform_index(rng, L - 1));
      if (l >= levels[i]) ++l;
      const double delta = (static_cast<double>(l) - static_cast<double>(levels[i])) / kd;
      Eigen::VectorXd r_new = r - A.col(static_cast<Eigen::Index>(i)) * delta;
      --counts[levels[i]];
      ++counts[l];
      const double h_new = detail::lattice_entropy(counts);
      const double res_new = r_new.norm();
      const double cand = objective(h_new, res_new);
      if (cand <= current || uniform01(rng) < std::exp((current - cand) / temp)) {
        levels[i] = l;
        r = std::move(r_new);
        h = h_new;
        res = res_new;
        current = cand;
        if ((it & 1023) == 0) {
          // Refresh the running residual against accumulated rounding.
          r = y;
          for (std::size_t c = 0; c < n; ++c) r -= A.col(static_cast<Eigen::Index>(c)) * (static_cast<double>(levels[c]) / kd);
          res = r.norm();
          current = objective(h, res);
        }
        record();
      } else {
        --counts[l];
        ++counts[levels[i]];
      }
    }
    exhausted = static_cast<double>(opt.anneal_iterations) > opt.budget;
  }

  DecodeResult out;
  out.examined = examined;
  const auto& chosen = best.have ? best.levels : fallback.levels;
  out.x_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x_hat[i] = static_cast<double>(chosen[i]) / kd;
  out.residual = (A * Eigen::Map<const Eigen::VectorXd>(out.x_hat.data(), static_cast<Eigen::Index>(n)) - y).norm();
  std::vector<std::size_t> counts(L, 0);
  for (std::size_t l : chosen) ++counts[l];
  out.entropy = detail::lattice_entropy(counts);
  if (exhausted) {
    out.status = DecodeStatus::BudgetExhausted;
  } else {
    out.status = best.have ? DecodeStatus::Ok : DecodeStatus::Infeasible;
  }
  return out;
}

// Minimum-norm least-squares solution A^+ y.
inline DecodeResult decode_pinv(const Eigen::VectorXd& y, const Eigen::MatrixXd& A) {
  if (y.size() != A.rows()) throw ParameterError("y: length must equal the row count of A");
  const Eigen::VectorXd x = A.completeOrthogonalDecomposition().solve(y);
  DecodeResult out;
  out.x_hat.assign(x.data(), x.data() + x.size());
  out.residual = (A * x - y).norm();
  return out;
}

inline DecodeResult decode_zero(const Eigen::VectorXd& y, const Eigen::MatrixXd& A) {
  DecodeResult out;
  out.x_hat.assign(static_cast<std::size_t>(A.cols()), 0.0);
  out.residual = y.norm();
  return out;
}

enum class DecoderKind { SparseEnum, MinEntropy, Pinv, Zero };

struct DecoderConfig {
  DecoderKind kind = DecoderKind::SparseEnum;
  SparseEnumOptions sparse;
  MinEntropyOptions entropy;

  bool operator==(const DecoderConfig&) const = default;

  std::string id() const {
    switch (kind) {
      case DecoderKind::SparseEnum: return "sparse-enum(s_max=" + std::to_string(sparse.s_max) + ")";
      case DecoderKind::MinEntropy: return "min-entropy(k=" + std::to_string(entropy.k) + ")";
      case DecoderKind::Pinv: return "pinv";
      case DecoderKind::Zero: return "zero";
    }
    return "?";
  }
};

inline const char* to_string(DecoderKind k) {
  switch (k) {
    case DecoderKind::SparseEnum: return "sparse-enum";
    case DecoderKind::MinEntropy: return "min-entropy";
    case DecoderKind::Pinv: return "pinv";
    case DecoderKind::Zero: return "zero";
  }
  return "?";
}

inline DecoderKind decoder_kind_from_string(const std::string& s) {
  for (auto k : {DecoderKind::SparseEnum, DecoderKind::MinEntropy, DecoderKind::Pinv, DecoderKind::Zero}) {
    if (s == to_string(k)) return k;
  }
  throw ParameterError("decoder.kind: unknown decoder '" + s + "'");
}

// Runs a decoder; `seed` only feeds the annealing search. s_max is clipped to
// the row count so one config can serve every rate.
inline DecodeResult decode(const DecoderConfig& cfg, const Eigen::VectorXd& y, const Eigen::MatrixXd& A,
                           std::uint64_t seed) {
  switch (cfg.kind) {
    case DecoderKind::SparseEnum: {
      SparseEnumOptions o = cfg.sparse;
      o.s_max = std::min<std::size_t>(o.s_max, static_cast<std::size_t>(A.rows()));
      return decode_sparse_enum(y, A, o);
    }
    case DecoderKind::MinEntropy: {
      MinEntropyOptions o = cfg.entropy;
      o.seed = seed;
      return decode_min_entropy(y, A, o);
    }
    case DecoderKind::Pinv: return decode_pinv(y, A);
    case DecoderKind::Zero: return decode_zero(y, A);
  }
  throw ParameterError("decoder.kind: unknown decoder");
}

}  // namespace midcs
