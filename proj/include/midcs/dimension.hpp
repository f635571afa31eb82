#pragma once

// Quantization, plug-in entropy and scale-ladder estimators for information
// dimension, mean information dimension, information dimension rate and
// local / average-local dimension.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "midcs/error.hpp"
#include "midcs/parallel.hpp"
#include "midcs/process.hpp"
#include "midcs/random.hpp"
#include "midcs/stats.hpp"

namespace midcs {

// ---------------------------------------------------------------- lattice

// Cells floor(k x) of every coordinate, row-major like SampleBatch.
struct LatticeBlock {
  std::int64_t k = 1;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::vector<std::int64_t> cells;

  std::int64_t at(std::size_t t, std::size_t i) const { return cells[t * n + i]; }
};

inline double dequantize(std::int64_t cell, std::int64_t k) {
  return static_cast<double>(cell) / static_cast<double>(k);
}

// floor(k x), corrected so that dequantize(c) <= x < dequantize(c + 1) holds
// in floating point. That makes quantize(dequantize(c)) == c.
inline std::int64_t quantize_value(double x, std::int64_t k) {
  const double kd = static_cast<double>(k);
  const double scaled = std::floor(kd * x);
  if (!(std::abs(scaled) < 0x1.0p62)) throw NumericError("quantize: k * x exceeds the 64-bit cell range");
  auto c = static_cast<std::int64_t>(scaled);
  if (dequantize(c, k) > x) --c;
  if (dequantize(c + 1, k) <= x) ++c;
  return c;
}

inline LatticeBlock quantize(const SampleBatch& batch, std::int64_t k) {
  if (k < 1) throw ParameterError("k: quantization denominator must be >= 1");
  LatticeBlock block;
  block.k = k;
  block.n = batch.n;
  block.trials = batch.trials;
  block.cells.resize(batch.data.size());
  for (std::size_t t = 0; t < batch.trials; ++t) {
    for (std::size_t i = 0; i < batch.n; ++i) {
      const double x = batch.at(t, i);
      if (!std::isfinite(x)) {
        throw DataError("quantize: non-finite value at trial " + std::to_string(t) + ", coordinate " +
                        std::to_string(i));
      }
      block.cells[t * batch.n + i] = quantize_value(x, k);
    }
  }
  return block;
}

// ---------------------------------------------------------------- entropy

struct EntropyResult {
  double bits = 0.0;  // includes the Miller-Madow term when requested
  double plugin_bits = 0.0;
  std::size_t occupied = 0;
  std::size_t singletons = 0;
  std::size_t trials = 0;
};

inline double miller_madow_term(std::size_t occupied, std::size_t trials) {
  if (occupied == 0 || trials == 0) return 0.0;
  return static_cast<double>(occupied - 1) / (2.0 * static_cast<double>(trials) * std::log(2.0));
}

// Plug-in entropy of columns [first, first + width) over the given rows.
inline EntropyResult entropy_of_rows(const LatticeBlock& block, std::span<const std::size_t> rows,
                                     std::size_t first, std::size_t width, bool miller_madow = false) {
  if (rows.empty()) throw ParameterError("plugin_entropy: empty block");
  if (width == 0 || first + width > block.n) throw ParameterError("plugin_entropy: column range out of bounds");
  std::vector<std::size_t> order(rows.begin(), rows.end());
  const std::int64_t* base = block.cells.data();
  const std::size_t n = block.n;
  auto less = [&](std::size_t a, std::size_t b) {
    const std::int64_t* pa = base + a * n + first;
    const std::int64_t* pb = base + b * n + first;
    return std::lexicographical_compare(pa, pa + width, pb, pb + width);
  };
  auto same = [&](std::size_t a, std::size_t b) {
    return std::equal(base + a * n + first, base + a * n + first + width, base + b * n + first);
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && same(order[i], order[j])) ++j;
    counts.push_back(j - i);
    i = j;
  }
  EntropyResult out;
  out.trials = order.size();
  out.occupied = counts.size();
  out.singletons = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), std::size_t{1}));
  out.plugin_bits = entropy_from_counts(counts);
  out.bits = out.plugin_bits + (miller_madow ? miller_madow_term(out.occupied, out.trials) : 0.0);
  return out;
}

inline EntropyResult plugin_entropy(const LatticeBlock& block, std::size_t first, std::size_t width,
                                    bool miller_madow = false) {
  std::vector<std::size_t> rows(block.trials);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return entropy_of_rows(block, rows, first, width, miller_madow);
}

inline EntropyResult plugin_entropy(const LatticeBlock& block, bool miller_madow = false) {
  return plugin_entropy(block, 0, block.n, miller_madow);
}

// H(block | label) = sum_l P(label = l) H(block | label = l), one label per
// trial.
inline double conditional_entropy(const LatticeBlock& block, std::span<const std::uint8_t> labels,
                                  bool miller_madow = false) {
  if (labels.size() != block.trials) throw ParameterError("labels: need one label per trial");
  double total = 0.0;
  for (int value = 0; value < 256; ++value) {
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < block.trials; ++t) {
      if (labels[t] == value) rows.push_back(t);
    }
    if (rows.empty()) continue;
    const double weight = static_cast<double>(rows.size()) / static_cast<double>(block.trials);
    total += weight * entropy_of_rows(block, rows, 0, block.n, miller_madow).bits;
  }
  return total;
}

// ---------------------------------------------------------------- estimates

enum class Flavor { InfoDim, Mid, Idimr, LocalLower, LocalUpper, AvgLocal };

inline const char* to_string(Flavor f) {
  switch (f) {
    case Flavor::InfoDim: return "InfoDim";
    case Flavor::Mid: return "Mid";
    case Flavor::Idimr: return "Idimr";
    case Flavor::LocalLower: return "LocalLower";
    case Flavor::LocalUpper: return "LocalUpper";
    case Flavor::AvgLocal: return "AvgLocal";
  }
  return "?";
}

struct LadderPoint {
  double scale = 0.0;  // k for lattice ladders, r for ball ladders
  double raw = 0.0;    // H/n, H, or log2 of a mass
  bool usable = true;
  std::string flag;  // "saturated", "undersampled", "empty" or ""
};

// A dimension estimate together with the ladder it was read from. `value` is
// the slope of `fit`, which is an OLS of raw against log2(scale) over the
// usable ladder points with index in [fit.first, fit.last] (plus the point
// (0, 0) when anchor_origin is set).
struct DimensionEstimate {
  Flavor flavor = Flavor::Mid;
  double value = 0.0;
  double clipped = 0.0;
  std::vector<LadderPoint> ladder;
  LinearFit fit;
  bool anchor_origin = false;
  std::vector<std::pair<double, double>> series;  // Mid: (n, per-n slope)
  std::vector<std::string> warnings;
};

inline LinearFit refit(const DimensionEstimate& est) {
  std::vector<double> x, y;
  if (est.anchor_origin) {
    x.push_back(0.0);
    y.push_back(0.0);
  }
  for (std::size_t i = est.fit.first; i <= est.fit.last && i < est.ladder.size(); ++i) {
    if (!est.ladder[i].usable) continue;
    x.push_back(std::log2(est.ladder[i].scale));
    y.push_back(est.ladder[i].raw);
  }
  LinearFit f = ols_fit(x, y);
  f.first = est.fit.first;
  f.last = est.fit.last;
  return f;
}

namespace detail {

// Indices of the last `window` usable ladder points.
inline std::vector<std::size_t> trailing_usable(const std::vector<LadderPoint>& ladder, std::size_t window) {
  std::vector<std::size_t> idx;
  for (std::size_t i = ladder.size(); i-- > 0 && idx.size() < window;) {
    if (ladder[i].usable) idx.push_back(i);
  }
  std::reverse(idx.begin(), idx.end());
  return idx;
}

inline LinearFit fit_indices(const std::vector<LadderPoint>& ladder, const std::vector<std::size_t>& idx) {
  std::vector<double> x, y;
  for (std::size_t i : idx) {
    x.push_back(std::log2(ladder[i].scale));
    y.push_back(ladder[i].raw);
  }
  LinearFit f = ols_fit(x, y);
  f.first = idx.front();
  f.last = idx.back();
  return f;
}

// Secant slopes between consecutive usable points; lower/upper are the
// min/max over the trailing `window` secants.
struct SecantPick {
  bool ok = false;
  LinearFit lower, upper;
};

inline SecantPick secant_extremes(const std::vector<LadderPoint>& ladder, std::size_t window) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (ladder[i].usable) usable.push_back(i);
  }
  SecantPick pick;
  if (usable.size() < 2) return pick;
  std::vector<LinearFit> secants;
  for (std::size_t j = 1; j < usable.size(); ++j) secants.push_back(fit_indices(ladder, {usable[j - 1], usable[j]}));
  const std::size_t from = secants.size() > window ? secants.size() - window : 0;
  pick.ok = true;
  pick.lower = pick.upper = secants[from];
  for (std::size_t j = from; j < secants.size(); ++j) {
    if (secants[j].slope < pick.lower.slope) pick.lower = secants[j];
    if (secants[j].slope > pick.upper.slope) pick.upper = secants[j];
  }
  return pick;
}

inline void require_increasing_k(std::span<const std::int64_t> k_ladder) {
  if (k_ladder.empty()) throw ParameterError("k_ladder: must be non-empty");
  for (std::size_t i = 0; i < k_ladder.size(); ++i) {
    if (k_ladder[i] < 2) throw ParameterError("k_ladder: every denominator must be >= 2");
    if (i > 0 && k_ladder[i] <= k_ladder[i - 1]) throw ParameterError("k_ladder: must be strictly increasing");
  }
}

}  // namespace detail

struct LowerUpper {
  DimensionEstimate lower;
  DimensionEstimate upper;
};

// ---------------------------------------------------------------- mid / idimr

struct MidOptions {
  bool miller_madow = true;
  std::size_t window = 3;
  double saturation = 0.8;     // occupied / trials above this flags the scale
  double undersampling = 0.1;  // singletons / trials above this flags the scale
};

struct EntropyCell {
  std::size_t n = 0;
  std::int64_t k = 0;
  EntropyResult entropy;
  std::string flag;
  bool usable() const { return flag.empty(); }
};

// H([X^n]_k) for every (n, k) pair, read from a single batch whose width is
// the largest n (prefixes of a stationary block are blocks).
inline std::vector<EntropyCell> entropy_table(const SampleBatch& batch, std::span<const std::size_t> n_ladder,
                                              std::span<const std::int64_t> k_ladder, const MidOptions& opt = {}) {
  detail::require_increasing_k(k_ladder);
  if (n_ladder.empty()) throw ParameterError("n_ladder: must be non-empty");
  for (std::size_t i = 0; i < n_ladder.size(); ++i) {
    if (n_ladder[i] < 1 || n_ladder[i] > batch.n) throw ParameterError("n_ladder: entries must lie in [1, batch n]");
    if (i > 0 && n_ladder[i] < n_ladder[i - 1]) throw ParameterError("n_ladder: must be nondecreasing");
  }
  std::vector<EntropyCell> table(n_ladder.size() * k_ladder.size());
  parallel_for(k_ladder.size(), [&](std::size_t ki) {
    const LatticeBlock block = quantize(batch, k_ladder[ki]);
    for (std::size_t ni = 0; ni < n_ladder.size(); ++ni) {
      EntropyCell& cell = table[ni * k_ladder.size() + ki];
      cell.n = n_ladder[ni];
      cell.k = k_ladder[ki];
      cell.entropy = plugin_entropy(block, 0, cell.n, opt.miller_madow);
      const double trials = static_cast<double>(cell.entropy.trials);
      if (static_cast<double>(cell.entropy.occupied) > opt.saturation * trials) {
        cell.flag = "saturated";
      } else if (static_cast<double>(cell.entropy.singletons) > opt.undersampling * trials) {
        cell.flag = "undersampled";
      }
    }
  });
  return table;
}

namespace detail {

inline std::vector<LadderPoint> mid_ladder(const std::vector<EntropyCell>& table, std::size_t ni, std::size_t nk) {
  std::vector<LadderPoint> ladder;
  for (std::size_t ki = 0; ki < nk; ++ki) {
    const EntropyCell& c = table[ni * nk + ki];
    ladder.push_back({static_cast<double>(c.k), c.entropy.bits / static_cast<double>(c.n), c.usable(), c.flag});
  }
  return ladder;
}

}  // namespace detail

// Mid flavor: per n, OLS of H/n against log2 k over the trailing window of
// usable scales. The value is read at the largest n whose whole k ladder is
// usable; failing that, at the largest n with two usable scales (warned).
inline DimensionEstimate mid_from_table(const std::vector<EntropyCell>& table, std::span<const std::size_t> n_ladder,
                                        std::size_t nk, const MidOptions& opt = {}) {
  DimensionEstimate est;
  est.flavor = Flavor::Mid;
  std::optional<std::size_t> complete, partial;
  std::size_t flagged = 0;
  for (std::size_t ni = 0; ni < n_ladder.size(); ++ni) {
    const auto ladder = detail::mid_ladder(table, ni, nk);
    const auto idx = detail::trailing_usable(ladder, opt.window);
    flagged += static_cast<std::size_t>(std::count_if(ladder.begin(), ladder.end(), [](const LadderPoint& p) { return !p.usable; }));
    if (idx.size() < 2) {
      est.series.emplace_back(static_cast<double>(n_ladder[ni]), std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    est.series.emplace_back(static_cast<double>(n_ladder[ni]), detail::fit_indices(ladder, idx).slope);
    partial = ni;
    if (std::all_of(ladder.begin(), ladder.end(), [](const LadderPoint& p) { return p.usable; })) complete = ni;
  }
  if (!partial) throw NumericError("estimate_mid: entropy saturated or undersampled at every scale; raise trials or lower k");
  std::size_t chosen = *partial;
  if (complete) {
    chosen = *complete;
  } else {
    est.warnings.push_back("no block length has a fully resolved k ladder; value read from a partial ladder");
  }
  if (flagged > 0) est.warnings.push_back(std::to_string(flagged) + " (n, k) scales flagged and excluded from fits");
  est.ladder = detail::mid_ladder(table, chosen, nk);
  est.fit = detail::fit_indices(est.ladder, detail::trailing_usable(est.ladder, opt.window));
  est.value = est.fit.slope;
  est.clipped = std::clamp(est.value, 0.0, 1.0);
  return est;
}

// Idimr flavor: for each k, the rate H/n at the largest n where (n, k) is
// usable, then OLS of those rates against log2 k over the trailing window.
inline DimensionEstimate idimr_from_table(const std::vector<EntropyCell>& table, std::span<const std::size_t> n_ladder,
                                          std::size_t nk, const MidOptions& opt = {}) {
  DimensionEstimate est;
  est.flavor = Flavor::Idimr;
  for (std::size_t ki = 0; ki < nk; ++ki) {
    LadderPoint point{static_cast<double>(table[ki].k), 0.0, false, "unresolved"};
    for (std::size_t ni = n_ladder.size(); ni-- > 0;) {
      const EntropyCell& c = table[ni * nk + ki];
      if (c.usable()) {
        point = {static_cast<double>(c.k), c.entropy.bits / static_cast<double>(c.n), true, ""};
        est.series.emplace_back(static_cast<double>(c.k), static_cast<double>(c.n));
        break;
      }
    }
    est.ladder.push_back(point);
  }
  const auto idx = detail::trailing_usable(est.ladder, opt.window);
  if (idx.size() < 2) throw NumericError("estimate_idimr: fewer than two resolved scales");
  est.fit = detail::fit_indices(est.ladder, idx);
  est.value = est.fit.slope;
  est.clipped = std::clamp(est.value, 0.0, 1.0);
  return est;
}

inline DimensionEstimate estimate_mid(const SampleBatch& batch, std::span<const std::size_t> n_ladder,
                                      std::span<const std::int64_t> k_ladder, const MidOptions& opt = {}) {
  return mid_from_table(entropy_table(batch, n_ladder, k_ladder, opt), n_ladder, k_ladder.size(), opt);
}

inline DimensionEstimate estimate_idimr(const SampleBatch& batch, std::span<const std::size_t> n_ladder,
                                        std::span<const std::int64_t> k_ladder, const MidOptions& opt = {}) {
  return idimr_from_table(entropy_table(batch, n_ladder, k_ladder, opt), n_ladder, k_ladder.size(), opt);
}

inline DimensionEstimate estimate_mid(const ProcessSpec& spec, std::span<const std::size_t> n_ladder,
                                      std::span<const std::int64_t> k_ladder, std::size_t trials, std::uint64_t seed,
                                      const MidOptions& opt = {}) {
  if (n_ladder.empty()) throw ParameterError("n_ladder: must be non-empty");
  const std::size_t n_max = *std::max_element(n_ladder.begin(), n_ladder.end());
  return estimate_mid(sample_process(spec, n_max, trials, seed), n_ladder, k_ladder, opt);
}

inline DimensionEstimate estimate_idimr(const ProcessSpec& spec, std::span<const std::size_t> n_ladder,
                                        std::span<const std::int64_t> k_ladder, std::size_t trials, std::uint64_t seed,
                                        const MidOptions& opt = {}) {
  if (n_ladder.empty()) throw ParameterError("n_ladder: must be non-empty");
  const std::size_t n_max = *std::max_element(n_ladder.begin(), n_ladder.end());
  return estimate_idimr(sample_process(spec, n_max, trials, seed), n_ladder, k_ladder, opt);
}

// Lower / upper information dimension of the whole n-dimensional block:
// min / max of the secant slopes of H([X^n]_k) against log2 k over the
// trailing window of usable scales.
inline LowerUpper estimate_info_dim(const SampleBatch& batch, std::span<const std::int64_t> k_ladder,
                                    const MidOptions& opt = {}) {
  const std::size_t n_only[] = {batch.n};
  const auto table = entropy_table(batch, n_only, k_ladder, opt);
  std::vector<LadderPoint> ladder;
  for (const auto& c : table) ladder.push_back({static_cast<double>(c.k), c.entropy.bits, c.usable(), c.flag});
  const auto pick = detail::secant_extremes(ladder, opt.window);
  if (!pick.ok) throw NumericError("estimate_info_dim: fewer than two resolved scales");
  LowerUpper out;
  for (auto* e : {&out.lower, &out.upper}) {
    e->flavor = Flavor::InfoDim;
    e->ladder = ladder;
  }
  out.lower.fit = pick.lower;
  out.upper.fit = pick.upper;
  for (auto* e : {&out.lower, &out.upper}) {
    e->value = e->fit.slope;
    e->clipped = std::clamp(e->value, 0.0, static_cast<double>(batch.n));
  }
  return out;
}

// ---------------------------------------------------------------- local dims

enum class Metric { Euclidean, Chebyshev };

struct LocalDimOptions {
  std::size_t window = 3;
  Metric metric = Metric::Euclidean;
  // Caller asserts the query is in the support: an all-empty ladder then
  // yields (0, 0) instead of an error.
  bool assume_on_support = false;
};

namespace detail {

inline void require_decreasing_r(std::span<const double> r_ladder) {
  if (r_ladder.size() < 2) throw ParameterError("r_ladder: need at least two radii");
  for (std::size_t i = 0; i < r_ladder.size(); ++i) {
    if (!(r_ladder[i] > 0.0) || !std::isfinite(r_ladder[i])) throw ParameterError("r_ladder: radii must be positive");
    if (i > 0 && !(r_ladder[i] < r_ladder[i - 1])) throw ParameterError("r_ladder: must be strictly decreasing");
  }
}

// Number of cloud points within each radius of q (closed balls). Row
// `exclude` is left out when given.
inline std::vector<std::size_t> ball_counts(const SampleBatch& cloud, std::span<const double> q,
                                            std::span<const double> r_ladder, Metric metric,
                                            std::optional<std::size_t> exclude) {
  std::vector<double> thresholds(r_ladder.size());
  for (std::size_t j = 0; j < r_ladder.size(); ++j) {
    thresholds[j] = metric == Metric::Euclidean ? r_ladder[j] * r_ladder[j] : r_ladder[j];
  }
  std::vector<std::size_t> counts(r_ladder.size(), 0);
  for (std::size_t t = 0; t < cloud.trials; ++t) {
    if (exclude && *exclude == t) continue;
    const auto row = cloud.row(t);
    double d = 0.0;
    for (std::size_t i = 0; i < cloud.n; ++i) {
      const double diff = row[i] - q[i];
      d = metric == Metric::Euclidean ? d + diff * diff : std::max(d, std::abs(diff));
    }
    // Radii decrease, so the balls containing the point form a prefix.
    for (std::size_t j = 0; j < thresholds.size() && d <= thresholds[j]; ++j) ++counts[j];
  }
  return counts;
}

inline std::vector<LadderPoint> mass_ladder(std::span<const std::size_t> counts, std::span<const double> r_ladder,
                                            double population) {
  std::vector<LadderPoint> ladder;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) {
      ladder.push_back({r_ladder[j], -std::numeric_limits<double>::infinity(), false, "empty"});
    } else {
      ladder.push_back({r_ladder[j], std::log2(static_cast<double>(counts[j]) / population), true, ""});
    }
  }
  return ladder;
}

inline LowerUpper local_from_ladder(std::vector<LadderPoint> ladder, std::size_t window, double n_dim) {
  LowerUpper out;
  out.lower.flavor = Flavor::LocalLower;
  out.upper.flavor = Flavor::LocalUpper;
  const auto pick = secant_extremes(ladder, window);
  if (!pick.ok) throw DataError("local dimension: fewer than two radii with a non-empty ball");
  out.lower.fit = pick.lower;
  out.upper.fit = pick.upper;
  const std::size_t empty = static_cast<std::size_t>(std::count_if(ladder.begin(), ladder.end(), [](const LadderPoint& p) { return !p.usable; }));
  for (auto* e : {&out.lower, &out.upper}) {
    e->ladder = ladder;
    e->value = e->fit.slope;
    e->clipped = std::clamp(e->value, 0.0, n_dim);
    if (empty > 0) e->warnings.push_back(std::to_string(empty) + " radii with empty balls recorded as +inf and excluded");
  }
  return out;
}

inline LowerUpper zero_local_dim(std::span<const double> r_ladder) {
  LowerUpper out;
  out.lower.flavor = Flavor::LocalLower;
  out.upper.flavor = Flavor::LocalUpper;
  for (auto* e : {&out.lower, &out.upper}) {
    e->anchor_origin = true;
    for (double r : r_ladder) e->ladder.push_back({r, 0.0, true, "assumed-support"});
    e->fit = {0.0, 0.0, 0.0, 0, r_ladder.size() - 1};
    e->warnings.push_back("query has empty balls at every radius; on-support convention applied");
  }
  return out;
}

}  // namespace detail

// Lower / upper local dimension of the empirical measure at `query`: min / max
// of secant slopes of log2 mu(B(query, r)) against log2 r over the trailing
// window of non-empty radii. `exclude` removes one cloud row (leave-one-out).
inline LowerUpper estimate_local_dim(const SampleBatch& cloud, std::span<const double> query,
                                     std::span<const double> r_ladder, const LocalDimOptions& opt = {},
                                     std::optional<std::size_t> exclude = std::nullopt) {
  detail::require_decreasing_r(r_ladder);
  if (query.size() != cloud.n) throw ParameterError("query: dimension must match the cloud");
  const auto counts = detail::ball_counts(cloud, query, r_ladder, opt.metric, exclude);
  if (counts.front() == 0) {
    if (opt.assume_on_support) return detail::zero_local_dim(r_ladder);
    throw DataError("local dimension: no cloud point within the largest radius (query outside the support)");
  }
  const double population = static_cast<double>(cloud.trials - (exclude ? 1 : 0));
  return detail::local_from_ladder(detail::mass_ladder(counts, r_ladder, population), opt.window,
                                   static_cast<double>(cloud.n));
}

// Dyadic-cube variant: at depth b the mass of the cell of side 2^-b holding
// the query, with per-depth ratio -log2 mu(C_b) / b. Lower / upper are the
// min / max ratios over the trailing window of non-empty depths. The fit of
// each is the line through the origin and that ladder point.
inline LowerUpper estimate_local_dim_dyadic(const SampleBatch& cloud, std::span<const double> query,
                                            std::span<const int> depths, std::size_t window = 3,
                                            std::optional<std::size_t> exclude = std::nullopt) {
  if (query.size() != cloud.n) throw ParameterError("query: dimension must match the cloud");
  if (depths.empty()) throw ParameterError("depths: must be non-empty");
  for (std::size_t j = 0; j < depths.size(); ++j) {
    if (depths[j] < 1 || depths[j] > 62) throw ParameterError("depths: must lie in [1, 62]");
    if (j > 0 && depths[j] <= depths[j - 1]) throw ParameterError("depths: must be strictly increasing");
  }
  std::vector<LadderPoint> ladder;
  const double population = static_cast<double>(cloud.trials - (exclude ? 1 : 0));
  for (int b : depths) {
    const std::int64_t k = std::int64_t{1} << b;
    std::vector<std::int64_t> qc(cloud.n);
    for (std::size_t i = 0; i < cloud.n; ++i) qc[i] = quantize_value(query[i], k);
    std::size_t count = 0;
    for (std::size_t t = 0; t < cloud.trials; ++t) {
      if (exclude && *exclude == t) continue;
      bool inside = true;
      for (std::size_t i = 0; i < cloud.n && inside; ++i) inside = quantize_value(cloud.at(t, i), k) == qc[i];
      count += inside ? 1 : 0;
    }
    const double scale = std::ldexp(1.0, -b);
    if (count == 0) {
      ladder.push_back({scale, -std::numeric_limits<double>::infinity(), false, "empty"});
    } else {
      ladder.push_back({scale, std::log2(static_cast<double>(count) / population), true, ""});
    }
  }
  const auto idx = detail::trailing_usable(ladder, window);
  if (idx.empty()) throw DataError("dyadic local dimension: every cell containing the query is empty");
  LowerUpper out;
  out.lower.flavor = Flavor::LocalLower;
  out.upper.flavor = Flavor::LocalUpper;
  auto ratio = [&](std::size_t i) { return ladder[i].raw / std::log2(ladder[i].scale); };
  std::size_t lo = idx.front(), hi = idx.front();
  for (std::size_t i : idx) {
    if (ratio(i) < ratio(lo)) lo = i;
    if (ratio(i) > ratio(hi)) hi = i;
  }
  for (auto [e, i] : {std::pair{&out.lower, lo}, std::pair{&out.upper, hi}}) {
    e->ladder = ladder;
    e->anchor_origin = true;
    e->fit = {ratio(i), 0.0, 0.0, i, i};
    e->value = ratio(i);
    e->clipped = std::clamp(e->value, 0.0, static_cast<double>(cloud.n));
  }
  return out;
}

struct AvgLocalOptions {
  std::size_t subsample = 1000;
  std::uint64_t seed = 0;
  LocalDimOptions local;
};

struct AvgLocalResult {
  LowerUpper estimate;
  std::size_t queries = 0;
  std::size_t skipped = 0;  // queries with an empty ball somewhere on the ladder
  // Means of the per-query lower / upper local dimensions, for comparison.
  double mean_pointwise_lower = 0.0;
  double mean_pointwise_upper = 0.0;
};

// Average local dimension over a seeded subsample of cloud points, each query
// excluded from its own counts. The ladder holds the mean of log2 mu(B(x, r))
// over the queries resolved at every radius; its secant slopes are the
// averages of the per-query secants, and lower / upper are their min / max over
// the trailing window.
inline AvgLocalResult estimate_avg_local_dim(const SampleBatch& cloud, std::span<const double> r_ladder,
                                             const AvgLocalOptions& opt = {}) {
  detail::require_decreasing_r(r_ladder);
  if (opt.subsample < 1 || opt.subsample > cloud.trials) throw ParameterError("subsample: must lie in [1, trials]");
  if (cloud.trials < 2) throw ParameterError("trials: leave-one-out needs at least two points");
  Engine rng = make_engine(opt.seed, "avg-local-subsample");
  const auto queries = sample_indices(rng, cloud.trials, opt.subsample);
  std::vector<std::vector<std::size_t>> counts(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    counts[q] = detail::ball_counts(cloud, cloud.row(queries[q]), r_ladder, opt.local.metric, queries[q]);
  });
  const double population = static_cast<double>(cloud.trials - 1);
  AvgLocalResult out;
  out.queries = queries.size();
  std::vector<double> mean_log(r_ladder.size(), 0.0);
  std::size_t used = 0;
  double sum_lo = 0.0, sum_hi = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (std::find(counts[q].begin(), counts[q].end(), std::size_t{0}) != counts[q].end()) {
      ++out.skipped;
      continue;
    }
    ++used;
    const auto ladder = detail::mass_ladder(counts[q], r_ladder, population);
    for (std::size_t j = 0; j < ladder.size(); ++j) mean_log[j] += ladder[j].raw;
    const auto pick = detail::secant_extremes(ladder, opt.local.window);
    sum_lo += pick.lower.slope;
    sum_hi += pick.upper.slope;
  }
  if (used == 0) throw DataError("average local dimension: every query has an empty ball on the ladder");
  std::vector<LadderPoint> ladder;
  for (std::size_t j = 0; j < r_ladder.size(); ++j) {
    ladder.push_back({r_ladder[j], mean_log[j] / static_cast<double>(used), true, ""});
  }
  out.mean_pointwise_lower = sum_lo / static_cast<double>(used);
  out.mean_pointwise_upper = sum_hi / static_cast<double>(used);
  out.estimate = detail::local_from_ladder(std::move(ladder), opt.local.window, static_cast<double>(cloud.n));
  out.estimate.lower.flavor = Flavor::AvgLocal;
  out.estimate.upper.flavor = Flavor::AvgLocal;
  if (out.skipped > 0) {
    const std::string w = std::to_string(out.skipped) + " of " + std::to_string(out.queries) +
                          " queries skipped (empty ball on the ladder)";
    out.estimate.lower.warnings.push_back(w);
    out.estimate.upper.warnings.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------- chain audit

struct ChainSettings {
  std::size_t n = 1;
  std::size_t trials = 100000;
  std::vector<std::int64_t> k_ladder{8, 16, 32, 64};
  std::vector<double> r_ladder;  // empty: 1/k for every k in k_ladder, decreasing
  std::size_t subsample = 1000;
  std::uint64_t seed = 0;
  double slack = 0.1;
  MidOptions mid;
};

struct ChainCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

enum class AuditStatus { Pass, Fail, Inconclusive };

inline const char* to_string(AuditStatus s) {
  switch (s) {
    case AuditStatus::Pass: return "pass";
    case AuditStatus::Fail: return "fail";
    case AuditStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ChainReport {
  std::size_t n = 0;
  double al_lower = 0.0, id_lower = 0.0, id_upper = 0.0, al_upper = 0.0;
  double idimr = 0.0, mid = 0.0, mdim_al_upper = 0.0;
  std::vector<ChainCheck> checks;
  AuditStatus status = AuditStatus::Inconclusive;
  std::vector<std::string> notes;
};

// Four block-level estimates in the order of the chain
// lower AL <= lower id <= upper id <= upper AL <= n, plus the rate-level chain
// idimr <= mid <= upper AL / n <= 1, each inequality with additive slack.
inline ChainReport inequality_chain_audit(const ProcessSpec& spec, const ChainSettings& s) {
  if (s.n < 1) throw ParameterError("n: must be >= 1");
  ChainReport rep;
  rep.n = s.n;
  const SampleBatch batch = sample_process(spec, s.n, s.trials, derive_seed(s.seed, "chain-batch"));
  std::vector<double> r_ladder = s.r_ladder;
  if (r_ladder.empty()) {
    for (std::int64_t k : s.k_ladder) r_ladder.push_back(1.0 / static_cast<double>(k));
  }
  std::vector<std::size_t> n_ladder;
  for (std::size_t m = 1; m <= s.n; m *= 2) n_ladder.push_back(m);
  if (n_ladder.back() != s.n) n_ladder.push_back(s.n);
  try {
    const auto id = estimate_info_dim(batch, s.k_ladder, s.mid);
    const auto table = entropy_table(batch, n_ladder, s.k_ladder, s.mid);
    rep.mid = mid_from_table(table, n_ladder, s.k_ladder.size(), s.mid).value;
    rep.idimr = idimr_from_table(table, n_ladder, s.k_ladder.size(), s.mid).value;
    AvgLocalOptions al_opt;
    al_opt.subsample = std::min(s.subsample, batch.trials);
    al_opt.seed = derive_seed(s.seed, "chain-avg-local");
    const auto al = estimate_avg_local_dim(batch, r_ladder, al_opt);
    rep.al_lower = al.estimate.lower.value;
    rep.al_upper = al.estimate.upper.value;
    rep.id_lower = id.lower.value;
    rep.id_upper = id.upper.value;
  } catch (const NumericError& e) {
    rep.notes.push_back(std::string("estimator saturated: ") + e.what());
    rep.status = AuditStatus::Inconclusive;
    return rep;
  }
  const double nd = static_cast<double>(s.n);
  rep.mdim_al_upper = rep.al_upper / nd;
  auto check = [&](std::string name, double lhs, double rhs) {
    rep.checks.push_back({std::move(name), lhs, rhs, lhs <= rhs + s.slack});
  };
  check("al_lower <= id_lower", rep.al_lower, rep.id_lower);
  check("id_lower <= id_upper", rep.id_lower, rep.id_upper);
  check("id_upper <= al_upper", rep.id_upper, rep.al_upper);
  check("al_upper <= n", rep.al_upper, nd);
  check("idimr <= mid", rep.idimr, rep.mid);
  check("mid <= mdim_al_upper", rep.mid, rep.mdim_al_upper);
  check("mdim_al_upper <= 1", rep.mdim_al_upper, 1.0);
  const bool all = std::all_of(rep.checks.begin(), rep.checks.end(), [](const ChainCheck& c) { return c.pass; });
  rep.status = all ? AuditStatus::Pass : AuditStatus::Fail;
  return rep;
}

}  // namespace midcs
