#pragma once

// Phase-transition experiments over the measurement rate m/n, threshold
// detection, converse evidence and the combined correlation-rate report.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "midcs/dimension.hpp"
#include "midcs/energy.hpp"
#include "midcs/error.hpp"
#include "midcs/parallel.hpp"
#include "midcs/process.hpp"
#include "midcs/random.hpp"
#include "midcs/sensing.hpp"
#include "midcs/stats.hpp"

namespace midcs {

struct PhaseCell {
  double rate = 0.0;
  std::size_t m = 0;
  std::size_t trials = 0;     // trials that produced an estimate
  std::size_t successes = 0;  // err <= delta
  std::size_t incomplete = 0;  // decoder raised a budget error
  std::size_t infeasible = 0;
  std::size_t budget_exhausted = 0;
  std::vector<double> errors;  // per trial; NaN where incomplete

  double p_hat() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
  Interval wilson() const { return wilson_interval(successes, trials); }
  std::string flag() const {
    std::string f;
    auto add = [&](const std::string& s) { f += (f.empty() ? "" : ";") + s; };
    if (incomplete) add("incomplete=" + std::to_string(incomplete));
    if (infeasible) add("infeasible=" + std::to_string(infeasible));
    if (budget_exhausted) add("budget-exhausted=" + std::to_string(budget_exhausted));
    return f;
  }
};

struct PhaseDiagram {
  ProcessSpec spec;
  std::size_t n = 0;
  double delta = 0.05;
  std::vector<double> rate_grid;
  std::vector<PhaseCell> cells;
  std::string decoder_id;
  std::uint64_t seed = 0;
};

inline std::size_t rate_to_m(double rate, std::size_t n) {
  const auto m = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, n);
}

// Rates 0.05, 0.10, ..., up to `last`.
inline std::vector<double> default_rate_grid(double step = 0.05, double last = 0.95) {
  std::vector<double> grid;
  for (int i = 1; static_cast<double>(i) * step <= last + 1e-9; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

// Trial t draws one source block and one n x n Gaussian matrix; the cell at
// rate m/n measures with its first m rows. Every rate therefore sees the same
// (x, A) pairs, and cells can be re-thresholded exactly.
inline PhaseDiagram run_phase(const ProcessSpec& spec, std::size_t n, const std::vector<double>& rate_grid, double delta,
                              std::size_t trials, const DecoderConfig& decoder, std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw ParameterError("n: must be >= 1");
  if (!(delta > 0.0)) throw ParameterError("delta: must be > 0");
  if (trials < 1) throw ParameterError("trials: must be >= 1");
  if (rate_grid.empty()) throw ParameterError("rate_grid: must be non-empty");
  for (double r : rate_grid) {
    if (!(r >= 0.0 && r <= 1.0)) throw ParameterError("rate_grid: rates must lie in [0, 1]");
  }
  PhaseDiagram diagram;
  diagram.spec = spec;
  diagram.n = n;
  diagram.delta = delta;
  diagram.rate_grid = rate_grid;
  diagram.decoder_id = decoder.id();
  diagram.seed = seed;
  const std::size_t R = rate_grid.size();
  std::vector<double> errors(R * trials, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> status(R * trials, 0);  // 0 ok, 1 incomplete, 2 infeasible, 3 exhausted
  parallel_for(trials, [&](std::size_t t) {
    const SampleBatch src = sample_process(spec, n, 1, derive_seed(seed, "phase-source", t));
    const auto x = src.row(0);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(n));
    const SensingMatrix full = sample_matrix(n, n, derive_seed(seed, "phase-matrix", t));
    for (std::size_t c = 0; c < R; ++c) {
      const std::size_t m = rate_to_m(rate_grid[c], n);
      const Eigen::MatrixXd A = full.entries.topRows(static_cast<Eigen::Index>(m));
      const Eigen::VectorXd y = A * xv;
      try {
        const DecodeResult res = decode(decoder, y, A, derive_seed(seed, "phase-decoder", t * R + c));
        errors[c * trials + t] = recovery_error(x, res.x_hat);
        if (res.status == DecodeStatus::Infeasible) status[c * trials + t] = 2;
        if (res.status == DecodeStatus::BudgetExhausted) status[c * trials + t] = 3;
      } catch (const BudgetError&) {
        status[c * trials + t] = 1;
      }
    }
  });
  for (std::size_t c = 0; c < R; ++c) {
    PhaseCell cell;
    cell.rate = rate_grid[c];
    cell.m = rate_to_m(rate_grid[c], n);
    cell.errors.assign(errors.begin() + static_cast<std::ptrdiff_t>(c * trials),
                       errors.begin() + static_cast<std::ptrdiff_t>((c + 1) * trials));
    for (std::size_t t = 0; t < trials; ++t) {
      switch (status[c * trials + t]) {
        case 1: ++cell.incomplete; continue;
        case 2: ++cell.infeasible; break;
        case 3: ++cell.budget_exhausted; break;
        default: break;
      }
      ++cell.trials;
      if (cell.errors[t] <= delta) ++cell.successes;
    }
    diagram.cells.push_back(std::move(cell));
  }
  return diagram;
}

// Same trials, new tolerance.
inline PhaseDiagram rethreshold(const PhaseDiagram& diagram, double delta) {
  if (!(delta > 0.0)) throw ParameterError("delta: must be > 0");
  PhaseDiagram out = diagram;
  out.delta = delta;
  for (auto& cell : out.cells) {
    cell.successes = static_cast<std::size_t>(
        std::count_if(cell.errors.begin(), cell.errors.end(), [&](double e) { return !std::isnan(e) && e <= delta; }));
  }
  return out;
}

struct ThresholdResult {
  bool found = false;
  double threshold = 0.0;  // rate at fitted probability 0.5
  double band_lo = 0.0;    // fitted probability 0.1
  double band_hi = 0.0;    // fitted probability 0.9
  double intercept = 0.0;  // logit p = intercept + slope * rate
  double slope = 0.0;
  std::string note;
};

// Logistic regression of cell success counts on rate (IRLS with a small ridge
// so separated data still gives a finite fit).
inline ThresholdResult detect_threshold(const PhaseDiagram& diagram) {
  if (diagram.cells.size() < 4) throw ParameterError("rate_grid: threshold detection needs at least 4 grid points");
  ThresholdResult out;
  bool below = false, above = false;
  for (const auto& c : diagram.cells) {
    if (c.trials == 0) continue;
    below = below || c.p_hat() < 0.5;
    above = above || c.p_hat() > 0.5;
  }
  if (!below || !above) {
    out.note = "no crossing of 0.5 in the grid";
    return out;
  }
  double mean_rate = 0.0, weight = 0.0;
  for (const auto& c : diagram.cells) {
    mean_rate += c.rate * static_cast<double>(c.trials);
    weight += static_cast<double>(c.trials);
  }
  mean_rate /= weight;
  // beta = (a, b) on the centred rate.
  Eigen::Vector2d beta = Eigen::Vector2d::Zero();
  const double ridge = 1e-6 * weight;
  for (int it = 0; it < 500; ++it) {
    Eigen::Matrix2d H = ridge * Eigen::Matrix2d::Identity();
    Eigen::Vector2d g = -ridge * beta;
    for (const auto& c : diagram.cells) {
      if (c.trials == 0) continue;
      const double u = c.rate - mean_rate;
      const double p = 1.0 / (1.0 + std::exp(-(beta(0) + beta(1) * u)));
      const double N = static_cast<double>(c.trials);
      const double w = N * p * (1.0 - p);
      const Eigen::Vector2d z(1.0, u);
      g += (static_cast<double>(c.successes) - N * p) * z;
      H += w * z * z.transpose();
    }
    const Eigen::Vector2d step = H.ldlt().solve(g);
    beta += step;
    if (step.norm() < 1e-10 * (1.0 + beta.norm())) break;
  }
  out.slope = beta(1);
  out.intercept = beta(0) - beta(1) * mean_rate;
  if (!(out.slope > 0.0)) {
    out.note = "fitted success probability does not increase with rate";
    return out;
  }
  auto at = [&](double prob) { return (std::log(prob / (1.0 - prob)) - out.intercept) / out.slope; };
  out.found = true;
  out.threshold = at(0.5);
  out.band_lo = at(0.1);
  out.band_hi = at(0.9);
  return out;
}

// Cells whose Wilson lower bound exceeds a higher-rate cell's upper bound by
// more than `slack`; empty when the diagram is monotone up to noise.
inline std::vector<std::pair<std::size_t, std::size_t>> monotonicity_violations(const PhaseDiagram& d, double slack = 0.05) {
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  for (std::size_t i = 0; i < d.cells.size(); ++i) {
    for (std::size_t j = 0; j < d.cells.size(); ++j) {
      if (d.cells[j].m > d.cells[i].m && d.cells[i].wilson().lo > d.cells[j].wilson().hi + slack) bad.emplace_back(i, j);
    }
  }
  return bad;
}

// ---------------------------------------------------------------- converse

struct ConverseRow {
  std::string decoder_id;
  double delta = 0.0;
  std::vector<std::size_t> n;
  std::vector<std::size_t> m;
  std::vector<double> p_hat;
  std::vector<double> wilson_hi;
  TrendTest trend;
  bool below_margin = false;
  bool no_upward_trend = false;
  bool pass() const { return below_margin && no_upward_trend; }
};

struct ConverseReport {
  double rate = 0.0;
  double ground_truth_mid = 0.0;
  double margin = 0.5;
  std::vector<ConverseRow> rows;
  std::vector<double> max_success_per_n;  // best decoder at the first delta
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ConverseRow& r) { return r.pass(); });
  }
};

struct ConverseOptions {
  double margin = 0.5;
  double alpha = 0.05;
};

// For each decoder and block length, the success rate at m = round(rate n)
// (at least 1). Each (decoder, delta) series must stay below 1 - margin and
// show no upward trend (one-sided Mann-Kendall at level alpha).
inline ConverseReport converse_witness(const ProcessSpec& spec, const std::vector<std::size_t>& n_ladder, double rate,
                                       const std::vector<DecoderConfig>& decoders, const std::vector<double>& delta_grid,
                                       std::size_t trials, std::uint64_t seed, const ConverseOptions& opt = {}) {
  if (decoders.empty()) throw ParameterError("decoders: family must be non-empty");
  if (delta_grid.empty()) throw ParameterError("delta_grid: must be non-empty");
  if (n_ladder.empty()) throw ParameterError("n_ladder: must be non-empty");
  const auto truth = ground_truth_mid(spec);
  if (!truth) throw ParameterError("spec: converse witness needs a ground-truth mid");
  if (!(rate < truth->mid)) {
    throw ParameterError("rate: precondition rate < mid fails (rate " + std::to_string(rate) + ", mid " +
                         std::to_string(truth->mid) + ")");
  }
  ConverseReport rep;
  rep.rate = rate;
  rep.ground_truth_mid = truth->mid;
  rep.margin = opt.margin;
  rep.max_success_per_n.assign(n_ladder.size(), 0.0);
  for (std::size_t d = 0; d < decoders.size(); ++d) {
    std::vector<PhaseDiagram> per_n;
    for (std::size_t i = 0; i < n_ladder.size(); ++i) {
      per_n.push_back(run_phase(spec, n_ladder[i], {rate}, delta_grid.front(), trials, decoders[d],
                                derive_seed(seed, "converse", d * 1000003 + n_ladder[i])));
    }
    for (std::size_t di = 0; di < delta_grid.size(); ++di) {
      ConverseRow row;
      row.decoder_id = decoders[d].id();
      row.delta = delta_grid[di];
      for (std::size_t i = 0; i < n_ladder.size(); ++i) {
        const PhaseDiagram diag = rethreshold(per_n[i], delta_grid[di]);
        const PhaseCell& cell = diag.cells.front();
        row.n.push_back(n_ladder[i]);
        row.m.push_back(cell.m);
        row.p_hat.push_back(cell.p_hat());
        row.wilson_hi.push_back(cell.wilson().hi);
        if (di == 0) rep.max_success_per_n[i] = std::max(rep.max_success_per_n[i], cell.p_hat());
      }
      row.trend = mann_kendall(row.p_hat);
      row.below_margin = std::all_of(row.p_hat.begin(), row.p_hat.end(), [&](double p) { return p <= 1.0 - opt.margin; });
      row.no_upward_trend = !(row.trend.p_increasing < opt.alpha);
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::vector<std::size_t> energy_n_ladder{4, 8, 16, 32};
  std::size_t energy_trials = 2000;
  double energy_budget = 3.0;
  std::vector<std::size_t> mid_n_ladder{1, 2, 4};
  std::vector<std::int64_t> mid_k_ladder{4, 16, 64, 256};
  std::size_t mid_trials = 100000;
  std::size_t phase_n = 0;  // 0: largest entry of the caller's n_ladder
  double delta = 0.05;
  std::vector<DecoderConfig> decoders;
  double tolerance = 0.1;
  double margin = 0.5;
};

struct ThetaRow {
  double theta = 0.0;
  std::vector<EnergyProfile> curve;
  bool bounded = false;
  bool atom = false;
};

struct DecoderThreshold {
  std::string decoder_id;
  PhaseDiagram diagram;
  ThresholdResult threshold;
};

struct CombinedReport {
  std::vector<ThetaRow> theta_rows;
  double region = 0.0;  // largest theta with bounded rate curve, capped at 1
  bool region_atom_flag = false;
  std::vector<DecoderThreshold> thresholds;
  double mid = 0.0;
  std::vector<std::string> mid_warnings;
  bool ordering_ok = false;   // region <= mid + tolerance
  bool converse_ok = false;   // no decoder succeeds below region - tolerance
  std::string text() const;
};

inline CombinedReport mdimcor_vs_recovery_report(const ProcessSpec& spec, std::vector<double> theta_grid,
                                                 const std::vector<double>& rate_grid,
                                                 const std::vector<std::size_t>& n_ladder, std::size_t trials,
                                                 std::uint64_t seed, ReportOptions opt = {}) {
  validate(spec);
  if (theta_grid.empty()) throw ParameterError("theta_grid: must be non-empty");
  if (n_ladder.empty()) throw ParameterError("n_ladder: must be non-empty");
  std::sort(theta_grid.begin(), theta_grid.end());
  if (opt.decoders.empty()) {
    DecoderConfig sparse;
    sparse.kind = DecoderKind::SparseEnum;
    sparse.sparse.s_max = *std::max_element(n_ladder.begin(), n_ladder.end());
    DecoderConfig pinv;
    pinv.kind = DecoderKind::Pinv;
    opt.decoders = {sparse, pinv};
  }
  CombinedReport rep;

  // (a) boundedness region of the normalized energy rate.
  bool still_bounded = true;
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    ThetaRow row;
    row.theta = theta_grid[i];
    row.curve = normalized_energy_rate(spec, opt.energy_n_ladder, row.theta, opt.energy_trials,
                                       derive_seed(seed, "report-energy", i));
    row.atom = std::any_of(row.curve.begin(), row.curve.end(), [](const EnergyProfile& p) {
      return p.energies.front().infinite && p.energies.front().reason == "atom";
    });
    row.bounded = rate_curve_bounded(row.curve, opt.energy_budget);
    rep.region_atom_flag = rep.region_atom_flag || row.atom;
    if (still_bounded && row.bounded) rep.region = std::min(1.0, row.theta);
    still_bounded = still_bounded && row.bounded;
    rep.theta_rows.push_back(std::move(row));
  }
  if (rep.region_atom_flag) rep.region = 0.0;

  // (b) phase thresholds per decoder.
  const std::size_t phase_n = opt.phase_n ? opt.phase_n : *std::max_element(n_ladder.begin(), n_ladder.end());
  rep.converse_ok = true;
  for (std::size_t d = 0; d < opt.decoders.size(); ++d) {
    DecoderThreshold dt;
    dt.decoder_id = opt.decoders[d].id();
    dt.diagram = run_phase(spec, phase_n, rate_grid, opt.delta, trials, opt.decoders[d], derive_seed(seed, "report-phase", d));
    if (dt.diagram.cells.size() >= 4) dt.threshold = detect_threshold(dt.diagram);
    for (const auto& cell : dt.diagram.cells) {
      if (cell.rate < rep.region - opt.tolerance && cell.p_hat() > 1.0 - opt.margin) rep.converse_ok = false;
    }
    rep.thresholds.push_back(std::move(dt));
  }

  // (c) estimated mid.
  const auto est = estimate_mid(spec, opt.mid_n_ladder, opt.mid_k_ladder, opt.mid_trials, derive_seed(seed, "report-mid"));
  rep.mid = est.value;
  rep.mid_warnings = est.warnings;
  rep.ordering_ok = rep.region <= rep.mid + opt.tolerance;
  return rep;
}

inline std::string CombinedReport::text() const {
  std::ostringstream os;
  os.precision(6);
  os << "correlation-rate region: [0, " << region << "]" << (region_atom_flag ? " (atoms: infinite energies)" : "") << "\n";
  for (const auto& row : theta_rows) {
    os << "  theta " << row.theta << ": " << (row.bounded ? "bounded" : "unbounded") << ", rates";
    for (const auto& p : row.curve) os << " " << p.normalized_rate;
    os << "\n";
  }
  for (const auto& t : thresholds) {
    os << "threshold " << t.decoder_id << ": ";
    if (t.threshold.found) {
      os << t.threshold.threshold << " band [" << t.threshold.band_lo << ", " << t.threshold.band_hi << "]";
    } else {
      os << "none (" << t.threshold.note << ")";
    }
    os << "\n";
  }
  os << "estimated mid: " << mid << "\n";
  for (const auto& w : mid_warnings) os << "  warning: " << w << "\n";
  os << "ordering region <= mid: " << (ordering_ok ? "holds" : "violated") << "\n";
  os << "no success below region: " << (converse_ok ? "holds" : "violated") << "\n";
  return os.str();
}

}  // namespace midcs
