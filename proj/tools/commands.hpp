#pragma once

// Subcommand bodies. Each returns its artifacts in memory; the caller writes
// them and the manifest in one place.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"

namespace midcs::cli {

enum class Format { Both, Csv, Binary };

inline const char* to_string(Format f) {
  switch (f) {
    case Format::Both: return "both";
    case Format::Csv: return "csv";
    case Format::Binary: return "binary";
  }
  return "?";
}

inline Format format_from_string(const std::string& s) {
  if (s == "both") return Format::Both;
  if (s == "csv") return Format::Csv;
  if (s == "binary") return Format::Binary;
  throw ParameterError("format: must be csv or binary");
}

struct Artifact {
  std::string name;
  std::string bytes;
};

struct RunResult {
  std::vector<Artifact> files;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline void estimate_rows(CsvWriter& w, const DimensionEstimate& e, const std::string& flavor) {
  for (const auto& p : e.ladder) w.row(flavor, p.scale, p.raw, e.fit.slope, e.value);
}

inline void warn_all(RunResult& r, const std::string& what, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) r.diagnostics.push_back(what + ": " + w);
}

}  // namespace detail

inline RunResult cmd_generate(const Config& c, Format fmt) {
  RunResult r;
  const SampleBatch batch = sample_process(c.process, c.generate.n, c.generate.trials, derive_seed(c.seed, "generate"));
  if (fmt != Format::Binary) r.files.push_back({"batch.csv", batch_csv(batch)});
  if (fmt != Format::Csv) r.files.push_back({"batch.bin", batch_binary(batch)});
  return r;
}

inline RunResult cmd_estimate_dim(const Config& c, Format) {
  RunResult r;
  const auto& e = c.estimate;
  if (e.n_ladder.empty()) throw ParameterError("estimate.n_ladder: must be non-empty");
  MidOptions opt;
  opt.miller_madow = e.miller_madow;
  opt.window = e.window;
  const std::size_t n_max = *std::max_element(e.n_ladder.begin(), e.n_ladder.end());
  const SampleBatch batch = sample_process(c.process, n_max, e.trials, derive_seed(c.seed, "estimate"));
  CsvWriter w({"flavor", "scale", "raw", "fitted_slope", "value"});
  std::optional<std::vector<EntropyCell>> table;
  auto entropy = [&]() -> const std::vector<EntropyCell>& {
    if (!table) table = entropy_table(batch, e.n_ladder, e.k_ladder, opt);
    return *table;
  };
  for (const auto& flavor : e.flavors) {
    if (flavor == "Mid") {
      const auto est = mid_from_table(entropy(), e.n_ladder, e.k_ladder.size(), opt);
      detail::estimate_rows(w, est, "Mid");
      detail::warn_all(r, "Mid", est.warnings);
    } else if (flavor == "Idimr") {
      const auto est = idimr_from_table(entropy(), e.n_ladder, e.k_ladder.size(), opt);
      detail::estimate_rows(w, est, "Idimr");
      detail::warn_all(r, "Idimr", est.warnings);
    } else if (flavor == "InfoDim") {
      const auto lu = estimate_info_dim(batch, e.k_ladder, opt);
      detail::estimate_rows(w, lu.lower, "InfoDimLower");
      detail::estimate_rows(w, lu.upper, "InfoDimUpper");
    } else if (flavor == "AvgLocal") {
      AvgLocalOptions ao;
      ao.subsample = std::min(e.subsample, batch.trials);
      ao.seed = derive_seed(c.seed, "estimate-avg-local");
      ao.local.window = e.window;
      const auto res = estimate_avg_local_dim(batch, e.r_ladder, ao);
      detail::estimate_rows(w, res.estimate.lower, "AvgLocalLower");
      detail::estimate_rows(w, res.estimate.upper, "AvgLocalUpper");
      detail::warn_all(r, "AvgLocal", res.estimate.lower.warnings);
    }
  }
  r.files.push_back({"estimate.csv", w.str()});
  return r;
}

inline RunResult cmd_energy(const Config& c, Format) {
  RunResult r;
  CsvWriter w({"n", "s", "theta", "log2_energy", "normalized_rate", "flag"});
  for (std::size_t i = 0; i < c.energy.theta.size(); ++i) {
    const double theta = c.energy.theta[i];
    const auto curve = normalized_energy_rate(c.process, c.energy.n_ladder, theta, c.energy.trials,
                                              derive_seed(c.seed, "energy", i), c.energy.cap_log2);
    for (const auto& p : curve) {
      const auto& e = p.energies.front();
      w.row(p.n, p.s_grid.front(), theta, e.infinite ? std::numeric_limits<double>::infinity() : e.log2,
            p.normalized_rate, e.infinite ? "inf:" + e.reason : std::string());
      if (e.infinite) r.diagnostics.push_back("energy: n = " + std::to_string(p.n) + " flagged infinite (" + e.reason + ")");
    }
  }
  r.files.push_back({"energy.csv", w.str()});
  return r;
}

inline RunResult cmd_audit_gauss(const Config& c, Format) {
  RunResult r;
  CsvWriter ball({"m", "eps", "empirical", "bound", "pass"});
  for (std::size_t i = 0; i < c.audit.m.size(); ++i) {
    const auto rep = small_ball_audit(c.audit.m[i], c.audit.eps, c.audit.trials, derive_seed(c.seed, "audit-ball", i));
    for (const auto& row : rep.rows) {
      ball.row(row.m, row.eps, row.empirical, row.bound, row.pass);
      if (!row.pass && row.power_limited) {
        r.diagnostics.push_back("audit: m = " + std::to_string(row.m) + ", eps = " + format_number(row.eps) +
                                " cannot pass at this trial count (bound below the zero-hit Wilson limit)");
      }
    }
    detail::warn_all(r, "audit", rep.warnings);
  }
  r.files.push_back({"small_ball.csv", ball.str()});
  CsvWriter norm({"m", "n", "percentile", "value"});
  const auto rep = operator_norm_audit(c.audit.norm_m, c.audit.norm_n, c.audit.norm_trials,
                                       derive_seed(c.seed, "audit-norm"), c.audit.percentiles);
  for (const auto& p : rep.curve) norm.row(rep.m, rep.n, p.percentile, p.value);
  r.diagnostics.push_back("audit: K_hat = " + format_number(rep.K_hat) +
                          (rep.exact_quantile ? "" : " (read at the 99.9th percentile; tail level not resolved)"));
  r.files.push_back({"norm.csv", norm.str()});
  return r;
}

inline std::string phase_csv(const PhaseDiagram& d) {
  CsvWriter w({"rate", "m", "trials", "successes", "p_hat", "wilson_lo", "wilson_hi", "flag"});
  for (const auto& cell : d.cells) {
    const auto ci = cell.wilson();
    w.row(cell.rate, cell.m, cell.trials, cell.successes, cell.p_hat(), ci.lo, ci.hi, cell.flag());
  }
  return w.str();
}

inline std::string phase_plot(const PhaseDiagram& d) {
  std::string out = "# rate p_hat\n";
  for (const auto& cell : d.cells) out += format_number(cell.rate) + " " + format_number(cell.p_hat()) + "\n";
  return out;
}

inline RunResult cmd_phase(const Config& c, Format) {
  RunResult r;
  const auto& p = c.phase;
  const PhaseDiagram d = run_phase(c.process, p.n, p.rates, p.delta, p.trials, p.decoder, derive_seed(c.seed, "phase"));
  r.files.push_back({"phase.csv", phase_csv(d)});
  r.files.push_back({"phase_plot.dat", phase_plot(d)});
  CsvWriter t({"decoder", "found", "threshold", "band_lo", "band_hi", "note"});
  if (d.cells.size() >= 4) {
    const auto th = detect_threshold(d);
    t.row(d.decoder_id, th.found, th.threshold, th.band_lo, th.band_hi, th.note);
  } else {
    r.diagnostics.push_back("phase: fewer than 4 rates, no threshold fit");
  }
  r.files.push_back({"threshold.csv", t.str()});
  return r;
}

inline RunResult cmd_report(const Config& c, Format) {
  RunResult r;
  ReportOptions opt;
  opt.decoders = c.report.decoders;
  opt.energy_trials = c.report.energy_trials;
  opt.energy_n_ladder = c.report.energy_n_ladder;
  opt.mid_trials = c.report.mid_trials;
  opt.mid_n_ladder = c.estimate.n_ladder;
  opt.mid_k_ladder = c.estimate.k_ladder;
  opt.delta = c.phase.delta;
  const auto rep = mdimcor_vs_recovery_report(c.process, c.report.theta_grid, c.report.rates, c.report.n_ladder,
                                              c.report.trials, derive_seed(c.seed, "report"), opt);
  r.files.push_back({"report.txt", rep.text()});
  detail::warn_all(r, "report mid", rep.mid_warnings);
  return r;
}

using CommandFn = std::function<RunResult(const Config&, Format)>;

inline const std::map<std::string, CommandFn>& commands() {
  static const std::map<std::string, CommandFn> table{
      {"generate", cmd_generate}, {"estimate-dim", cmd_estimate_dim}, {"energy", cmd_energy},
      {"audit-gauss", cmd_audit_gauss}, {"phase", cmd_phase},          {"report", cmd_report},
  };
  return table;
}

// ---------------------------------------------------------------- manifests

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunRequest {
  std::string command;
  Config config;
  Format format = Format::Both;
  std::filesystem::path out_dir = ".";
  std::vector<std::string> argv;
};

// Runs a subcommand, writes its artifacts and manifest.json into out_dir and
// returns the manifest.
inline json execute(const RunRequest& req, std::vector<std::string>* diagnostics = nullptr) {
  const auto it = commands().find(req.command);
  if (it == commands().end()) throw ParameterError("command: unknown subcommand '" + req.command + "'");
  json manifest;
  manifest["artifact_version"] = MIDCS_VERSION;
  manifest["command_line"] = req.argv;
  manifest["subcommand"] = req.command;
  manifest["format"] = to_string(req.format);
  manifest["seed"] = req.config.seed;
  const std::string config_text = serialize_config(req.config);
  manifest["config_sha256"] = sha256_hex(config_text);
  manifest["config"] = to_json(req.config);
  manifest["threads"] = thread_count();
  manifest["start"] = utc_now();
  const RunResult result = it->second(req.config, req.format);
  json outputs = json::array();
  for (const auto& f : result.files) {
    write_file(req.out_dir / f.name, f.bytes);
    outputs.push_back({{"path", f.name}, {"sha256", sha256_hex(f.bytes)}, {"bytes", f.bytes.size()}});
  }
  manifest["end"] = utc_now();
  manifest["outputs"] = outputs;
  manifest["diagnostics"] = result.diagnostics;
  write_file(req.out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (diagnostics) *diagnostics = result.diagnostics;
  return manifest;
}

struct ReplayResult {
  std::vector<std::string> mismatched;
  json manifest;
  bool ok() const { return mismatched.empty(); }
};

// Re-runs the manifest's subcommand with its embedded config into out_dir and
// compares every output digest.
inline ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                           std::vector<std::string>* diagnostics = nullptr) {
  json old;
  try {
    old = json::parse(read_text_file(manifest_path.string(), "manifest"));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("manifest: not valid JSON (") + e.what() + ")");
  }
  for (const char* key : {"subcommand", "config", "config_sha256", "outputs", "format"}) {
    if (!old.contains(key)) throw ParameterError(std::string("manifest.") + key + ": required");
  }
  RunRequest req;
  req.command = old.at("subcommand").get<std::string>();
  req.config = config_from_json(old.at("config"));
  if (sha256_hex(serialize_config(req.config)) != old.at("config_sha256").get<std::string>()) {
    throw DataError("manifest.config_sha256: embedded config does not match its digest");
  }
  req.format = format_from_string(old.at("format").get<std::string>());
  req.out_dir = out_dir;
  req.argv = {"replay", manifest_path.string()};
  ReplayResult res;
  res.manifest = execute(req, diagnostics);
  std::map<std::string, std::string> fresh;
  for (const auto& o : res.manifest.at("outputs")) fresh[o.at("path").get<std::string>()] = o.at("sha256").get<std::string>();
  for (const auto& o : old.at("outputs")) {
    const auto path = o.at("path").get<std::string>();
    const auto f = fresh.find(path);
    if (f == fresh.end() || f->second != o.at("sha256").get<std::string>()) res.mismatched.push_back(path);
  }
  if (fresh.size() != old.at("outputs").size()) res.mismatched.push_back("(output inventory differs)");
  return res;
}

}  // namespace midcs::cli
