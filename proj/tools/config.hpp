#pragma once

// JSON experiment configuration. Every section is optional and falls back to
// the defaults below; unknown keys are rejected with the offending path.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "midcs/midcs.hpp"

namespace midcs::cli {

using json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

struct GenerateConfig {
  std::size_t n = 4;
  std::size_t trials = 1000;
  bool operator==(const GenerateConfig&) const = default;
};

struct EstimateConfig {
  std::vector<std::string> flavors{"Mid", "Idimr"};
  std::vector<std::size_t> n_ladder{1, 2, 4};
  std::vector<std::int64_t> k_ladder{4, 16, 64, 256};
  std::size_t trials = 100000;
  bool miller_madow = true;
  std::size_t window = 3;
  // AvgLocal only.
  std::vector<double> r_ladder{0.2, 0.1, 0.05, 0.025};
  std::size_t subsample = 1000;
  bool operator==(const EstimateConfig&) const = default;
};

struct EnergyConfig {
  std::vector<double> theta{0.5};
  std::vector<std::size_t> n_ladder{4, 8, 16, 32};
  std::size_t trials = 2000;
  double cap_log2 = kDefaultEnergyCapLog2;
  bool operator==(const EnergyConfig&) const = default;
};

struct AuditConfig {
  std::vector<std::size_t> m{1, 2, 4, 8};
  std::vector<double> eps{0.05, 0.1, 0.2, 0.3, 0.5};
  std::size_t trials = 100000;
  std::size_t norm_m = 8;
  std::size_t norm_n = 16;
  std::size_t norm_trials = 1000;
  std::vector<double> percentiles{50.0, 90.0, 99.0, 99.9};
  bool operator==(const AuditConfig&) const = default;
};

struct PhaseConfig {
  std::size_t n = 24;
  std::vector<double> rates = default_rate_grid();
  double delta = 0.05;
  std::size_t trials = 200;
  DecoderConfig decoder = [] {
    DecoderConfig d;
    d.kind = DecoderKind::SparseEnum;
    d.sparse.s_max = 14;
    return d;
  }();
  bool operator==(const PhaseConfig&) const = default;
};

struct ReportConfig {
  std::vector<double> theta_grid{0.25, 0.5, 0.75, 1.0};
  std::vector<double> rates = default_rate_grid(0.1, 0.9);
  std::vector<std::size_t> n_ladder{12};
  std::size_t trials = 50;
  std::vector<DecoderConfig> decoders;  // empty: sparse-enum + pinv
  std::size_t energy_trials = 2000;
  std::vector<std::size_t> energy_n_ladder{4, 8, 16, 32};
  std::size_t mid_trials = 100000;
  bool operator==(const ReportConfig&) const = default;
};

struct Config {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  ProcessSpec process = ProcessSpec::iid_uniform();
  GenerateConfig generate;
  EstimateConfig estimate;
  EnergyConfig energy;
  AuditConfig audit;
  PhaseConfig phase;
  ReportConfig report;
  bool operator==(const Config&) const = default;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParameterError((path.empty() ? std::string("config") : path) + ": expected an object");
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  require_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ParameterError(join(path, item.key()) + ": unknown key");
  }
}

template <typename T>
T as(const json& j, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ParameterError(path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.template get<std::int64_t>() >= 0)) {
        throw ParameterError(path + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ParameterError(path + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ParameterError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ParameterError(path + ": expected a string");
    }
    return j.template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError(path + ": wrong type");
  }
}

template <typename T>
std::vector<T> as_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParameterError(path + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as<T>(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  out = as<T>(j.at(key), join(path, key));
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  out = as_list<T>(j.at(key), join(path, key));
}

// Library validation messages name fields relative to the process record.
template <typename F>
void prefixed(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + "." + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------- process

inline json to_json(const ProcessSpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  json p = json::object();
  std::visit(
      [&](const auto& params) {
        using P = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<P, MixedParams>) {
          p["p"] = params.p;
        } else if constexpr (std::is_same_v<P, GaussianParams>) {
          const auto& c = params.covariance;
          json cj;
          if (c.type == CovarianceSpec::Type::Ar1) {
            cj["type"] = "ar1";
            cj["variance"] = c.variance;
            cj["rho"] = c.rho;
          } else {
            cj["type"] = "toeplitz";
            cj["autocov"] = c.autocov;
          }
          p["covariance"] = cj;
        } else if constexpr (std::is_same_v<P, MarkovParams>) {
          p["transition"] = params.transition;
          p["emissions"] = params.emissions;
        } else if constexpr (std::is_same_v<P, DigitParams>) {
          p["S"] = params.S;
          p["b_max"] = params.b_max;
        }
      },
      spec.params);
  j["params"] = p;
  if (spec.ground_truth) j["ground_truth"] = {{"mid", spec.ground_truth->mid}, {"note", spec.ground_truth->note}};
  return j;
}

inline ProcessSpec process_from_json(const json& j, const std::string& path) {
  using detail::join;
  detail::allow_keys(j, path, {"kind", "params", "ground_truth"});
  if (!j.contains("kind")) throw ParameterError(join(path, "kind") + ": required");
  ProcessSpec spec;
  detail::prefixed(path, [&] { spec.kind = process_kind_from_string(detail::as<std::string>(j.at("kind"), "kind")); });
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pp = join(path, "params");
  switch (spec.kind) {
    case ProcessKind::IidMixed: {
      detail::allow_keys(params, pp, {"p"});
      if (!params.contains("p")) throw ParameterError(join(pp, "p") + ": required");
      spec.params = MixedParams{detail::as<double>(params.at("p"), join(pp, "p"))};
      break;
    }
    case ProcessKind::IidUniform:
      detail::allow_keys(params, pp, {});
      spec.params = UniformParams{};
      break;
    case ProcessKind::GaussianStationary: {
      detail::allow_keys(params, pp, {"covariance"});
      if (!params.contains("covariance")) throw ParameterError(join(pp, "covariance") + ": required");
      const json& c = params.at("covariance");
      const std::string cp = join(pp, "covariance");
      detail::allow_keys(c, cp, {"type", "variance", "rho", "autocov"});
      CovarianceSpec cov;
      const std::string type = c.contains("type") ? detail::as<std::string>(c.at("type"), join(cp, "type")) : "ar1";
      if (type == "ar1") {
        cov.type = CovarianceSpec::Type::Ar1;
        detail::read(c, cp, "variance", cov.variance);
        detail::read(c, cp, "rho", cov.rho);
        if (c.contains("autocov")) throw ParameterError(join(cp, "autocov") + ": only valid for type toeplitz");
      } else if (type == "toeplitz") {
        cov.type = CovarianceSpec::Type::Toeplitz;
        detail::read(c, cp, "autocov", cov.autocov);
        if (c.contains("variance") || c.contains("rho")) {
          throw ParameterError(join(cp, c.contains("rho") ? "rho" : "variance") + ": only valid for type ar1");
        }
      } else {
        throw ParameterError(join(cp, "type") + ": must be ar1 or toeplitz");
      }
      spec.params = GaussianParams{cov};
      break;
    }
    case ProcessKind::MarkovChain: {
      detail::allow_keys(params, pp, {"transition", "emissions"});
      MarkovParams m;
      if (!params.contains("transition")) throw ParameterError(join(pp, "transition") + ": required");
      const json& t = params.at("transition");
      if (!t.is_array()) throw ParameterError(join(pp, "transition") + ": expected a list of rows");
      for (std::size_t i = 0; i < t.size(); ++i) {
        m.transition.push_back(detail::as_list<double>(t[i], join(pp, "transition") + "[" + std::to_string(i) + "]"));
      }
      detail::read(params, pp, "emissions", m.emissions);
      spec.params = m;
      break;
    }
    case ProcessKind::DigitShared:
    case ProcessKind::DigitIid: {
      detail::allow_keys(params, pp, {"S", "b_max"});
      DigitParams d;
      detail::read(params, pp, "S", d.S);
      detail::read(params, pp, "b_max", d.b_max);
      spec.params = d;
      break;
    }
  }
  if (j.contains("ground_truth")) {
    const json& g = j.at("ground_truth");
    const std::string gp = join(path, "ground_truth");
    detail::allow_keys(g, gp, {"mid", "note"});
    GroundTruth truth;
    if (!g.contains("mid")) throw ParameterError(join(gp, "mid") + ": required");
    truth.mid = detail::as<double>(g.at("mid"), join(gp, "mid"));
    detail::read(g, gp, "note", truth.note);
    spec.ground_truth = truth;
  }
  detail::prefixed(path, [&] { validate(spec); });
  return spec;
}

// ---------------------------------------------------------------- decoders

inline json to_json(const DecoderConfig& d) {
  json j;
  j["kind"] = to_string(d.kind);
  switch (d.kind) {
    case DecoderKind::SparseEnum:
      j["s_max"] = d.sparse.s_max;
      j["budget"] = d.sparse.budget;
      j["exhaustive_only"] = d.sparse.exhaustive_only;
      j["zero_set_draws"] = d.sparse.zero_set_draws;
      break;
    case DecoderKind::MinEntropy:
      j["k"] = d.entropy.k;
      j["box"] = d.entropy.box;
      j["tau"] = d.entropy.tau;
      j["mode"] = d.entropy.mode == SearchMode::Exhaustive ? "exhaustive" : "anneal";
      j["budget"] = d.entropy.budget;
      j["anneal_iterations"] = d.entropy.anneal_iterations;
      break;
    case DecoderKind::Pinv:
    case DecoderKind::Zero: break;
  }
  return j;
}

inline DecoderConfig decoder_from_json(const json& j, const std::string& path) {
  using detail::join;
  detail::require_object(j, path);
  DecoderConfig d;
  if (!j.contains("kind")) throw ParameterError(join(path, "kind") + ": required");
  detail::prefixed(path, [&] { d.kind = decoder_kind_from_string(detail::as<std::string>(j.at("kind"), "kind")); });
  switch (d.kind) {
    case DecoderKind::SparseEnum:
      detail::allow_keys(j, path, {"kind", "s_max", "budget", "exhaustive_only", "zero_set_draws"});
      detail::read(j, path, "s_max", d.sparse.s_max);
      detail::read(j, path, "budget", d.sparse.budget);
      detail::read(j, path, "exhaustive_only", d.sparse.exhaustive_only);
      detail::read(j, path, "zero_set_draws", d.sparse.zero_set_draws);
      if (d.sparse.s_max < 1) throw ParameterError(join(path, "s_max") + ": must be >= 1");
      break;
    case DecoderKind::MinEntropy: {
      detail::allow_keys(j, path, {"kind", "k", "box", "tau", "mode", "budget", "anneal_iterations"});
      detail::read(j, path, "k", d.entropy.k);
      detail::read(j, path, "box", d.entropy.box);
      detail::read(j, path, "tau", d.entropy.tau);
      detail::read(j, path, "budget", d.entropy.budget);
      detail::read(j, path, "anneal_iterations", d.entropy.anneal_iterations);
      std::string mode = "exhaustive";
      detail::read(j, path, "mode", mode);
      if (mode == "exhaustive") {
        d.entropy.mode = SearchMode::Exhaustive;
      } else if (mode == "anneal") {
        d.entropy.mode = SearchMode::Anneal;
      } else {
        throw ParameterError(join(path, "mode") + ": must be exhaustive or anneal");
      }
      if (d.entropy.k < 1) throw ParameterError(join(path, "k") + ": must be >= 1");
      break;
    }
    case DecoderKind::Pinv:
    case DecoderKind::Zero: detail::allow_keys(j, path, {"kind"}); break;
  }
  return d;
}

// ---------------------------------------------------------------- config

inline json to_json(const Config& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["process"] = to_json(c.process);
  j["generate"] = {{"n", c.generate.n}, {"trials", c.generate.trials}};
  j["estimate"] = {{"flavors", c.estimate.flavors},     {"n_ladder", c.estimate.n_ladder},
                   {"k_ladder", c.estimate.k_ladder},   {"trials", c.estimate.trials},
                   {"miller_madow", c.estimate.miller_madow}, {"window", c.estimate.window},
                   {"r_ladder", c.estimate.r_ladder},   {"subsample", c.estimate.subsample}};
  j["energy"] = {{"theta", c.energy.theta},
                 {"n_ladder", c.energy.n_ladder},
                 {"trials", c.energy.trials},
                 {"cap_log2", c.energy.cap_log2}};
  j["audit"] = {{"m", c.audit.m},
                {"eps", c.audit.eps},
                {"trials", c.audit.trials},
                {"norm_m", c.audit.norm_m},
                {"norm_n", c.audit.norm_n},
                {"norm_trials", c.audit.norm_trials},
                {"percentiles", c.audit.percentiles}};
  j["phase"] = {{"n", c.phase.n},
                {"rates", c.phase.rates},
                {"delta", c.phase.delta},
                {"trials", c.phase.trials},
                {"decoder", to_json(c.phase.decoder)}};
  json decoders = json::array();
  for (const auto& d : c.report.decoders) decoders.push_back(to_json(d));
  j["report"] = {{"theta_grid", c.report.theta_grid},
                 {"rates", c.report.rates},
                 {"n_ladder", c.report.n_ladder},
                 {"trials", c.report.trials},
                 {"decoders", decoders},
                 {"energy_trials", c.report.energy_trials},
                 {"energy_n_ladder", c.report.energy_n_ladder},
                 {"mid_trials", c.report.mid_trials}};
  return j;
}

inline Config config_from_json(const json& j) {
  using detail::read;
  detail::allow_keys(j, "", {"version", "seed", "process", "generate", "estimate", "energy", "audit", "phase", "report"});
  Config c;
  if (!j.contains("version")) throw ParameterError("version: required");
  c.version = detail::as<int>(j.at("version"), "version");
  if (c.version != kConfigVersion) {
    throw ParameterError("version: unsupported config version " + std::to_string(c.version) + " (expected " +
                         std::to_string(kConfigVersion) + ")");
  }
  read(j, "", "seed", c.seed);
  if (j.contains("process")) c.process = process_from_json(j.at("process"), "process");

  if (j.contains("generate")) {
    const json& g = j.at("generate");
    detail::allow_keys(g, "generate", {"n", "trials"});
    read(g, "generate", "n", c.generate.n);
    read(g, "generate", "trials", c.generate.trials);
  }
  if (j.contains("estimate")) {
    const json& e = j.at("estimate");
    detail::allow_keys(e, "estimate",
                       {"flavors", "n_ladder", "k_ladder", "trials", "miller_madow", "window", "r_ladder", "subsample"});
    read(e, "estimate", "flavors", c.estimate.flavors);
    read(e, "estimate", "n_ladder", c.estimate.n_ladder);
    read(e, "estimate", "k_ladder", c.estimate.k_ladder);
    read(e, "estimate", "trials", c.estimate.trials);
    read(e, "estimate", "miller_madow", c.estimate.miller_madow);
    read(e, "estimate", "window", c.estimate.window);
    read(e, "estimate", "r_ladder", c.estimate.r_ladder);
    read(e, "estimate", "subsample", c.estimate.subsample);
    for (std::size_t i = 0; i < c.estimate.flavors.size(); ++i) {
      const auto& f = c.estimate.flavors[i];
      if (f != "Mid" && f != "Idimr" && f != "InfoDim" && f != "AvgLocal") {
        throw ParameterError("estimate.flavors[" + std::to_string(i) + "]: must be Mid, Idimr, InfoDim or AvgLocal");
      }
    }
  }
  if (j.contains("energy")) {
    const json& e = j.at("energy");
    detail::allow_keys(e, "energy", {"theta", "n_ladder", "trials", "cap_log2"});
    if (e.contains("theta") && e.at("theta").is_number()) {
      c.energy.theta = {detail::as<double>(e.at("theta"), "energy.theta")};
    } else {
      read(e, "energy", "theta", c.energy.theta);
    }
    read(e, "energy", "n_ladder", c.energy.n_ladder);
    read(e, "energy", "trials", c.energy.trials);
    read(e, "energy", "cap_log2", c.energy.cap_log2);
  }
  if (j.contains("audit")) {
    const json& a = j.at("audit");
    detail::allow_keys(a, "audit", {"m", "eps", "trials", "norm_m", "norm_n", "norm_trials", "percentiles"});
    read(a, "audit", "m", c.audit.m);
    read(a, "audit", "eps", c.audit.eps);
    read(a, "audit", "trials", c.audit.trials);
    read(a, "audit", "norm_m", c.audit.norm_m);
    read(a, "audit", "norm_n", c.audit.norm_n);
    read(a, "audit", "norm_trials", c.audit.norm_trials);
    read(a, "audit", "percentiles", c.audit.percentiles);
  }
  if (j.contains("phase")) {
    const json& p = j.at("phase");
    detail::allow_keys(p, "phase", {"n", "rates", "delta", "trials", "decoder"});
    read(p, "phase", "n", c.phase.n);
    read(p, "phase", "rates", c.phase.rates);
    read(p, "phase", "delta", c.phase.delta);
    read(p, "phase", "trials", c.phase.trials);
    if (p.contains("decoder")) c.phase.decoder = decoder_from_json(p.at("decoder"), "phase.decoder");
  }
  if (j.contains("report")) {
    const json& r = j.at("report");
    detail::allow_keys(r, "report",
                       {"theta_grid", "rates", "n_ladder", "trials", "decoders", "energy_trials", "energy_n_ladder",
                        "mid_trials"});
    read(r, "report", "theta_grid", c.report.theta_grid);
    read(r, "report", "rates", c.report.rates);
    read(r, "report", "n_ladder", c.report.n_ladder);
    read(r, "report", "trials", c.report.trials);
    read(r, "report", "energy_trials", c.report.energy_trials);
    read(r, "report", "energy_n_ladder", c.report.energy_n_ladder);
    read(r, "report", "mid_trials", c.report.mid_trials);
    if (r.contains("decoders")) {
      const json& ds = r.at("decoders");
      if (!ds.is_array()) throw ParameterError("report.decoders: expected a list");
      c.report.decoders.clear();
      for (std::size_t i = 0; i < ds.size(); ++i) {
        c.report.decoders.push_back(decoder_from_json(ds[i], "report.decoders[" + std::to_string(i) + "]"));
      }
    }
  }
  return c;
}

inline Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  return config_from_json(j);
}

inline std::string serialize_config(const Config& c) { return to_json(c).dump(2) + "\n"; }

inline std::string read_text_file(const std::string& path, const char* field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError(std::string(field) + ": cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace midcs::cli
