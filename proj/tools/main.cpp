#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"

namespace {

int exit_code(midcs::ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
  using namespace midcs;
  using namespace midcs::cli;

  CLI::App app{"Dimension estimators, energy audits and compressed-sensing phase experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MIDCS_VERSION);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<unsigned> threads;
  std::string format;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (default: current directory)");
  app.add_option("--threads", threads, "worker threads (fallback: MIDCS_THREADS, then 1)")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "csv or binary (generate writes both by default)")
      ->check(CLI::IsMember({"csv", "binary"}));

  const std::map<std::string, std::string> blurbs{
      {"generate", "sample source blocks"},
      {"estimate-dim", "dimension estimates over n and k ladders"},
      {"energy", "normalized energy rate curves"},
      {"audit-gauss", "small-ball and operator-norm audits of Gaussian matrices"},
      {"phase", "recovery phase diagram and threshold"},
      {"report", "correlation-dimension region vs recovery thresholds"},
  };
  std::vector<CLI::App*> runs;
  for (const auto& [name, fn] : commands()) {
    (void)fn;
    const auto it = blurbs.find(name);
    runs.push_back(app.add_subcommand(name, it == blurbs.end() ? name : it->second));
  }
  std::string manifest_path;
  CLI::App* replay_cmd = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  replay_cmd->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ExitCode::Config);
  }

  set_thread_count(threads ? *threads : std::max(1u, threads_from_env()));

  try {
    if (replay_cmd->parsed()) {
      const std::filesystem::path mp(manifest_path);
      const std::filesystem::path dir =
          out_dir.empty() ? (mp.has_parent_path() ? mp.parent_path() : std::filesystem::path(".")) / "replay" : std::filesystem::path(out_dir);
      std::vector<std::string> diags;
      const auto res = replay(mp, dir, &diags);
      for (const auto& d : diags) std::cerr << "warning: " << d << "\n";
      if (!res.ok()) {
        std::cerr << "error: replay digests differ for:";
        for (const auto& m : res.mismatched) std::cerr << " " << m;
        std::cerr << "\n";
        return exit_code(ExitCode::Data);
      }
      std::cout << "replay ok: " << res.manifest.at("outputs").size() << " outputs reproduced in " << dir.string()
                << "\n";
      return 0;
    }

    RunRequest req;
    for (auto* sub : runs) {
      if (sub->parsed()) req.command = sub->get_name();
    }
    if (!config_path.empty()) {
      req.config = parse_config(read_text_file(config_path, "config"));
    }
    if (seed) req.config.seed = *seed;
    if (!format.empty()) req.format = format_from_string(format);
    req.out_dir = out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir);
    req.argv.assign(argv, argv + argc);
    std::vector<std::string> diags;
    const auto manifest = execute(req, &diags);
    for (const auto& d : diags) std::cerr << "warning: " << d << "\n";
    for (const auto& o : manifest.at("outputs")) {
      std::cout << (req.out_dir / o.at("path").get<std::string>()).string() << "  " << o.at("sha256").get<std::string>()
                << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
