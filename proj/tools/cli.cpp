#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "commands.hpp"
#include "run_config.hpp"

namespace spider::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Flags {
  std::string config;
  std::string output;
  int workers = 0;
  std::vector<std::pair<std::string, json>> overrides;
};

template <class T>
CLI::Option* option(CLI::App* app, Flags& flags, const std::string& name, const std::string& pointer,
                    const std::string& help) {
  return app->add_option_function<T>(
      name, [&flags, pointer](const T& v) { flags.overrides.push_back({pointer, json(v)}); }, help);
}

void preset_flags(CLI::App* app, Flags& f) {
  option<std::string>(app, f, "--preset", "/preset/family", "coefficient family: brownian-spider, constant, affine-in-l, trig-in-t");
  option<int>(app, f, "--I", "/preset/I", "number of branches");
  option<std::string>(app, f, "--alpha-mode", "/preset/alpha_mode", "brownian-spider: uniform, constant, l-dependent");
  option<std::vector<double>>(app, f, "--alpha", "/preset/alpha", "spinning measure, comma separated")->delimiter(',');
  option<double>(app, f, "--alpha-base", "/preset/alpha_base", "l-dependent alpha_1 = base + amp / (1 + l)");
  option<double>(app, f, "--alpha-amp", "/preset/alpha_amp", "see --alpha-base");
}

void mc_flags(CLI::App* app, Flags& f, bool horizon, bool record) {
  option<std::uint64_t>(app, f, "--seed", "/seed", "master seed");
  option<std::uint64_t>(app, f, "--paths", "/paths", "number of paths");
  option<int>(app, f, "--n-freeze", "/scheme/n_freeze", "coarse freezing cells");
  option<int>(app, f, "--n-fine", "/scheme/n_fine", "Euler substeps per cell");
  option<std::string>(app, f, "--crossing", "/scheme/crossing", "grid-touch, bridge-corrected, bridge-local-time");
  if (horizon) option<double>(app, f, "--horizon", "/scheme/horizon", "time horizon");
  if (record) option<int>(app, f, "--record-every", "/scheme/record_every", "store every k-th fine node");
}

void start_flags(CLI::App* app, Flags& f) {
  option<int>(app, f, "--start-branch", "/start/branch", "start branch");
  option<double>(app, f, "--start-x", "/start/x", "start distance from the vertex");
  option<double>(app, f, "--start-l", "/start/l", "start local time");
}

void grid_flags(CLI::App* app, Flags& f) {
  option<double>(app, f, "--horizon", "/grid/horizon", "time horizon");
  option<double>(app, f, "--x-max", "/grid/x_max", "branch truncation");
  option<double>(app, f, "--l-max", "/grid/l_max", "local-time truncation");
  option<int>(app, f, "--mx", "/grid/mx", "x cells");
  option<int>(app, f, "--ml", "/grid/ml", "l cells");
  option<int>(app, f, "--mt", "/grid/mt", "time steps");
  option<std::string>(app, f, "--outer", "/grid/outer", "outer boundary: outflow, neumann");
  option<std::string>(app, f, "--terminal", "/terminal/name", "constant, x-minus-l, heat, compatible-smooth");
  option<double>(app, f, "--terminal-c", "/terminal/c", "value for the constant terminal data");
}

void tolerance_flags(CLI::App* app, Flags& f) {
  option<double>(app, f, "--z", "/tolerances/z", "z level of the Monte Carlo bands");
  option<double>(app, f, "--range-fraction", "/tolerances/range_fraction", "compare-fk slack as a fraction of range(g)");
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spider diffusions with local-time dependent coefficients", "spider"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Flags f;
  std::map<std::string, CLI::App*> sub;
  const std::map<std::string, std::string> help = {
      {"simulate", "simulate an ensemble of paths"},
      {"kernel", "evaluate the Brownian spider transition kernel"},
      {"pde", "solve the backward system with the Kirchhoff condition"},
      {"skew", "simulate the two-branch skew SDE"},
      {"verify", "martingale, non-stickiness and self-convergence checks"},
      {"compare-fk", "compare the PDE solution with a Monte Carlo estimate"}};
  for (const auto& name : kCommands) {
    CLI::App* s = app.add_subcommand(name, help.at(name));
    s->add_option("--config", f.config, "JSON config file or a manifest from a previous run");
    s->add_option("--output", f.output, "output directory (default: $SPIDER_OUTPUT_DIR or spider-out)");
    s->add_option("--workers", f.workers, "worker threads (default: $SPIDER_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub[name] = s;
  }
  preset_flags(sub["simulate"], f);
  mc_flags(sub["simulate"], f, true, true);
  start_flags(sub["simulate"], f);

  preset_flags(sub["kernel"], f);
  CLI::App* k = sub["kernel"];
  option<std::string>(k, f, "--variant", "/kernel/variant", "local-time-weighted or unweighted");
  option<std::string>(k, f, "--convention", "/kernel/convention", "last-zero-time or source-time");
  option<double>(k, f, "--s", "/kernel/s", "source time");
  option<double>(k, f, "--t", "/kernel/t", "target time");
  option<int>(k, f, "--source-branch", "/kernel/source_branch", "source branch");
  option<double>(k, f, "--source-x", "/kernel/source_x", "source distance from the vertex");
  option<double>(k, f, "--source-l", "/kernel/source_l", "source local time");
  option<double>(k, f, "--y-max", "/kernel/y_max", "largest y in the slice");
  option<int>(k, f, "--ny", "/kernel/ny", "y nodes");
  option<double>(k, f, "--ell-max", "/kernel/ell_max", "largest local-time increment in the slice");
  option<int>(k, f, "--nl", "/kernel/nl", "local-time cells");

  preset_flags(sub["pde"], f);
  grid_flags(sub["pde"], f);

  CLI::App* sk = sub["skew"];
  mc_flags(sk, f, true, true);
  option<double>(sk, f, "--skew-alpha", "/skew/alpha", "skewness parameter alpha in (0, 1)");
  option<double>(sk, f, "--sigma-plus", "/skew/sigma_plus", "volatility on y > 0");
  option<double>(sk, f, "--sigma-minus", "/skew/sigma_minus", "volatility on y < 0");
  option<double>(sk, f, "--drift-plus", "/skew/drift_plus", "drift on y > 0");
  option<double>(sk, f, "--drift-minus", "/skew/drift_minus", "drift on y < 0");
  option<double>(sk, f, "--y0", "/skew/y0", "start point");

  CLI::App* v = sub["verify"];
  preset_flags(v, f);
  mc_flags(v, f, true, false);
  start_flags(v, f);
  tolerance_flags(v, f);
  option<std::vector<std::string>>(v, f, "--suites", "/verify/suites", "martingale, non-stickiness, self-convergence")
      ->delimiter(',');
  option<std::string>(v, f, "--negative-control", "/verify/negative_control", "reverse, branch-1 or none");

  CLI::App* fk = sub["compare-fk"];
  preset_flags(fk, f);
  mc_flags(fk, f, false, false);
  start_flags(fk, f);
  grid_flags(fk, f);
  tolerance_flags(fk, f);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  const auto started = std::chrono::steady_clock::now();
  RunConfig rc;
  rc.command = app.get_subcommands().front()->get_name();
  rc.output = !f.output.empty() ? f.output : env("SPIDER_OUTPUT_DIR").value_or("spider-out");
  rc.workers = f.workers;
  std::stable_partition(f.overrides.begin(), f.overrides.end(), [](const auto& o) { return o.first == "/preset/family"; });

  int code = kExitOk;
  std::string error;
  json verdict;
  std::optional<ArtifactSet> artifacts;
  try {
    const json file = f.config.empty() ? json::object() : load_config_file(f.config);
    rc.config = complete_config(rc.command, file, f.overrides);
    artifacts.emplace(rc.output);
    const CommandResult r = run_command(rc, *artifacts, out);
    code = r.exit_code;
    verdict = r.verdict;
  } catch (const NumericalError& e) {
    code = kExitNumerical;
    error = e.what();
  } catch (const PreconditionError& e) {
    code = kExitValidation;
    error = e.what();
  } catch (const json::exception& e) {
    code = kExitValidation;
    error = std::string("config: ") + e.what();
  } catch (const std::exception& e) {
    code = kExitNumerical;
    error = e.what();
  }
  if (!error.empty()) err << "error: " << error << "\n";
  if (!artifacts) return code;

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest = {{"tool", "spider"},
                   {"command", rc.command},
                   {"config", rc.config},
                   {"seed", rc.config.contains("seed") ? rc.config["seed"] : json()},
                   {"versions",
                    {{"spider", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"cli11", CLI11_VERSION},
                     {"compiler", __VERSION__}}},
                   {"artifacts", artifacts->listing()},
                   {"exit_code", code},
                   {"error", error},
                   {"verdict", verdict},
                   {"workers", resolve_workers(rc.workers)},
                   {"wall_time_s", wall}};
  try {
    artifacts->write("manifest.json", manifest);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return code;
}

}  // namespace spider::cli
