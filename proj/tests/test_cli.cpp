#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "run_config.hpp"

using namespace spider::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spider_cli_" + name);
  fs::remove_all(p);
  return p;
}

int call(std::vector<std::string> args, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int code = run(args, o, e);
  if (err) *err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("config defaults and overrides") {
  const auto c = complete_config("simulate", nlohmann::json::object(), {{"/preset/I", 3}, {"/seed", 7}});
  CHECK(c["preset"]["I"] == 3);
  CHECK(c["preset"]["family"] == "brownian-spider");
  CHECK(c["seed"] == 7);
  CHECK(c["scheme"]["n_freeze"] == 64);
  const auto d = complete_config("simulate", {{"preset", {{"family", "constant"}, {"alpha", {0.5, 0.5}}}}},
                                 {{"/preset/family", "brownian-spider"}});
  CHECK_FALSE(d["preset"].contains("sigma"));
}

TEST_CASE("config rejects unknown keys, foreign sections and wrong types") {
  CHECK_THROWS_WITH_AS(complete_config("simulate", {{"scheme", {{"n_frieze", 3}}}}, {}),
                       "config: unknown key 'scheme.n_frieze'", ConfigError);
  CHECK_THROWS_AS(complete_config("simulate", {{"grid", nlohmann::json::object()}}, {}), ConfigError);
  CHECK_THROWS_WITH_AS(complete_config("pde", {{"grid", {{"mx", "many"}}}}, {}), "config: 'grid.mx' must be an integer",
                       ConfigError);
  CHECK_THROWS_AS(complete_config("simulate", {{"preset", {{"family", "brownian-spider"}, {"beta", 1}}}}, {}),
                  ConfigError);
  CHECK_THROWS_AS(complete_config("skew", {{"command", "pde"}}, {}), ConfigError);
  CHECK_THROWS_AS(complete_config("fly", nlohmann::json::object(), {}), ConfigError);
}

TEST_CASE("malformed config files report line and column") {
  const fs::path dir = scratch("badcfg");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << "{\n  \"seed\": 3,\n  \"paths\": oops\n}\n";
  std::string err;
  CHECK(call({"simulate", "--config", (dir / "c.json").string(), "--output", (dir / "o").string()}, &err) == 1);
  CHECK(err.find("c.json:3:") != std::string::npos);
  CHECK(call({"simulate", "--bogus"}) == 1);
  CHECK(call({}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate writes paths, summary and a manifest deterministically") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const std::vector<std::string> cmd = {"simulate", "--preset", "brownian-spider", "--I", "3", "--alpha-mode",
                                        "l-dependent", "--paths", "200", "--seed", "7"};
  auto with = [&](const fs::path& out, const std::string& workers) {
    auto v = cmd;
    v.insert(v.end(), {"--output", out.string(), "--workers", workers});
    return v;
  };
  REQUIRE(call(with(a, "1")) == 0);
  REQUIRE(call(with(b, "3")) == 0);
  const auto manifest = read_json(a / "manifest.json");
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["config"]["preset"]["alpha_mode"] == "l-dependent");
  REQUIRE(manifest["artifacts"].size() == 2);
  for (const auto& art : manifest["artifacts"]) {
    const std::string name = art["path"];
    CHECK(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(art["bytes"] == fs::file_size(a / name));
  }
  const std::string csv = slurp(a / "paths.csv");
  CHECK(csv.rfind("path_id,t,x,branch,l\n", 0) == 0);

  // Re-running from the manifest reproduces the artifacts.
  const fs::path c = scratch("sim_c");
  REQUIRE(call({"simulate", "--config", (a / "manifest.json").string(), "--output", c.string()}) == 0);
  CHECK(slurp(c / "paths.csv") == csv);
  CHECK(slurp(c / "summary.json") == slurp(a / "summary.json"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST_CASE("output directory from the environment") {
  const fs::path d = scratch("env");
  setenv("SPIDER_OUTPUT_DIR", d.string().c_str(), 1);
  CHECK(call({"skew", "--paths", "50", "--skew-alpha", "0.3"}) == 0);
  unsetenv("SPIDER_OUTPUT_DIR");
  CHECK(fs::exists(d / "skew_paths.csv"));
  CHECK(slurp(d / "skew_paths.csv").rfind("path_id,t,y,l\n", 0) == 0);
  fs::remove_all(d);
}

TEST_CASE("compare-fk on the exact case and exit codes") {
  const fs::path d = scratch("fk");
  CHECK(call({"compare-fk", "--preset", "brownian-spider", "--terminal", "x-minus-l", "--paths", "2000", "--mx", "40",
              "--ml", "20", "--mt", "20", "--output", d.string()}) == 0);
  const auto r = read_json(d / "fk.json");
  CHECK(r["verdict"] == "pass");
  CHECK(std::abs(r["pde_value"].get<double>()) <= 1e-10);
  CHECK(r["mc_ci"].size() == 2);

  // Zero tolerance cannot be met by a Monte Carlo estimate.
  CHECK(call({"compare-fk", "--terminal", "x-minus-l", "--paths", "200", "--mx", "40", "--ml", "20", "--mt", "20",
              "--z", "0", "--range-fraction", "0", "--output", d.string()}) == 3);
  CHECK(read_json(d / "manifest.json")["exit_code"] == 3);

  // Coefficients that break down beyond the validated window: numerical failure.
  std::ofstream(d / "c.json") << R"({"preset": {"family": "affine-in-l", "sigma": [1, 1], "sigma_slope": [-0.1, 0],
    "l_cap": 20, "bounds": {"sigma_lower": 0.5}}, "grid": {"l_max": 15, "mx": 20, "ml": 30, "mt": 10}})";
  CHECK(call({"pde", "--config", (d / "c.json").string(), "--output", d.string()}) == 2);
  CHECK(call({"simulate", "--paths", "0", "--output", d.string()}) == 1);
  fs::remove_all(d);
}

TEST_CASE("kernel, pde and verify commands") {
  const fs::path d = scratch("misc");
  CHECK(call({"kernel", "--source-x", "0.5", "--ny", "4", "--nl", "3", "--output", d.string()}) == 0);
  const auto k = read_json(d / "kernel.json");
  CHECK(k["masses"]["atom"]["value"].get<double>() ==
        doctest::Approx(k["masses"]["atom_closed_form"].get<double>()).epsilon(1e-6));
  CHECK(fs::exists(d / "kernel_atom.csv"));
  CHECK(call({"pde", "--mx", "40", "--ml", "20", "--mt", "20", "--output", d.string()}) == 0);
  CHECK(read_json(d / "pde.json")["convergence"].contains("max_abs_difference_t0"));
  CHECK(call({"verify", "--paths", "2000", "--suites", "martingale,non-stickiness", "--n-freeze", "16", "--output",
              d.string()}) == 0);
  const auto v = read_json(d / "verify.json");
  CHECK(v["martingale"]["constant_exact_zero"] == true);
  CHECK(v["martingale"]["negative_control"]["detected"] == true);
  CHECK_FALSE(v.contains("self_convergence"));
  fs::remove_all(d);
}
