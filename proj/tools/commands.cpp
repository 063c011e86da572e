#include "commands.hpp"

#include <cmath>

#include "spider/kernels.hpp"
#include "spider/pde.hpp"
#include "spider/presets.hpp"
#include "spider/skew.hpp"
#include "spider/verify.hpp"

namespace spider::cli {

using nlohmann::json;

namespace {

constexpr int kExitNumerical = 2;
constexpr int kExitAcceptance = 3;

SchemeConfig scheme_from(const RunConfig& rc, double horizon) {
  const json& s = rc.config.at("scheme");
  SchemeConfig c;
  c.n_freeze = s.at("n_freeze").get<int>();
  c.n_fine = s.at("n_fine").get<int>();
  c.horizon = horizon;
  c.crossing = crossing_mode_from_string(s.at("crossing").get<std::string>());
  c.seed = rc.config.at("seed").get<std::uint64_t>();
  c.record_every = s.contains("record_every") ? s.at("record_every").get<int>() : 1;
  c.workers = rc.workers;
  c.validate();
  return c;
}

SpiderState start_from(const RunConfig& rc) {
  const json& s = rc.config.at("start");
  return {0.0, JunctionPoint(s.at("branch").get<int>(), s.at("x").get<double>()), s.at("l").get<double>()};
}

PdeGrid grid_from(const RunConfig& rc) {
  const json& g = rc.config.at("grid");
  PdeGrid grid;
  grid.horizon = g.at("horizon").get<double>();
  grid.x_max = g.at("x_max").get<double>();
  grid.l_max = g.at("l_max").get<double>();
  grid.mx = g.at("mx").get<int>();
  grid.ml = g.at("ml").get<int>();
  grid.mt = g.at("mt").get<int>();
  grid.validate();
  return grid;
}

json estimate_json(const Estimate& e) { return to_json(e); }

json marginal_json(const MarginalSummary& m) {
  json freq = json::array();
  for (const auto& f : m.branch_frequency) freq.push_back(estimate_json(f));
  return {{"t", m.t},       {"samples", m.samples}, {"branch_frequency", freq}, {"x", estimate_json(m.x)},
          {"l", estimate_json(m.l)}, {"x2", estimate_json(m.x2)}, {"l2", estimate_json(m.l2)},
          {"var_x", m.var_x}, {"var_l", m.var_l}, {"cov_xl", m.cov_xl}};
}

json failures_json(const PathEnsemble& ens) {
  json f = json::array();
  for (const auto& [path, message] : ens.failures) f.push_back({{"path", path}, {"message", message}});
  return f;
}

void require_valid(const CoefficientSet& cs, double horizon) {
  ValidationWindow w;
  w.t_max = horizon;
  const ValidationReport r = validate_coefficients(cs, 2000, 1, w);
  if (!r.ok()) {
    const auto& v = r.violations.front();
    throw PreconditionError("coefficients violate " + v.condition + " on branch " + std::to_string(v.branch) + ": " +
                            v.detail);
  }
}

std::vector<std::string> strings(const json& a) { return a.get<std::vector<std::string>>(); }

// ---------------------------------------------------------------------------

CommandResult simulate(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  const CoefficientSet cs = make_preset(rc.config.at("preset"));
  const SchemeConfig sc = scheme_from(rc, rc.config.at("scheme").at("horizon").get<double>());
  require_valid(cs, sc.horizon);
  const SpiderState init = start_from(rc);
  const auto paths = rc.config.at("paths").get<std::size_t>();
  const PathEnsemble ens = simulate_ensemble(cs, init, sc, paths);

  out.write("paths.csv", paths_table(ens));
  json summary = {{"config", rc.config},
                  {"seed", sc.seed},
                  {"path_seeds", ens.seeds},
                  {"runtime", {{"paths", paths}, {"total_steps", sc.total_steps()}, {"dt", sc.dt()},
                               {"recorded_nodes", ens.times.size()}, {"failed", ens.failures.size()}}},
                  {"failures", failures_json(ens)},
                  {"terminal", marginal_json(marginal_statistics(ens, ens.times(ens.times.size() - 1)))}};
  out.write("summary.json", summary);
  log << "simulate: " << paths << " paths, " << ens.failures.size() << " failed\n";
  return {ens.failures.empty() ? 0 : kExitNumerical, {{"failed_paths", ens.failures.size()}}};
}

TripleDensityVariant variant_from(const std::string& s) {
  if (s == "local-time-weighted") return TripleDensityVariant::kLocalTimeWeighted;
  if (s == "unweighted") return TripleDensityVariant::kUnweighted;
  throw PreconditionError("kernel.variant must be local-time-weighted or unweighted");
}

AlphaTimeConvention convention_from(const std::string& s) {
  if (s == "last-zero-time") return AlphaTimeConvention::kLastZero;
  if (s == "source-time") return AlphaTimeConvention::kSourceTime;
  throw PreconditionError("kernel.convention must be last-zero-time or source-time");
}

json mass_json(const KernelMass& m) { return {{"value", m.value}, {"error", m.error}}; }

CommandResult kernel(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  const json& k = rc.config.at("kernel");
  const CoefficientSet cs = make_preset(rc.config.at("preset"));
  KernelOptions opts;
  opts.variant = variant_from(k.at("variant").get<std::string>());
  opts.convention = convention_from(k.at("convention").get<std::string>());
  opts.inner_tol = k.at("inner_tol").get<double>();
  opts.entry_tol = k.at("entry_tol").get<double>();
  const double s = k.at("s").get<double>(), t = k.at("t").get<double>();
  const JunctionPoint source(k.at("source_branch").get<int>(), k.at("source_x").get<double>());
  const double l = k.at("source_l").get<double>();
  const int ny = k.at("ny").get<int>(), nl = k.at("nl").get<int>();
  const double y_max = k.at("y_max").get<double>(), ell_max = k.at("ell_max").get<double>();
  if (ny < 1 || nl < 1 || !(y_max > 0.0) || !(ell_max > 0.0))
    throw PreconditionError("kernel: ny, nl, y_max and ell_max must be positive");
  const SpiderKernel K = source.radial == 0.0 ? kernel_from_junction(cs, s, l, t, opts)
                                               : kernel_general(cs, s, source, l, t, opts);

  CsvTable density({"y", "j", "l", "density"});
  for (int j = 1; j <= K.branches(); ++j)
    for (int a = 1; a <= ny; ++a)
      for (int b = 0; b <= nl; ++b) {
        const double y = y_max * a / ny, ell = ell_max * b / nl;
        density.row({y, static_cast<long long>(j), ell, K.density(y, j, ell)});
      }
  out.write("kernel.csv", density);

  json meta = {{"config", rc.config},
               {"variant", to_string(opts.variant)},
               {"convention", to_string(opts.convention)},
               {"source", {{"s", s}, {"branch", source.branch}, {"x", source.radial}, {"l", l}}},
               {"t", t}};
  if (!K.from_vertex()) {
    CsvTable atom({"y", "j", "density"});
    for (int a = 1; a <= ny; ++a) {
      const double y = y_max * a / ny;
      atom.row({y, static_cast<long long>(source.branch), K.atom(y, source.branch)});
    }
    out.write("kernel_atom.csv", atom);
  }
  const KernelMass atom = K.atom_mass(source.branch);
  const BranchMarginal bm = branch_marginal(K);
  json branches = json::array();
  double budget = atom.error;
  for (int j = 1; j <= K.branches(); ++j) {
    const KernelMass c = K.continuous_mass(j, 0.0, K.truncation(), 0.0, K.truncation());
    budget += c.error;
    branches.push_back({{"branch", j}, {"continuous", mass_json(c)}, {"marginal", bm.mass(j - 1)},
                        {"marginal_error", bm.error(j - 1)}});
  }
  const KernelMass total = K.total_mass();
  meta["masses"] = {{"atom", mass_json(atom)},
                    {"atom_closed_form", K.from_vertex() ? 0.0 : std::erf(source.radial / std::sqrt(2.0 * (t - s)))},
                    {"branches", branches},
                    {"total", mass_json(total)}};
  meta["error_budget"] = {{"truncation_radius", K.truncation()},
                          {"inner_tol", opts.inner_tol},
                          {"entry_tol", opts.entry_tol},
                          {"mass_error", budget},
                          {"total_error", total.error}};
  out.write("kernel.json", meta);
  log << "kernel: total mass " << format_number(total.value) << " +- " << format_number(total.error) << "\n";
  return {0, {{"total_mass", total.value}}};
}

CsvTable slice_table(const PdeSolution& sol, std::initializer_list<int> levels) {
  CsvTable t({"t", "x", "branch", "l", "u"});
  for (int n : levels) {
    const auto& u = sol.level(n);
    for (int i = 1; i <= sol.branches; ++i)
      for (int m = 0; m <= sol.grid.mx; ++m)
        for (int k = 0; k <= sol.grid.ml; ++k)
          t.row({sol.grid.t(n), sol.grid.x(m), static_cast<long long>(i), sol.grid.l(k), u[static_cast<std::size_t>(i - 1)](m, k)});
  }
  return t;
}

CsvTable trace_table(const PdeSolution& sol) {
  CsvTable t({"t", "l", "u0"});
  for (int n = 0; n <= sol.grid.mt; ++n)
    for (int k = 0; k <= sol.grid.ml; ++k) t.row({sol.grid.t(n), sol.grid.l(k), sol.trace(n, k)});
  return t;
}

PdeOptions pde_options(const RunConfig& rc) {
  PdeOptions o;
  o.outer = outer_boundary_from_string(rc.config.at("grid").at("outer").get<std::string>());
  o.keep_history = false;
  o.workers = resolve_workers(rc.workers);
  return o;
}

CommandResult pde(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  const CoefficientSet cs = make_preset(rc.config.at("preset"));
  const PdeGrid grid = grid_from(rc);
  require_valid(cs, grid.horizon);
  const json& term = rc.config.at("terminal");
  const TerminalData g = make_terminal(term.at("name").get<std::string>(), cs, grid.horizon, term.at("c").get<double>());
  const PdeOptions opts = pde_options(rc);
  const PdeSolution sol = solve_backward(cs, g, grid, opts);

  out.write("pde_slices.csv", slice_table(sol, {0, grid.mt}));
  out.write("pde_trace.csv", trace_table(sol));

  json convergence = {{"grid", {{"mx", grid.mx}, {"ml", grid.ml}, {"mt", grid.mt}}}};
  if (grid.mx % 2 == 0 && grid.ml % 2 == 0 && grid.mt % 2 == 0) {
    PdeGrid coarse = grid;
    coarse.mx /= 2;
    coarse.ml /= 2;
    coarse.mt /= 2;
    const PdeSolution c = solve_backward(cs, g, coarse, opts);
    double diff = 0.0;
    for (int i = 0; i < sol.branches; ++i)
      for (int m = 0; m <= coarse.mx; ++m)
        for (int k = 0; k <= coarse.ml; ++k)
          diff = std::max(diff, std::abs(sol.level(0)[static_cast<std::size_t>(i)](2 * m, 2 * k) -
                                         c.level(0)[static_cast<std::size_t>(i)](m, k)));
    convergence["coarse_grid"] = {{"mx", coarse.mx}, {"ml", coarse.ml}, {"mt", coarse.mt}};
    convergence["max_abs_difference_t0"] = diff;
    convergence["vertex_value"] = {{"fine", sol.trace(0, 0)}, {"coarse", c.trace(0, 0)}};
  } else {
    convergence["note"] = "grid sizes are not all even; no coarse comparison";
  }
  json report = {{"config", rc.config},
                 {"terminal", g.name},
                 {"outer_boundary", to_string(opts.outer)},
                 {"compatibility_residual", sol.compatibility_residual},
                 {"max_peclet", sol.max_peclet},
                 {"warnings", sol.warnings},
                 {"vertex_value_t0_l0", sol.trace(0, 0)},
                 {"convergence", convergence}};
  out.write("pde.json", report);
  for (const auto& w : sol.warnings) log << "warning: " << w << "\n";
  log << "pde: u(0, vertex, 0) = " << format_number(sol.trace(0, 0)) << "\n";
  return {0, {{"vertex_value", sol.trace(0, 0)}}};
}

CommandResult skew(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  json p = rc.config.at("skew");
  const double y0 = p.at("y0").get<double>();
  p.erase("y0");
  const SkewCoefficients sk = make_skew_preset(p);
  const SchemeConfig sc = scheme_from(rc, rc.config.at("scheme").at("horizon").get<double>());
  const auto paths = rc.config.at("paths").get<std::size_t>();
  const SkewEnsemble e = simulate_skew_ensemble(sk, y0, sc, paths);
  out.write("skew_paths.csv", signed_paths_table(e.spider.times, e.y, e.spider.l, e.spider.valid));

  const Eigen::Index last = e.y.cols() - 1;
  std::vector<double> pos, y, y2;
  for (Eigen::Index r = 0; r < e.y.rows(); ++r) {
    if (!e.spider.valid[static_cast<std::size_t>(r)]) continue;
    pos.push_back(e.y(r, last) > 0.0 ? 1.0 : 0.0);
    y.push_back(e.y(r, last));
    y2.push_back(e.y(r, last) * e.y(r, last));
  }
  auto est = [](const std::vector<double>& v) {
    return v.empty() ? Estimate{} : mean_se(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  const CoefficientSet cs = to_spider(sk);
  const Estimate ppos = est(pos);
  json summary = {{"config", rc.config},
                  {"seed", sc.seed},
                  {"path_seeds", e.spider.seeds},
                  {"beta", beta(0.0, 0.0, sk)},
                  {"spider_alpha", to_json(cs.alpha(0.0, 0.0))},
                  {"runtime", {{"paths", paths}, {"total_steps", sc.total_steps()}, {"failed", e.spider.failures.size()}}},
                  {"failures", failures_json(e.spider)},
                  {"terminal", {{"t", e.spider.times(last)}, {"p_positive", estimate_json(ppos)},
                                {"y", estimate_json(est(y))}, {"y2", estimate_json(est(y2))}}}};
  out.write("skew_summary.json", summary);
  log << "skew: P(y_T > 0) = " << format_number(ppos.mean) << " +- " << format_number(ppos.se) << "\n";
  return {e.spider.failures.empty() ? 0 : kExitNumerical, {{"p_positive", ppos.mean}}};
}

TestFunction function_from(const std::string& name, int branches) {
  if (name == "x") return TestFunction::linear();
  if (name == "x2") return TestFunction::quadratic();
  if (name == "bump") {
    std::vector<double> w(static_cast<std::size_t>(branches));
    for (int i = 0; i < branches; ++i) w[static_cast<std::size_t>(i)] = (branches - 1 - 2.0 * i) / (branches - 1);
    return TestFunction::branch_bump(w);
  }
  if (name == "const") return TestFunction::constant(1.0);
  throw PreconditionError("verify.functions: unknown function '" + name + "' (x, x2, bump, const)");
}

json martingale_json(const MartingaleSummary& s) {
  json reports = json::array();
  for (const auto& r : s.reports) {
    double max_z = 0.0;
    for (const auto& e : r.entries) max_z = std::max(max_z, std::abs(e.z));
    reports.push_back({{"function", r.id}, {"entries", r.entries.size()}, {"max_abs_z", max_z}});
  }
  return {{"tests", s.tests},          {"family_alpha", s.family_alpha}, {"bonferroni_z", s.bonferroni_z},
          {"max_abs_z", s.max_abs_z}, {"pass", s.pass},                 {"reports", reports}};
}

void martingale_rows(CsvTable& t, const MartingaleSummary& s, const std::string& kind) {
  for (const auto& r : s.reports)
    for (const auto& e : r.entries) t.row({kind, r.id, e.s, e.u, e.weight, e.mean, e.se, e.z});
}

CommandResult verify(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  const json& v = rc.config.at("verify");
  const CoefficientSet cs = make_preset(rc.config.at("preset"));
  const double horizon = rc.config.at("scheme").at("horizon").get<double>();
  const SchemeConfig sc = scheme_from(rc, horizon);
  require_valid(cs, horizon);
  const SpiderState init = start_from(rc);
  const auto paths = rc.config.at("paths").get<std::size_t>();
  const double z = rc.config.at("tolerances").at("z").get<double>();
  const auto suites = strings(v.at("suites"));
  auto wants = [&](const char* s) { return std::find(suites.begin(), suites.end(), s) != suites.end(); };
  for (const auto& s : suites)
    if (s != "martingale" && s != "non-stickiness" && s != "self-convergence")
      throw PreconditionError("verify.suites: unknown suite '" + s + "'");

  const auto times = v.at("times").get<std::vector<double>>();
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t a = 0; a < times.size(); ++a)
    for (std::size_t b = a + 1; b < times.size(); ++b) pairs.push_back({times[a], times[b]});
  std::vector<TestFunction> fs = {TestFunction::constant(1.0)};
  for (const auto& name : strings(v.at("functions")))
    if (name != "const") fs.push_back(function_from(name, cs.branches()));
  const std::string control = v.at("negative_control").get<std::string>();
  if (control != "reverse" && control != "branch-1" && control != "none")
    throw PreconditionError("verify.negative_control must be reverse, branch-1 or none");
  VfOptions swapped;
  const int nb = cs.branches();
  if (control == "reverse") {
    swapped.alpha_override = [cs](double t, double l, std::span<double> a) {
      cs.alpha(t, l, a);
      std::reverse(a.begin(), a.end());
    };
  } else {
    swapped.alpha_override = [nb](double, double, std::span<double> a) {
      std::fill(a.begin(), a.end(), 0.0);
      a[0] = 1.0;
    };
  }
  std::vector<TestFunction> control_fs(fs.begin() + 1, fs.end());
  const auto eps = v.at("eps").get<std::vector<double>>();

  std::vector<std::unique_ptr<EnsembleFunctional>> owned;
  VfFunctional* good = nullptr;
  VfFunctional* bad = nullptr;
  OccupationFunctional* occ = nullptr;
  if (wants("martingale")) {
    if (pairs.empty()) throw PreconditionError("verify.times: need at least two times");
    owned.push_back(std::make_unique<VfFunctional>(cs, fs, times, init, sc));
    good = static_cast<VfFunctional*>(owned.back().get());
    if (control != "none" && !control_fs.empty()) {
      owned.push_back(std::make_unique<VfFunctional>(cs, control_fs, times, init, sc, swapped));
      bad = static_cast<VfFunctional*>(owned.back().get());
    }
  }
  if (wants("non-stickiness")) {
    owned.push_back(std::make_unique<OccupationFunctional>(eps));
    occ = static_cast<OccupationFunctional*>(owned.back().get());
  }
  std::vector<EnsembleFunctional*> list;
  for (auto& f : owned) list.push_back(f.get());
  SchemeConfig terminal = sc;
  terminal.record_every = static_cast<int>(sc.total_steps());
  const PathEnsemble ens = simulate_ensemble(cs, init, terminal, paths, list, false);

  json report = {{"config", rc.config}, {"seed", sc.seed}, {"failed_paths", ens.failures.size()}};
  bool pass = true;
  if (good) {
    VfTable table = good->table(ens.valid);
    bool exact = true;
    for (Eigen::Index r = 0; r < table.v.front().rows(); ++r)
      if (table.valid[static_cast<std::size_t>(r)]) exact = exact && table.v.front().row(r).isZero(0.0);
    table.v.erase(table.v.begin());
    table.ids.erase(table.ids.begin());
    const MartingaleSummary main = martingale_test(table, pairs, default_weights(), z);
    CsvTable rows({"kind", "function", "s", "u", "weight", "mean", "se", "z"});
    martingale_rows(rows, main, "model");
    json m = {{"model", martingale_json(main)}, {"constant_exact_zero", exact}};
    bool detected = true;
    if (bad) {
      const MartingaleSummary n = martingale_test(bad->table(ens.valid), pairs, default_weights(), z);
      detected = !n.pass;
      martingale_rows(rows, n, "negative-control");
      m["negative_control"] = {{"kind", control}, {"summary", martingale_json(n)}, {"detected", detected}};
    }
    m["pass"] = main.pass && exact && detected;
    pass = pass && m["pass"].get<bool>();
    report["martingale"] = m;
    out.write("martingale.csv", rows);
    log << "martingale: max |z| " << format_number(main.max_abs_z) << " vs " << format_number(main.bonferroni_z)
        << (m["pass"].get<bool>() ? " pass\n" : " FAIL\n");
  }
  if (occ) {
    const NonStickinessCurve c = non_stickiness_curve(occ->values(), eps, horizon, ens.valid);
    const bool oracle = cs.brownian && init.point.radial == 0.0;
    const long steps = sc.crossing == CrossingMode::kBridgeLocalTime ? sc.total_steps() : 0;
    CsvTable rows({"eps", "mean", "se", "oracle", "fitted"});
    bool within = true;
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const double o = oracle ? gaussian_occupation(eps[k], horizon, steps) : std::nan("");
      if (oracle) within = within && std::abs(c.mean[k] - o) <= z * c.se[k];
      rows.row({eps[k], c.mean[k], c.se[k], o, static_cast<long long>(c.fitted[k])});
    }
    const bool ok = c.r2 >= 0.99 && within;
    report["non_stickiness"] = {{"slope", c.slope}, {"r2", c.r2}, {"max_ratio", c.max_ratio},
                                {"oracle", oracle ? (steps ? "riemann-sum" : "integral") : "none"},
                                {"oracle_within_z", within}, {"pass", ok}};
    pass = pass && ok;
    out.write("occupation.csv", rows);
    log << "non-stickiness: slope " << format_number(c.slope) << ", r2 " << format_number(c.r2)
        << (ok ? " pass\n" : " FAIL\n");
  }
  if (wants("self-convergence")) {
    SchemeConfig base = sc;
    base.n_freeze = v.at("self_n_freeze").get<int>();
    const int doublings = v.at("self_doublings").get<int>();
    if (base.n_freeze < 1 || sc.total_steps() % base.n_freeze != 0)
      throw PreconditionError("verify.self_n_freeze must divide n_freeze * n_fine");
    base.n_fine = static_cast<int>(sc.total_steps() / base.n_freeze);
    const SelfConvergence s = self_convergence(cs, init, base, doublings, v.at("self_paths").get<std::size_t>());
    CsvTable rows({"n_freeze", "next_n_freeze", "distance", "freq_gap", "freq_gap_se"});
    for (std::size_t k = 0; k < s.distance.size(); ++k)
      rows.row({static_cast<long long>(s.n_freeze[k]), static_cast<long long>(s.n_freeze[k + 1]), s.distance[k],
                s.freq_gap[k], s.freq_gap_se[k]});
    const bool ok = s.distance.back() <= s.noise_floor;
    report["self_convergence"] = {{"noise_floor", s.noise_floor}, {"monotone", s.monotone},
                                  {"final_distance", s.distance.back()}, {"pass", ok}};
    pass = pass && ok;
    out.write("self_convergence.csv", rows);
    log << "self-convergence: final distance " << format_number(s.distance.back()) << " noise floor "
        << format_number(s.noise_floor) << (ok ? " pass\n" : " FAIL\n");
  }
  report["pass"] = pass;
  out.write("verify.json", report);
  const int code = !ens.failures.empty() ? kExitNumerical : pass ? 0 : kExitAcceptance;
  return {code, {{"pass", pass}}};
}

CommandResult compare_fk(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  const CoefficientSet cs = make_preset(rc.config.at("preset"));
  const PdeGrid grid = grid_from(rc);
  require_valid(cs, grid.horizon);
  const json& term = rc.config.at("terminal");
  const TerminalData g = make_terminal(term.at("name").get<std::string>(), cs, grid.horizon, term.at("c").get<double>());
  const PdeSolution sol = solve_backward(cs, g, grid, pde_options(rc));
  const SchemeConfig sc = scheme_from(rc, grid.horizon);
  const SpiderState init = start_from(rc);
  const json& tol = rc.config.at("tolerances");
  const double z = tol.at("z").get<double>();
  const FkReport r = feynman_kac_compare(sol, cs, g, init, sc, rc.config.at("paths").get<std::size_t>(), z,
                                         tol.at("range_fraction").get<double>());
  out.write("pde_trace.csv", trace_table(sol));
  json report = {{"config", rc.config},
                 {"seed", sc.seed},
                 {"terminal", g.name},
                 {"pde_value", r.pde},
                 {"mc_mean", r.mc},
                 {"mc_se", r.se},
                 {"mc_ci", {r.mc - z * r.se, r.mc + z * r.se}},
                 {"discrepancy", r.discrepancy},
                 {"g_range", r.g_range},
                 {"tolerance", r.tolerance},
                 {"paths", r.paths},
                 {"failed_paths", r.failed},
                 {"compatibility_residual", sol.compatibility_residual},
                 {"pde_warnings", sol.warnings},
                 {"verdict", r.pass ? "pass" : "fail"}};
  out.write("fk.json", report);
  log << "compare-fk: pde " << format_number(r.pde) << ", mc " << format_number(r.mc) << " +- "
      << format_number(r.se) << ", tolerance " << format_number(r.tolerance) << ": " << (r.pass ? "pass" : "FAIL")
      << "\n";
  const int code = r.failed ? kExitNumerical : r.pass ? 0 : kExitAcceptance;
  return {code, {{"verdict", r.pass ? "pass" : "fail"}}};
}

}  // namespace

CommandResult run_command(const RunConfig& rc, ArtifactSet& out, std::ostream& log) {
  if (rc.command == "simulate") return simulate(rc, out, log);
  if (rc.command == "kernel") return kernel(rc, out, log);
  if (rc.command == "pde") return pde(rc, out, log);
  if (rc.command == "skew") return skew(rc, out, log);
  if (rc.command == "verify") return verify(rc, out, log);
  return compare_fk(rc, out, log);
}

}  // namespace spider::cli
