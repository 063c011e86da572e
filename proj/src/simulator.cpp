#include "spider/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "spider/parallel.hpp"
#include "spider/rng.hpp"

namespace spider {

FreezingGrid::FreezingGrid(double t0, double horizon, int cells) : t0_(t0), horizon_(horizon), cells_(cells) {
  if (cells < 1) throw PreconditionError("FreezingGrid: need at least one cell");
  if (!(horizon >= 0.0)) throw PreconditionError("FreezingGrid: horizon must be >= 0");
}

int FreezingGrid::cell(double u) const {
  if (horizon_ == 0.0) return 0;
  const double r = (u - t0_) / horizon_ * cells_;
  int j = static_cast<int>(std::floor(r));
  // Knots computed as t0 + T j / n must map to themselves.
  if (j + 1 <= cells_ && knot(j + 1) <= u) ++j;
  if (j > 0 && knot(j) > u) --j;
  return std::clamp(j, 0, cells_);
}

std::string to_string(CrossingMode m) {
  switch (m) {
    case CrossingMode::kGridTouch: return "grid-touch";
    case CrossingMode::kBridgeCorrected: return "bridge-corrected";
    case CrossingMode::kBridgeLocalTime: return "bridge-local-time";
  }
  return "?";
}

CrossingMode crossing_mode_from_string(const std::string& s) {
  if (s == "grid-touch") return CrossingMode::kGridTouch;
  if (s == "bridge-corrected") return CrossingMode::kBridgeCorrected;
  if (s == "bridge-local-time") return CrossingMode::kBridgeLocalTime;
  throw PreconditionError("unknown crossing mode '" + s + "'");
}

void SchemeConfig::validate() const {
  if (n_freeze < 1) throw PreconditionError("SchemeConfig: n_freeze must be >= 1");
  if (n_fine < 1) throw PreconditionError("SchemeConfig: n_fine must be >= 1");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw PreconditionError("SchemeConfig: horizon must be >= 0");
  if (record_every < 1) throw PreconditionError("SchemeConfig: record_every must be >= 1");
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPIDER_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t path_seed(std::uint64_t seed, std::size_t k) { return mix64(seed ^ mix64(0x5350494445520000ull + k)); }

namespace {

Eigen::Index recorded_nodes(const SchemeConfig& cfg) {
  if (cfg.horizon == 0.0) return 1;
  const long k = cfg.total_steps();
  return static_cast<Eigen::Index>((k + cfg.record_every - 1) / cfg.record_every + 1);
}

bool is_recorded(long step_end, long total, int every) { return step_end % every == 0 || step_end == total; }

/// Advances one path; writes recorded nodes through `sink(node, t, x, i, l)`.
template <class Sink>
void run_path(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& cfg, std::uint64_t seed,
              PathObserver* obs, Sink&& sink) {
  const int nb = cs.branches();
  if (init.point.branch < 1 || init.point.branch > nb) throw PreconditionError("simulate_path: branch label out of range");
  if (!(init.l >= 0.0)) throw PreconditionError("simulate_path: local time must be >= 0");

  RandomStream rng(seed, 0);
  Eigen::VectorXd alpha(nb);
  const std::span<double> alpha_span(alpha.data(), static_cast<std::size_t>(nb));

  double x = init.point.radial, l = init.l;
  int branch = init.point.branch;
  const double t0 = init.t;

  bool in_zero_run = x <= kZeroTol;
  if (in_zero_run) {
    x = 0.0;
    cs.alpha(t0, l, alpha_span);
    branch = rng.categorical(alpha) + 1;
  }
  if (obs) obs->begin(SpiderState{t0, JunctionPoint(branch, x), l});
  Eigen::Index node = 0;
  sink(node, t0, x, branch, l);
  if (obs) obs->record(node);
  ++node;
  if (cfg.horizon == 0.0) return;

  const long total = cfg.total_steps();
  const double dt = cfg.dt();
  const double sqdt = std::sqrt(dt);
  const bool brownian = cs.brownian;
  long k = 0;
  for (int j = 0; j < cfg.n_freeze; ++j) {
    const double tj = t0 + cfg.horizon * j / cfg.n_freeze;
    const double lj = l;
    cs.alpha(tj, lj, alpha_span);
    for (int m = 0; m < cfg.n_fine; ++m, ++k) {
      double sg = 1.0, b = 0.0;
      if (!brownian) {
        sg = cs.sigma(branch, tj, x, lj);
        b = cs.drift(branch, tj, x, lj);
        if (!std::isfinite(sg) || !(sg > 0.0) || !std::isfinite(b)) {
          std::ostringstream os;
          os << "coefficient evaluation failed on branch " << branch << " at (t=" << tj << ", x=" << x
             << ", l=" << lj << "): sigma=" << sg << ", b=" << b;
          throw NumericalError(os.str());
        }
      }
      const double z = x + sg * sqdt * rng.normal() + b * dt;
      double x1 = z, dl = 0.0;
      bool relabel = false;
      switch (cfg.crossing) {
        case CrossingMode::kGridTouch:
        case CrossingMode::kBridgeCorrected: {
          if (z <= 0.0) {
            x1 = 0.0;
            dl = -z;
          } else {
            x1 = z;
          }
          if (cfg.crossing == CrossingMode::kBridgeCorrected) {
            const double u = rng.uniform();
            if (x > 0.0 && x1 > 0.0 && u < std::exp(-2.0 * x * x1 / (sg * sg * dt))) relabel = true;
          }
          const bool at_zero = x1 == 0.0;
          if (at_zero && !in_zero_run) relabel = true;
          in_zero_run = at_zero;
          break;
        }
        case CrossingMode::kBridgeLocalTime: {
          const double u = rng.uniform();
          const double d = z - x;
          const double low = 0.5 * (x + z - std::sqrt(d * d - 2.0 * sg * sg * dt * std::log(u)));
          if (low < 0.0) {
            dl = -low;
            x1 = z - low;
            relabel = true;
          } else {
            x1 = z;
          }
          break;
        }
      }
      const int b0 = branch;
      const double x0 = x, l0 = l;
      if (relabel) branch = rng.categorical(alpha) + 1;
      x = x1;
      l += dl;
      const double t_left = t0 + cfg.horizon * static_cast<double>(k) / static_cast<double>(total);
      if (obs) obs->step(StepRecord{k, t_left, dt, x0, l0, b0, x, l, branch, tj, lj});
      if (is_recorded(k + 1, total, cfg.record_every)) {
        const double t_right = t0 + cfg.horizon * static_cast<double>(k + 1) / static_cast<double>(total);
        sink(node, t_right, x, branch, l);
        if (obs) obs->record(node);
        ++node;
      }
    }
  }
}

}  // namespace

Eigen::VectorXd record_times(const SpiderState& init, const SchemeConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = recorded_nodes(cfg);
  Eigen::VectorXd times(n);
  times(0) = init.t;
  if (n == 1) return times;
  const long total = cfg.total_steps();
  Eigen::Index node = 1;
  for (long k = 1; k <= total; ++k)
    if (is_recorded(k, total, cfg.record_every))
      times(node++) = init.t + cfg.horizon * static_cast<double>(k) / static_cast<double>(total);
  return times;
}

SpiderPath simulate_path(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& cfg,
                         PathObserver* observer) {
  cfg.validate();
  const Eigen::Index n = recorded_nodes(cfg);
  SpiderPath p;
  p.times.resize(n);
  p.x.resize(n);
  p.branch.resize(n);
  p.l.resize(n);
  run_path(cs, init, cfg, cfg.seed, observer, [&](Eigen::Index k, double t, double x, int i, double l) {
    p.times(k) = t;
    p.x(k) = x;
    p.branch(k) = i;
    p.l(k) = l;
  });
  return p;
}

SpiderPath PathEnsemble::path(std::size_t k) const {
  const auto r = static_cast<Eigen::Index>(k);
  SpiderPath p;
  p.times = times;
  p.x = x.row(r).transpose();
  p.branch = branch.row(r).transpose();
  p.l = l.row(r).transpose();
  return p;
}

Eigen::Index PathEnsemble::node_at(double t) const {
  const double scale = std::max(1.0, std::fabs(times(times.size() - 1)));
  for (Eigen::Index k = 0; k < times.size(); ++k)
    if (std::fabs(times(k) - t) <= 1e-12 * scale) return k;
  std::ostringstream os;
  os << "time " << t << " is not a recorded node";
  throw PreconditionError(os.str());
}

PathEnsemble simulate_ensemble(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& cfg,
                               std::size_t paths, std::span<EnsembleFunctional* const> functionals,
                               bool store_paths) {
  if (paths < 1) throw PreconditionError("simulate_ensemble: need at least one path");
  cfg.validate();
  PathEnsemble ens;
  ens.times = record_times(init, cfg);
  const Eigen::Index nodes = ens.times.size();
  const auto rows = static_cast<Eigen::Index>(store_paths ? paths : 0);
  ens.x.resize(rows, nodes);
  ens.l.resize(rows, nodes);
  ens.branch.resize(rows, nodes);
  ens.seeds.resize(paths);
  ens.valid.assign(paths, 1);
  for (std::size_t k = 0; k < paths; ++k) ens.seeds[k] = path_seed(cfg.seed, k);
  for (auto* f : functionals) f->prepare(paths, nodes);

  std::vector<std::string> errors(paths);
  parallel_for(paths, resolve_workers(cfg.workers), [&](std::size_t k) {
    std::vector<std::unique_ptr<PathObserver>> owned;
    for (auto* f : functionals) owned.push_back(f->observer(k));
    struct Fanout final : PathObserver {
      std::vector<std::unique_ptr<PathObserver>>* obs;
      void begin(const SpiderState& s) override {
        for (auto& o : *obs) o->begin(s);
      }
      void step(const StepRecord& s) override {
        for (auto& o : *obs) o->step(s);
      }
      void record(Eigen::Index n) override {
        for (auto& o : *obs) o->record(n);
      }
    } fan;
    fan.obs = &owned;
    PathObserver* obs = owned.empty() ? nullptr : (owned.size() == 1 ? owned.front().get() : &fan);
    const auto r = static_cast<Eigen::Index>(k);
    try {
      run_path(cs, init, cfg, ens.seeds[k], obs, [&](Eigen::Index n, double, double x, int i, double l) {
        if (!store_paths) return;
        ens.x(r, n) = x;
        ens.branch(r, n) = i;
        ens.l(r, n) = l;
      });
    } catch (const NumericalError& e) {
      errors[k] = e.what();
      if (store_paths) {
        ens.x.row(r).setConstant(std::nan(""));
        ens.l.row(r).setConstant(std::nan(""));
        ens.branch.row(r).setZero();
      }
    }
  });
  for (std::size_t k = 0; k < paths; ++k)
    if (!errors[k].empty()) {
      ens.valid[k] = 0;
      ens.failures.push_back({k, errors[k]});
    }
  return ens;
}

MarginalSummary marginal_statistics(const PathEnsemble& ens, double t) {
  const Eigen::Index node = ens.node_at(t);
  MarginalSummary s;
  s.t = ens.times(node);
  int max_branch = 0;
  for (Eigen::Index r = 0; r < ens.x.rows(); ++r)
    if (ens.valid[static_cast<std::size_t>(r)]) max_branch = std::max(max_branch, ens.branch(r, node));
  std::vector<double> counts(static_cast<std::size_t>(max_branch), 0.0);
  double sx = 0, sl = 0, sxx = 0, sll = 0, sxl = 0, sx4 = 0, sl4 = 0;
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < ens.x.rows(); ++r) {
    if (!ens.valid[static_cast<std::size_t>(r)]) continue;
    const double x = ens.x(r, node), l = ens.l(r, node);
    ++n;
    counts[static_cast<std::size_t>(ens.branch(r, node) - 1)] += 1.0;
    sx += x;
    sl += l;
    sxx += x * x;
    sll += l * l;
    sxl += x * l;
    sx4 += x * x * x * x;
    sl4 += l * l * l * l;
  }
  s.samples = n;
  if (n == 0) return s;
  const double N = static_cast<double>(n);
  const double denom = n > 1 ? N - 1.0 : 1.0;
  for (double c : counts) {
    const double p = c / N;
    s.branch_frequency.push_back({p, std::sqrt(p * (1.0 - p) / N)});
  }
  const double mx = sx / N, ml = sl / N;
  s.var_x = (sxx - N * mx * mx) / denom;
  s.var_l = (sll - N * ml * ml) / denom;
  s.cov_xl = (sxl - N * mx * ml) / denom;
  s.x = {mx, std::sqrt(std::max(s.var_x, 0.0) / N)};
  s.l = {ml, std::sqrt(std::max(s.var_l, 0.0) / N)};
  const double mxx = sxx / N, mll = sll / N;
  s.x2 = {mxx, std::sqrt(std::max((sx4 - N * mxx * mxx) / denom, 0.0) / N)};
  s.l2 = {mll, std::sqrt(std::max((sl4 - N * mll * mll) / denom, 0.0) / N)};
  return s;
}

}  // namespace spider
