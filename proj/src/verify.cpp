#include "spider/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "spider/quadrature.hpp"
#include "spider/rng.hpp"

namespace spider {

namespace {

constexpr int kMaxBranches = 64;

/// One left-endpoint increment of V^f.
struct VfStepper {
  const CoefficientSet* cs;
  const TestFunction* f;
  const VfOptions* opts;

  double increment(double t0, double x0, int i0, double l0, double t1, double x1, int i1, double l1, double ct,
                   double cl) const {
    double sg = 1.0, b = 0.0;
    if (!cs->brownian) {
      sg = cs->sigma(i0, ct, x0, cl);
      b = cs->drift(i0, ct, x0, cl);
    }
    const double dt = t1 - t0;
    const double gen = f->f_t(i0, t0, x0) + 0.5 * sg * sg * f->f_xx(i0, t0, x0) + b * f->f_x(i0, t0, x0);
    double inc = f->f(i1, t1, x1) - f->f(i0, t0, x0) - gen * dt;
    const double dl = l1 - l0;
    if (dl != 0.0) {
      const int nb = cs->branches();
      std::array<double, kMaxBranches> a{};
      const std::span<double> span(a.data(), static_cast<std::size_t>(nb));
      if (opts->alpha_override)
        opts->alpha_override(ct, cl, span);
      else
        cs->alpha(ct, cl, span);
      double flux = 0.0;
      for (int j = 1; j <= nb; ++j) flux += a[static_cast<std::size_t>(j - 1)] * f->f_x(j, t0, 0.0);
      inc -= flux * dl;
    }
    return inc;
  }
};

void check_branches(const CoefficientSet& cs) {
  if (cs.branches() > kMaxBranches) throw PreconditionError("verify: too many branches");
}

}  // namespace

Eigen::VectorXd vf_along_path(const SpiderPath& path, const CoefficientSet& cs, const TestFunction& f,
                              const VfOptions& opts) {
  check_branches(cs);
  if (opts.frozen) throw PreconditionError("vf_along_path: frozen arguments need the streaming functional");
  const Eigen::Index n = path.size();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  const VfStepper st{&cs, &f, &opts};
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double t0 = path.times(k), l0 = path.l(k);
    v(k + 1) = v(k) + st.increment(t0, path.x(k), path.branch(k), l0, path.times(k + 1), path.x(k + 1),
                                   path.branch(k + 1), path.l(k + 1), t0, l0);
  }
  return v;
}

VfTable vf_table(const PathEnsemble& ens, const CoefficientSet& cs, const std::vector<TestFunction>& fs,
                 const std::vector<double>& times, const VfOptions& opts) {
  const auto P = static_cast<Eigen::Index>(ens.paths());
  if (ens.x.rows() != P) throw PreconditionError("vf_table: ensemble has no stored paths");
  const auto T = static_cast<Eigen::Index>(times.size());
  std::vector<Eigen::Index> nodes;
  for (double t : times) nodes.push_back(ens.node_at(t));
  VfTable tab;
  tab.times = times;
  tab.valid = ens.valid;
  tab.x.resize(P, T);
  tab.l.resize(P, T);
  tab.branch.resize(P, T);
  for (const auto& f : fs) {
    tab.ids.push_back(f.id);
    tab.v.emplace_back(P, T);
  }
  for (Eigen::Index p = 0; p < P; ++p) {
    for (Eigen::Index c = 0; c < T; ++c) {
      tab.x(p, c) = ens.x(p, nodes[static_cast<std::size_t>(c)]);
      tab.l(p, c) = ens.l(p, nodes[static_cast<std::size_t>(c)]);
      tab.branch(p, c) = ens.branch(p, nodes[static_cast<std::size_t>(c)]);
    }
    if (!ens.valid[static_cast<std::size_t>(p)]) continue;
    const SpiderPath path = ens.path(static_cast<std::size_t>(p));
    for (std::size_t q = 0; q < fs.size(); ++q) {
      const Eigen::VectorXd v = vf_along_path(path, cs, fs[q], opts);
      for (Eigen::Index c = 0; c < T; ++c) tab.v[q](p, c) = v(nodes[static_cast<std::size_t>(c)]);
    }
  }
  return tab;
}

class VfFunctional::Observer final : public PathObserver {
 public:
  Observer(VfFunctional* owner, Eigen::Index row) : o_(owner), row_(row), v_(owner->fs_.size(), 0.0) {}

  void begin(const SpiderState& s) override {
    next_ = 0;
    std::fill(v_.begin(), v_.end(), 0.0);
    while (next_ < o_->steps_.size() && o_->steps_[next_] == 0) store(s.point.radial, s.point.branch, s.l);
  }

  void step(const StepRecord& s) override {
    const double ct = o_->opts_.frozen ? s.frozen_t : s.t;
    const double cl = o_->opts_.frozen ? s.frozen_l : s.l0;
    for (std::size_t q = 0; q < v_.size(); ++q) {
      const VfStepper st{o_->cs_, &o_->fs_[q], &o_->opts_};
      v_[q] += st.increment(s.t, s.x0, s.i0, s.l0, s.t + s.dt, s.x1, s.i1, s.l1, ct, cl);
    }
    const long done = s.index + 1;
    while (next_ < o_->steps_.size() && o_->steps_[next_] == done) store(s.x1, s.i1, s.l1);
  }

 private:
  void store(double x, int i, double l) {
    const auto c = static_cast<Eigen::Index>(next_);
    for (std::size_t q = 0; q < v_.size(); ++q) o_->v_[q](row_, c) = v_[q];
    o_->x_(row_, c) = x;
    o_->l_(row_, c) = l;
    o_->branch_(row_, c) = i;
    ++next_;
  }

  VfFunctional* o_;
  Eigen::Index row_;
  std::vector<double> v_;
  std::size_t next_ = 0;
};

VfFunctional::VfFunctional(const CoefficientSet& cs, std::vector<TestFunction> fs, std::vector<double> times,
                           const SpiderState& init, const SchemeConfig& cfg, VfOptions opts)
    : cs_(&cs), fs_(std::move(fs)), times_(std::move(times)), opts_(std::move(opts)) {
  check_branches(cs);
  cfg.validate();
  const double dt = cfg.dt();
  for (double t : times_) {
    const double r = (t - init.t) / dt;
    const long k = std::lround(r);
    if (std::abs(r - static_cast<double>(k)) > 1e-6 || k < 0 || k > cfg.total_steps()) {
      std::ostringstream os;
      os << "VfFunctional: time " << t << " is not on the fine grid";
      throw PreconditionError(os.str());
    }
    steps_.push_back(k);
  }
  if (!std::is_sorted(steps_.begin(), steps_.end()))
    throw PreconditionError("VfFunctional: times must be increasing");
}

void VfFunctional::prepare(std::size_t paths, Eigen::Index) {
  const auto P = static_cast<Eigen::Index>(paths);
  const auto T = static_cast<Eigen::Index>(times_.size());
  v_.assign(fs_.size(), Eigen::MatrixXd::Constant(P, T, std::nan("")));
  x_ = Eigen::MatrixXd::Constant(P, T, std::nan(""));
  l_ = Eigen::MatrixXd::Constant(P, T, std::nan(""));
  branch_ = Eigen::MatrixXi::Zero(P, T);
}

std::unique_ptr<PathObserver> VfFunctional::observer(std::size_t path) {
  return std::make_unique<Observer>(this, static_cast<Eigen::Index>(path));
}

VfTable VfFunctional::table(const std::vector<char>& valid) const {
  VfTable t;
  t.times = times_;
  for (const auto& f : fs_) t.ids.push_back(f.id);
  t.v = v_;
  t.x = x_;
  t.l = l_;
  t.branch = branch_;
  t.valid = valid;
  return t;
}

std::vector<Weight> default_weights() {
  return {{"1", [](double, int, double) { return 1.0; }},
          {"x(s)", [](double x, int, double) { return x; }},
          {"sin(l(s))", [](double, int, double l) { return std::sin(l); }}};
}

namespace {

Eigen::Index column_of(const VfTable& t, double s) {
  for (std::size_t c = 0; c < t.times.size(); ++c)
    if (std::abs(t.times[c] - s) <= 1e-12 * std::max(1.0, std::abs(s))) return static_cast<Eigen::Index>(c);
  std::ostringstream os;
  os << "martingale_test: time " << s << " not in the table";
  throw PreconditionError(os.str());
}

}  // namespace

MartingaleSummary martingale_test(const VfTable& table, const std::vector<std::pair<double, double>>& pairs,
                                  const std::vector<Weight>& weights, double z_level) {
  if (!(z_level > 0.0)) throw PreconditionError("martingale_test: z level must be > 0");
  MartingaleSummary sum;
  const Eigen::Index P = table.x.rows();
  for (std::size_t q = 0; q < table.v.size(); ++q) {
    MartingaleReport rep;
    rep.id = table.ids[q];
    rep.z_level = z_level;
    for (const auto& [s, u] : pairs) {
      if (!(s < u)) throw PreconditionError("martingale_test: need s < u");
      const Eigen::Index cs = column_of(table, s), cu = column_of(table, u);
      for (const auto& w : weights) {
        Eigen::VectorXd d(P);
        Eigen::Index n = 0;
        for (Eigen::Index p = 0; p < P; ++p) {
          if (!table.valid.empty() && !table.valid[static_cast<std::size_t>(p)]) continue;
          d(n++) = w.phi(table.x(p, cs), table.branch(p, cs), table.l(p, cs)) * (table.v[q](p, cu) - table.v[q](p, cs));
        }
        const Estimate e = mean_se(d.head(n));
        MartingaleEntry en;
        en.s = s;
        en.u = u;
        en.weight = w.name;
        en.mean = e.mean;
        en.se = e.se;
        en.z = e.se > 0.0 ? e.mean / e.se : (e.mean == 0.0 ? 0.0 : std::copysign(INFINITY, e.mean));
        en.pass = std::abs(en.z) <= z_level;
        rep.entries.push_back(en);
      }
    }
    sum.reports.push_back(std::move(rep));
  }
  for (const auto& r : sum.reports) sum.tests += r.entries.size();
  sum.family_alpha = 2.0 * (1.0 - normal_cdf(z_level));
  sum.bonferroni_z = sum.tests > 0 ? normal_quantile(1.0 - sum.family_alpha / (2.0 * static_cast<double>(sum.tests)))
                                   : z_level;
  sum.pass = true;
  for (auto& r : sum.reports) {
    r.pass = true;
    for (const auto& e : r.entries) {
      sum.max_abs_z = std::max(sum.max_abs_z, std::abs(e.z));
      if (!(std::abs(e.z) <= sum.bonferroni_z)) r.pass = false;
    }
    sum.pass = sum.pass && r.pass;
  }
  return sum;
}

class OccupationFunctional::Observer final : public PathObserver {
 public:
  Observer(OccupationFunctional* owner, Eigen::Index row) : o_(owner), row_(row) {}
  void step(const StepRecord& s) override {
    for (std::size_t e = 0; e < o_->eps_.size(); ++e)
      if (s.x0 < o_->eps_[e]) o_->occ_(row_, static_cast<Eigen::Index>(e)) += s.dt;
  }

 private:
  OccupationFunctional* o_;
  Eigen::Index row_;
};

OccupationFunctional::OccupationFunctional(std::vector<double> eps) : eps_(std::move(eps)) {
  for (double e : eps_)
    if (!(e > 0.0)) throw PreconditionError("occupation: eps must be > 0");
}

void OccupationFunctional::prepare(std::size_t paths, Eigen::Index) {
  occ_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(eps_.size()));
}

std::unique_ptr<PathObserver> OccupationFunctional::observer(std::size_t path) {
  return std::make_unique<Observer>(this, static_cast<Eigen::Index>(path));
}

double gaussian_occupation(double eps, double horizon, long steps) {
  if (!(eps > 0.0) || !(horizon > 0.0)) throw PreconditionError("gaussian_occupation: eps and horizon must be > 0");
  auto p = [eps](double t) { return t <= 0.0 ? 1.0 : 2.0 * normal_cdf(eps / std::sqrt(t)) - 1.0; };
  if (steps > 0) {
    const double dt = horizon / static_cast<double>(steps);
    double s = 0.0;
    for (long k = 0; k < steps; ++k) s += p(horizon * static_cast<double>(k) / static_cast<double>(steps));
    return s * dt;
  }
  // t = eps^2 w^2 keeps the integrand smooth near 0.
  auto g = [eps](double w) { return w == 0.0 ? 0.0 : (2.0 * normal_cdf(1.0 / w) - 1.0) * 2.0 * eps * eps * w; };
  return integrate(g, 0.0, std::sqrt(horizon) / eps, 1e-13, 1e-12).value;
}

NonStickinessCurve non_stickiness_curve(const Eigen::MatrixXd& occupation, const std::vector<double>& eps,
                                        double horizon, const std::vector<char>& valid) {
  if (static_cast<std::size_t>(occupation.cols()) != eps.size())
    throw PreconditionError("non_stickiness_curve: one column per eps");
  NonStickinessCurve c;
  c.eps = eps;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index p = 0; p < occupation.rows(); ++p)
    if (valid.empty() || valid[static_cast<std::size_t>(p)]) rows.push_back(p);
  for (std::size_t e = 0; e < eps.size(); ++e) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      v(static_cast<Eigen::Index>(r)) = occupation(rows[r], static_cast<Eigen::Index>(e));
    const Estimate est = mean_se(v);
    c.mean.push_back(est.mean);
    c.se.push_back(est.se);
    c.fitted.push_back(v.size() > 0 && v.minCoeff() < horizon * (1.0 - 1e-12));
  }
  double sxy = 0.0, sxx = 0.0, my = 0.0;
  int n = 0;
  for (std::size_t e = 0; e < eps.size(); ++e)
    if (c.fitted[e]) {
      sxy += eps[e] * c.mean[e];
      sxx += eps[e] * eps[e];
      my += c.mean[e];
      ++n;
      c.max_ratio = std::max(c.max_ratio, c.mean[e] / eps[e]);
    }
  if (n == 0) return c;
  c.slope = sxy / sxx;
  my /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t e = 0; e < eps.size(); ++e)
    if (c.fitted[e]) {
      ss_res += std::pow(c.mean[e] - c.slope * eps[e], 2);
      ss_tot += std::pow(c.mean[e] - my, 2);
    }
  c.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return c;
}

namespace {

double metric(const MarginalSample& p, const MarginalSample& q) {
  const double dj = p.branch == q.branch || p.x == 0.0 || q.x == 0.0 ? std::abs(p.x - q.x) : p.x + q.x;
  return dj + std::abs(p.l - q.l);
}

double mean_distance(const std::vector<MarginalSample>& a, const std::vector<MarginalSample>& b) {
  double s = 0.0;
  for (const auto& p : a) {
    double r = 0.0;
    for (const auto& q : b) r += metric(p, q);
    s += r;
  }
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace

double energy_distance(const std::vector<MarginalSample>& a, const std::vector<MarginalSample>& b) {
  if (a.empty() || b.empty()) throw PreconditionError("energy_distance: empty sample");
  return 2.0 * mean_distance(a, b) - mean_distance(a, a) - mean_distance(b, b);
}

std::vector<MarginalSample> terminal_samples(const PathEnsemble& ens) {
  std::vector<MarginalSample> out;
  const Eigen::Index last = ens.times.size() - 1;
  for (Eigen::Index p = 0; p < ens.x.rows(); ++p)
    if (ens.valid[static_cast<std::size_t>(p)]) out.push_back({ens.x(p, last), ens.branch(p, last), ens.l(p, last)});
  return out;
}

SelfConvergence self_convergence(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& base,
                                 int doublings, std::size_t paths) {
  if (doublings < 2) throw PreconditionError("self_convergence: need at least two doublings");
  if (base.n_fine % (1 << doublings) != 0)
    throw PreconditionError("self_convergence: n_fine must be divisible by 2^doublings");
  SelfConvergence out;
  std::vector<std::vector<MarginalSample>> levels;
  for (int k = 0; k <= doublings; ++k) {
    SchemeConfig cfg = base;
    cfg.n_freeze = base.n_freeze << k;
    cfg.n_fine = base.n_fine >> k;
    cfg.record_every = static_cast<int>(cfg.total_steps());
    out.n_freeze.push_back(cfg.n_freeze);
    levels.push_back(terminal_samples(simulate_ensemble(cs, init, cfg, paths)));
  }
  const int nb = cs.branches();
  for (int k = 0; k < doublings; ++k) {
    const auto& a = levels[static_cast<std::size_t>(k)];
    const auto& b = levels[static_cast<std::size_t>(k + 1)];
    out.distance.push_back(energy_distance(a, b));
    double gap = 0.0, gap_se = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (int j = 1; j <= nb; ++j) {
      Eigen::VectorXd d(static_cast<Eigen::Index>(n));
      for (std::size_t p = 0; p < n; ++p)
        d(static_cast<Eigen::Index>(p)) = (a[p].branch == j ? 1.0 : 0.0) - (b[p].branch == j ? 1.0 : 0.0);
      const Estimate e = mean_se(d);
      if (std::abs(e.mean) >= gap) {
        gap = std::abs(e.mean);
        gap_se = e.se;
      }
    }
    out.freq_gap.push_back(gap);
    out.freq_gap_se.push_back(gap_se);
  }
  SchemeConfig rep = base;
  rep.n_freeze = base.n_freeze << doublings;
  rep.n_fine = base.n_fine >> doublings;
  rep.record_every = static_cast<int>(rep.total_steps());
  rep.seed = mix64(base.seed + 1);
  out.noise_floor = energy_distance(levels.back(), terminal_samples(simulate_ensemble(cs, init, rep, paths)));
  out.monotone = true;
  for (std::size_t k = 1; k < out.distance.size(); ++k)
    if (out.distance[k] > out.distance[k - 1]) out.monotone = false;
  return out;
}

Estimate mean_se(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Estimate e;
  const Eigen::Index n = v.size();
  if (n == 0) return e;
  e.mean = v.mean();
  if (n < 2) return e;
  const double ss = (v.array() - e.mean).square().sum();
  e.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return e;
}

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)};
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw PreconditionError("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double f = cdf(a[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  const double en = std::sqrt(n);
  return {d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)};
}

}  // namespace spider
