// Frozen-coefficient concatenation scheme for the spider diffusion.
//
// Coefficients are frozen at the knots of a coarse grid (time and local
// time both taken at the knot); inside each coarse cell the radial part is
// advanced by Euler steps on a fine grid and reflected at the vertex with the
// incremental Skorokhod map. Leaving the vertex starts a new excursion whose
// branch is drawn from the frozen spinning measure.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spider/junction.hpp"

namespace spider {

/// Knots t_j = t0 + j T / n and eta(u) = largest knot <= u.
class FreezingGrid {
 public:
  FreezingGrid(double t0, double horizon, int cells);
  int cells() const { return cells_; }
  double knot(int j) const { return t0_ + horizon_ * j / cells_; }
  int cell(double u) const;
  double eta(double u) const { return knot(cell(u)); }

 private:
  double t0_, horizon_;
  int cells_;
};

enum class CrossingMode {
  /// Label redrawn when a fine-grid position is exactly 0 (once per run of zeros).
  kGridTouch,
  /// Grid touch plus a Brownian-bridge crossing test between positive
  /// endpoints; detected crossings relabel but add no local time.
  kBridgeCorrected,
  /// The bridge minimum of each Euler step is sampled and fed to the
  /// Skorokhod map, so local time also accrues on crossings inside a step.
  kBridgeLocalTime,
};

std::string to_string(CrossingMode m);
CrossingMode crossing_mode_from_string(const std::string& s);

struct SchemeConfig {
  int n_freeze = 64;
  int n_fine = 16;
  double horizon = 1.0;  // simulated span, starting at the initial time
  CrossingMode crossing = CrossingMode::kGridTouch;
  std::uint64_t seed = 1;
  int record_every = 1;  // store every k-th fine node (plus the last)
  int workers = 0;       // 0: SPIDER_WORKERS or hardware concurrency

  long total_steps() const { return static_cast<long>(n_freeze) * n_fine; }
  double dt() const { return horizon / static_cast<double>(total_steps()); }
  void validate() const;
};

/// One fine Euler step, as seen by path observers. Left-endpoint values are
/// the state before the step; frozen_t / frozen_l are the coarse knot values.
struct StepRecord {
  long index;
  double t, dt;
  double x0, l0;
  int i0;
  double x1, l1;
  int i1;
  double frozen_t, frozen_l;
};

/// Online functional evaluated along one path at fine resolution.
class PathObserver {
 public:
  virtual ~PathObserver() = default;
  virtual void begin(const SpiderState& /*start*/) {}
  virtual void step(const StepRecord& s) = 0;
  /// Called after a recorded node (including node 0).
  virtual void record(Eigen::Index /*node*/) {}
};

/// Factory of per-path observers writing into preallocated ensemble slots.
class EnsembleFunctional {
 public:
  virtual ~EnsembleFunctional() = default;
  virtual void prepare(std::size_t paths, Eigen::Index nodes) = 0;
  virtual std::unique_ptr<PathObserver> observer(std::size_t path) = 0;
};

SpiderPath simulate_path(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& cfg,
                         PathObserver* observer = nullptr);

/// Recorded time nodes of the scheme.
Eigen::VectorXd record_times(const SpiderState& init, const SchemeConfig& cfg);

struct PathFailure {
  std::size_t path;
  std::string message;
};

struct PathEnsemble {
  Eigen::VectorXd times;
  Eigen::MatrixXd x;      // paths x nodes
  Eigen::MatrixXd l;      // paths x nodes
  Eigen::MatrixXi branch; // paths x nodes
  std::vector<std::uint64_t> seeds;
  std::vector<PathFailure> failures;
  std::vector<char> valid;  // per path

  std::size_t paths() const { return seeds.size(); }
  SpiderPath path(std::size_t k) const;
  /// Index of the recorded node at time t; throws if t is off the grid.
  Eigen::Index node_at(double t) const;
};

/// Seed of path k of an ensemble; path k is simulate_path with this seed.
std::uint64_t path_seed(std::uint64_t seed, std::size_t k);

PathEnsemble simulate_ensemble(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& cfg,
                               std::size_t paths, std::span<EnsembleFunctional* const> functionals = {},
                               bool store_paths = true);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct MarginalSummary {
  double t = 0.0;
  std::size_t samples = 0;
  std::vector<Estimate> branch_frequency;  // index 0 is branch 1
  Estimate x, l, x2, l2;
  double var_x = 0.0, var_l = 0.0, cov_xl = 0.0;
};

MarginalSummary marginal_statistics(const PathEnsemble& ens, double t);

int resolve_workers(int requested);

}  // namespace spider
