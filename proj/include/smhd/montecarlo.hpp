#pragma once

// Ensembles, limit studies and the configuration they run from.
//
// Path i of an ensemble uses the Brownian seed master_seed ^ i. Results are
// merged in path order, so reports do not depend on the worker count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smhd/diagnostics.hpp"
#include "smhd/stepper.hpp"

namespace smhd {

struct RunConfig {
  SimParams params;
  Domain domain;
  int n_per_axis = 4;
  double dt = 1e-3;
  double T = 0.5;
  int ensemble_size = 200;
  std::uint64_t master_seed = 1;
  NoiseConfig noise;
  InitialData init;
  StepperOptions stepper;
  double moment_theta = 0.1;
  /// Worker threads; 0 selects the hardware concurrency.
  int threads = 0;
  /// Geometric ladders; each level must excite modes the previous one lacks.
  std::vector<int> n_levels{2, 4, 8};
  std::vector<double> eps_levels{1e-2, 1e-3, 1e-4};
  std::vector<double> delta_levels{1e-2, 1e-3, 1e-4};
  std::string out_dir = ".";

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
  PathConfig path_config() const;
};

/// Applies one `key = value` setting. Throws ConfigError on unknown keys or
/// malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// UTF-8 lines `key = value`; `#` starts a comment.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
/// Keys accepted by apply_setting, with one-line descriptions.
std::vector<std::pair<std::string, std::string>> config_keys();

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t index);

/// Welford accumulator; used to cross-check the batch estimates.
class RunningStats {
 public:
  void add(double x);
  int count() const { return n_; }
  double mean() const { return mean_; }
  /// Standard error of the mean.
  double se() const;

 private:
  int n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Runs `count` paths on a worker pool; trajectories are returned in path order.
std::vector<Trajectory> run_paths(const PathConfig& cfg, std::uint64_t master_seed, int count,
                                  int threads, std::uint64_t first_index = 0);

struct NamedTest {
  std::string name;
  MartingaleTest test;
};

struct EnsembleReport {
  int paths = 0;
  int aborted = 0;
  std::vector<std::string> abort_causes;
  Estimate sup_energy;
  Estimate final_dissipation;
  Estimate final_energy;
  Estimate max_abs_residual;
  Estimate integrability;
  /// Fraction of complete paths with τ = T.
  double survival = 0.0;
  double max_mass_drift = 0.0;
  double min_density = 0.0;
  bool energy_terms_monotone = true;
  std::vector<NamedTest> martingale;
  /// False when more than 10% of the paths aborted.
  bool ok = true;

  std::string json() const;
};

/// The three fixed test directions of the martingale checks.
std::vector<std::pair<std::string, CoeffVec>> martingale_directions(const Basis& basis);

EnsembleReport summarize(const std::vector<Trajectory>& ensemble, const RunConfig& cfg);

struct EnsembleResult {
  EnsembleReport report;
  std::vector<Trajectory> trajectories;
};

/// Runs the ensemble, writes report.json and timeseries.csv (ensemble means)
/// to cfg.out_dir when `write` is set.
EnsembleResult run_ensemble(const RunConfig& cfg, bool write = true);

/// Ensemble means per time: t,mass,energy,u_h1,B_h1,divB,theta,stopped.
void write_mean_timeseries(const std::vector<Trajectory>& ensemble, const std::string& path);

enum class StudyKind { N, Eps, Delta };
std::string study_name(StudyKind k);

struct StudyRow {
  int n = 0;
  double eps = 0.0;
  double delta = 0.0;
  int paths = 0;
  Estimate sup_energy;
  Estimate dissipation;
  Estimate integrability;
  /// δ·sup_t ∫ρ^β.
  Estimate delta_rho_beta;
  /// Distances to the previous level (zero on the first row):
  /// sup_t H^{-1} distance of ρ and of ρu, and the L²(0,T;L²) distance of B.
  Estimate dist_rho;
  Estimate dist_m;
  Estimate dist_B;
  double max_mass_drift = 0.0;
};

struct StudyTable {
  StudyKind kind = StudyKind::N;
  std::vector<StudyRow> rows;

  /// Every distance column strictly decreasing from the second row on.
  bool distances_decreasing() const;
  /// δ·sup∫ρ^β decreasing along the rows.
  bool delta_bound_decreasing() const;
  bool pass() const;
  void write_csv(std::ostream& out, bool header = true) const;
};

/// Coupled-seed runs over cfg's schedule for `kind`. Uses cfg.ensemble_size paths.
StudyTable convergence_study(const RunConfig& cfg, StudyKind kind);

/// States are stored every `stride` steps for the distance computations.
inline constexpr int kStudyStride = 5;

}  // namespace smhd
