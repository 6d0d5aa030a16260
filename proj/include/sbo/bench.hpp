#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbo/baselines.hpp"
#include "sbo/problems.hpp"
#include "sbo/sbo.hpp"

namespace sbo::bench {

// A single benchmark experiment: one problem instance family, a set of
// algorithms, and R seeded replications.  Serializes to versioned JSON and
// round-trips losslessly.
struct ExperimentConfig {
  int version = 1;
  std::string family = "analytic";  // analytic | gp_sampled | bikeshare
  GPSampledSpec gp;                 // used when family == gp_sampled
  BikeShareConfig bikeshare;        // used when family == bikeshare
  std::vector<std::string> algorithms{"sbo", "kg", "ei"};
  SBOConfig run;  // run.seed is ignored; seeds derive from master_seed
  int replications = 1;
  std::string output_dir = "out";
  std::uint64_t master_seed = 0;
  int scoring_scenarios = 200;  // CRN scoring set size for oracle-less problems

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct MetricRow {
  std::string algorithm;
  int replication = 0;
  int iteration = 0;
  double g_value = 0.0;
  bool has_norm_diff = false;
  bool norm_diff_undefined = false;  // |g_kg| < 1e-12 sentinel
  double norm_diff = 0.0;
  double wall_ms = 0.0;
  std::string status = "ok";  // "ok" or "failed:<reason>"
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  std::string csv_path;
  std::vector<std::string> plot_paths;
  bool all_ok = true;
};

// (g_sbo - g_kg) / |g_kg|; NaN when |g_kg| < 1e-12 (undefined sentinel).
double compute_normalized_difference(double g_sbo, double g_kg);

// Runs R replications of every configured algorithm, writes metrics.csv and
// mean-curve plots into config.output_dir.  `parallelism` caps concurrent
// replications; rows are written in deterministic order regardless.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                int parallelism = 1);

// Renders the mean-curve plot (95% normal-approximation bands) for an
// existing metrics CSV.  Returns the written image paths.
std::vector<std::string> plot_metrics(const std::string& csv_path,
                                      const std::string& output_dir);

// Cartesian sweep over GP-sampled instance parameters.  Runs one experiment
// per (A_ratio, log_beta) cell, then writes sweep_summary.csv and a
// normalized-difference line plot into base.output_dir.
struct SweepResult {
  struct Cell {
    double A_ratio = 0.0;
    double log_beta = 0.0;
    double mean_norm_diff = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    int n = 0;  // replications with a defined normalized difference
    bool ok = true;
  };
  std::vector<Cell> cells;
  std::string summary_csv;
  std::string plot_path;
  bool all_ok = true;
};
SweepResult run_sweep(const ExperimentConfig& base,
                      const std::vector<double>& A_ratios,
                      const std::vector<double>& log_betas,
                      int parallelism = 1);

// CSV IO (schema: algorithm,replication,iteration,g_value,norm_diff,wall_ms,
// status; norm_diff empty when not applicable, "undefined" when |g_kg| is
// below the sentinel threshold).
void write_csv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_csv(const std::string& path);

// Instantiates the configured problem.  For gp_sampled the instance is drawn
// per replication (fresh h per run, as in the source experiments); other
// families are fixed across replications.
Problem make_problem(const ExperimentConfig& config, int replication);

}  // namespace sbo::bench
