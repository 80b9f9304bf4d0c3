#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace randcontrol {

// Resolved experiment configuration. validate_config fills defaults, range
// checks every field with a field-path message, and pins the config hash that
// every emitted CSV records.
struct ExperimentConfig {
  std::string mode = "campaign";  // brute | randomized | bsde | oracle | campaign
  std::string benchmark = "bangbang";
  double x0 = 0.5;
  int n_steps = 100;
  int n_paths = 100000;
  int bsde_paths = 0;  // 0 = benchmark default (capped for wide bases)
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::vector<int> penalty_schedule = {1, 2, 4, 8, 16, 32, 64};
  double stop_tol = 0.0;  // <= 0 selects 1e-3 * (1 + |Y0|)
  int basis_degree = 3;
  int basis_abs = -1;     // -1 benchmark default, else 0/1
  std::string family;     // intensity family; empty = benchmark default
  std::string estimator;  // reweighted | direct; empty = benchmark default
  double nu_min = 1e-6;   // admissible reweighting bounds for the family search
  double nu_max = 20.0;
  int budget = 25;  // optimizer field evaluations
  int fd_nx = 400;
  int brute_subdivisions = 20;
  int brute_inner = 400;

  std::string config_hash;  // 16 hex chars over the resolved fields
};

// Parses JSON text, applies defaults, rejects unknown keys and out-of-range
// values with messages naming the offending field.
ExperimentConfig validate_config(const std::string& raw_text);

// Shortest round-trip rendering used by every CSV cell so reruns are
// byte-identical and clean values print without trailing digit noise.
std::string format_full(double v);

// Writes comment line (seed, build id, config hash), header, then rows.
void write_csv(const std::string& path, const ExperimentConfig& cfg,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CampaignRow {
  std::string benchmark;
  double x0 = 0.0;
  std::string estimate;  // brute | randomized | bsde
  double value = 0.0;
  double se = 0.0;
  double oracle = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CampaignReport {
  std::vector<CampaignRow> rows;
  bool all_pass() const;
};

// Runs brute force, randomized optimization, constrained penalized solve, and
// the oracle on one benchmark with a shared seed; emits the per-stage CSVs and
// campaign.csv into cfg.out_dir.
CampaignReport run_campaign(const ExperimentConfig& cfg);

// Dispatches cfg.mode. Returns the process exit code: 0 pass, 1 campaign
// tolerance failure (ConfigError / NumericalError propagate to the caller).
int run_mode(const ExperimentConfig& cfg);

}  // namespace randcontrol
