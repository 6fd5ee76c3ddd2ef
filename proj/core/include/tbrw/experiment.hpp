#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tbrw/engine.hpp"
#include "tbrw/laws.hpp"
#include "tbrw/observables.hpp"
#include "tbrw/sequences.hpp"
#include "tbrw/tree.hpp"

namespace tbrw {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigSchema = 1;

/// Initial tree shapes nameable from a config file.  Paths are rooted at one
/// end, stars at the center.
struct TreeSpec {
  enum class Shape { single_vertex, single_edge, path, star };
  Shape shape = Shape::single_edge;
  std::uint32_t n = 2;  // vertex count; ignored for the fixed shapes

  CompressedTree build() const;
};

/// A grid of root-visit windows: `per_anchor` windows with starts evenly
/// spaced in [anchor, 2*anchor).  Window length at start n is
///   mean_square: ceil(n^g_exponent * M_n^2), M_n the cumulative growth mean
///   power:       ceil(n^exponent)
struct WindowGrid {
  enum class LengthRule { mean_square, power };

  std::vector<std::uint64_t> anchors;
  std::uint32_t per_anchor = 20;
  LengthRule rule = LengthRule::mean_square;
  double g_exponent = 0.05;
  double exponent = 0.85;

  std::vector<WindowSpec> build(const LawSequence& law) const;
};

// --- per-experiment parameters ----------------------------------------------

struct DegreeDistParams {
  std::vector<std::uint64_t> checkpoints{1000, 10000, 100000};
  std::uint32_t degree_cap = 50;   // tail mass above the cap folded into one class
  std::uint32_t gate_d_max = 5;
  double per_degree_tol = 0.01;
  double tv_tol = 0.02;
  bool gated = true;
};

struct CrossvalParams {
  EngineMode alt_mode = ShortcutParams{};
  std::vector<std::uint64_t> checkpoints{500};
  std::uint32_t degree_cap = 50;
  std::uint32_t d_max = 5;
  double se_multiplier = 3.0;
};

/// Growth times only; no walker is simulated.
struct GrowthTimesParams {
  std::uint64_t k_max = 10000;
  std::uint64_t stride = 1;
  double delta = 0.1;   // statistic k^(2+delta) / tau_k^gamma
  double gamma = 0.8;
  std::uint64_t ratio_at = 10000;
  std::uint64_t ratio_vs = 100;
  double ratio_max = 1e-2;
  bool gated = true;
};

struct RedFractionParams {
  double delta = 0.1;
  std::uint64_t stride = 1000;
  std::vector<std::uint64_t> checkpoints{1000, 10000, 100000};
  double final_max = 0.05;
  bool require_nonincreasing = true;
  bool gated = true;
};

struct LeafFractionParams {
  std::vector<std::uint64_t> checkpoints{500, 1000, 1500, 2000};
  double final_min = 0.95;
  bool require_increasing = true;
  bool gated = true;
};

struct TransienceDemoParams {
  std::uint64_t stride = 1;
  std::uint64_t early_k = 10;
  double final_min = 5.0;
  bool gated = true;
};

struct WindowsParams {
  WindowGrid grid;
  double min_fraction = 0.95;
  bool gated = true;
};

struct OracleCheckParams {};

struct ConditionsParams {
  enum class Kind { recurrence, transience };
  Kind kind = Kind::transience;
  std::uint64_t horizon = 60;  // recurrence horizon n, or transience i_max
  std::optional<ProbSequence> p;
  std::optional<CountSequence> w;
  std::optional<CountSequence> a;
  double plateau_eps = 1e-3;
  std::uint64_t plateau_by = 40;
  bool gated = true;
};

using ExperimentParams =
    std::variant<DegreeDistParams, CrossvalParams, GrowthTimesParams, RedFractionParams,
                 LeafFractionParams, TransienceDemoParams, WindowsParams, OracleCheckParams,
                 ConditionsParams>;

struct ExperimentConfig {
  int schema = kConfigSchema;
  std::string experiment;
  std::optional<LawSequence> law;  // oracle-check and transience conditions run without one
  EngineMode mode = ExactParams{};
  TreeSpec initial_tree;
  std::uint64_t growth_budget = 0;  // horizon in growth events, or
  std::uint64_t step_budget = 0;    // horizon in steps (exact mode only)
  std::uint32_t replicas = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  ExperimentParams params;
};

/// Built-in experiment configurations; throws ArgumentError for unknown names.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

struct ExperimentResult {
  int exit_code = 0;  // 0 all gates pass, 1 gate or replica failure
  bool pass = true;
  std::map<std::string, bool> gates;
  std::map<std::string, double> stats;
  std::vector<std::string> replica_errors;  // indexed messages, empty on success
  std::string summary_json;                 // bytes written to summary.json
};

/// Runs `config.replicas` independent replicas (thread pool capped by
/// TBRW_THREADS), writes per-replica CSVs plus summary.json and meta.json
/// under config.out_dir, and evaluates the experiment's gates.  Outputs are
/// byte-identical for identical (config, seed) at any thread count; wall time
/// appears only in meta.json.  Configuration problems throw ArgumentError
/// before any replica runs; in-run failures are recorded per replica.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// One run_experiment per grid point under out_dir/point_<j>; points fail in
/// isolation.  `parameter` is "gamma" (law must be the power-law variant),
/// "seed", or "mode" ("exact" | "shortcut-rigorous" | "shortcut-fast" |
/// "lumped" values).
struct SweepPoint {
  std::string label;
  ExperimentResult result;
  std::string error;  // set when the point could not run at all
};

struct SweepResult {
  std::vector<SweepPoint> points;
  int exit_code = 0;
  std::string report_json;  // bytes written to sweep.json
};

SweepResult run_sweep(const ExperimentConfig& base, const std::string& parameter,
                      const std::vector<std::string>& values);

/// Replica worker count: min(jobs, TBRW_THREADS or hardware concurrency).
std::uint32_t thread_cap();

double median(std::vector<double> values);

}  // namespace tbrw
