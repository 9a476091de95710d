#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctxsel/baselines.hpp"
#include "ctxsel/checkpoint.hpp"
#include "ctxsel/config.hpp"
#include "ctxsel/grpo.hpp"
#include "ctxsel/synthenv.hpp"

namespace ctxsel {

struct SceneOutcome {
  std::size_t scene = 0;
  std::vector<std::size_t> selection;
  RewardBreakdown reward;
};

struct ExperimentResult {
  std::vector<SceneOutcome> scenes;       // scenes 1..N-1
  std::vector<IterationStats> trace;      // training rows (policy strategy only)
  std::optional<double> cross_scene_sim_phi;
  Matrix phi_embeddings;                  // one row per frame, all scenes
  std::vector<std::size_t> clip_starts;   // frame index where each scene begins
  PolicyParams policy;
  AdamWState optimizer;
};

// Runs the full pipeline: scene 0 from the environment, scenes 1..N-1 via
// per-scene GRPO training (or a rule-based baseline), then writes metrics,
// segments, embeddings, summary and checkpoints under config.output_dir.
// Wall-clock goes to timings.csv; every other artifact is a pure function of
// (config, seed). resume_path continues a run from a saved checkpoint.
ExperimentResult run_experiment(const RunConfig& config, const std::string& resume_path = "");

// Evaluates every rule-based strategy plus the learned policy under one
// shared seed, each into its own subdirectory, and writes a comparison CSV.
void run_baseline_sweep(const RunConfig& config);

// Converts a metrics.csv into long-format (scene, iteration, series, value)
// rows for external plotting.
void write_plot_data(const std::string& metrics_path, const std::string& out_path);

}  // namespace ctxsel
