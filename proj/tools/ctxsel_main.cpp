#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxsel/errors.hpp"
#include "ctxsel/experiment.hpp"
#include "ctxsel/rewards.hpp"
#include "ctxsel/synthenv.hpp"
#include "ctxsel/textio.hpp"

namespace {

using namespace ctxsel;

RunConfig load_run_config(const std::string& config_path, long long seed_override,
                          const std::string& out_override, long long jobs_override) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (jobs_override >= 1) cfg.jobs = static_cast<std::size_t>(jobs_override);
  cfg.validate();
  return cfg;
}

int cmd_run(const RunConfig& cfg, const std::string& resume) {
  const ExperimentResult result = run_experiment(cfg, resume);
  std::cout << "scenes committed: " << result.scenes.size() << "\n";
  for (const SceneOutcome& s : result.scenes) {
    std::cout << "scene " << s.scene << ": total " << format_double(s.reward.total)
              << " (content " << format_double(s.reward.content) << ", clip "
              << format_double(s.reward.clip) << ", artifact " << s.reward.artifact << ")\n";
  }
  if (result.cross_scene_sim_phi) {
    std::cout << "cross-scene sim (phi): " << format_double(*result.cross_scene_sim_phi) << "\n";
  }
  std::cout << "artifacts in " << cfg.output_dir << "\n";
  return 0;
}

int cmd_train(RunConfig cfg) {
  // Single-scene run: scene 0 from the environment, one trained scene.
  cfg.env.geometry.segments = std::min<std::size_t>(cfg.env.geometry.segments, 2);
  if (cfg.env.geometry.segments < 2) throw ConfigError("train needs at least two scenes");
  return cmd_run(cfg, "");
}

int cmd_eval(const std::string& embeddings_path) {
  const EmbeddingFile file = read_matrix_file(embeddings_path);
  if (file.clip_starts.empty()) {
    throw ConfigError("embeddings file has no clips line");
  }
  const SimMask mask = build_sim_mask(file.values.rows(), file.clip_starts);
  const double sim = cross_scene_sim(file.values, file.clip_starts);
  std::cout << "frames: " << file.values.rows() << "\n"
            << "clips: " << file.clip_starts.size() << "\n"
            << "valid pairs: " << mask.ones() << "\n"
            << "cross_scene_sim: " << format_double(sim) << "\n";
  return 0;
}

int cmd_gen_prompts(std::size_t count, std::size_t per_set, std::size_t embed_dim,
                    std::uint64_t seed, const std::string& out_path) {
  PromptSetSpec spec;
  spec.prompts_per_set = per_set;
  spec.embed_dim = embed_dim;
  Rng rng = Rng::derive(seed, 0xe95, 0, 0);
  const std::vector<EventPromptSet> sets = generate_eps(spec, count, rng);

  nlohmann::json root = nlohmann::json::array();
  for (const EventPromptSet& eps : sets) {
    nlohmann::json rec;
    rec["identity"] = eps.identity;
    rec["identity_name"] = human_pool()[eps.identity];
    rec["prompts"] = eps.prompts;
    nlohmann::json embeddings = nlohmann::json::array();
    for (const Matrix& m : eps.embeddings) {
      embeddings.push_back({{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}});
    }
    rec["embeddings"] = embeddings;
    root.push_back(rec);
  }
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot open " + out_path + " for writing");
  out << root.dump(2) << "\n";
  std::cout << "wrote " << sets.size() << " event prompt sets to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference-time context selection engine"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume, embeddings_path, metrics_path, plot_out;
  long long seed_override = -1, jobs_override = 0;
  std::size_t eps_count = 1000, eps_per_set = 4, eps_dim = 16;
  std::uint64_t eps_seed = 0;

  CLI::App* run = app.add_subcommand("run", "Run a full multi-scene experiment");
  run->add_option("--config", config_path, "Run config JSON");
  run->add_option("--seed", seed_override, "Override run seed");
  run->add_option("--out", out_dir, "Override output directory");
  run->add_option("--jobs", jobs_override, "Rollout worker threads");
  run->add_option("--resume", resume, "Continue from a checkpoint file");

  CLI::App* train = app.add_subcommand("train", "Train a single scene");
  train->add_option("--config", config_path, "Run config JSON");
  train->add_option("--seed", seed_override, "Override run seed");
  train->add_option("--out", out_dir, "Override output directory");
  train->add_option("--jobs", jobs_override, "Rollout worker threads");

  CLI::App* baselines = app.add_subcommand("baselines", "Sweep all selection strategies");
  baselines->add_option("--config", config_path, "Run config JSON");
  baselines->add_option("--seed", seed_override, "Override run seed");
  baselines->add_option("--out", out_dir, "Override output directory");
  baselines->add_option("--jobs", jobs_override, "Rollout worker threads");

  CLI::App* eval = app.add_subcommand("eval", "Cross-scene similarity over an embeddings file");
  eval->add_option("--embeddings", embeddings_path, "Embeddings file (F C header, clips line)")
      ->required();

  CLI::App* gen = app.add_subcommand("gen-prompts", "Generate event prompt sets");
  gen->add_option("--count", eps_count, "Number of sets");
  gen->add_option("--prompts-per-set", eps_per_set, "Prompts per set");
  gen->add_option("--dim", eps_dim, "Prompt embedding dim");
  gen->add_option("--seed", eps_seed, "Generation seed");
  gen->add_option("--out", plot_out, "Output JSON path")->required();

  CLI::App* plot = app.add_subcommand("plot-data", "Long-format CSV from a metrics file");
  plot->add_option("--metrics", metrics_path, "metrics.csv from a run")->required();
  plot->add_option("--out", plot_out, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(load_run_config(config_path, seed_override, out_dir, jobs_override), resume);
    }
    if (train->parsed()) {
      return cmd_train(load_run_config(config_path, seed_override, out_dir, jobs_override));
    }
    if (baselines->parsed()) {
      run_baseline_sweep(load_run_config(config_path, seed_override, out_dir, jobs_override));
      std::cout << "comparison table in " << (out_dir.empty() ? "out" : out_dir) << "\n";
      return 0;
    }
    if (eval->parsed()) return cmd_eval(embeddings_path);
    if (gen->parsed()) return cmd_gen_prompts(eps_count, eps_per_set, eps_dim, eps_seed, plot_out);
    if (plot->parsed()) {
      write_plot_data(metrics_path, plot_out);
      return 0;
    }
  } catch (const ctxsel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
