#include "ctxsel/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctxsel/errors.hpp"
#include "ctxsel/textio.hpp"

namespace ctxsel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kPolicyInitChannel = 0xfffffffdull;

std::string metrics_header() {
  return "scene,iteration,reward_mean,reward_max,reward_min,content_mean,clip_mean,"
         "artifact_mean,advantage_std,oracle_overlap";
}

void append_metrics_row(std::ofstream& out, const IterationStats& row) {
  out << row.scene << "," << row.iteration << "," << format_double(row.reward_mean) << ","
      << format_double(row.reward_max) << "," << format_double(row.reward_min) << ","
      << format_double(row.content_mean) << "," << format_double(row.clip_mean) << ","
      << format_double(row.artifact_mean) << "," << format_double(row.advantage_std) << ","
      << row.oracle_overlap << "\n";
}

RewardBreakdown score_committed(const SegmentState& seg, const GenerationState& prev,
                                const PromptEmbedding& prompt, const RewardSuite& suite) {
  RewardBreakdown r;
  r.artifact = reward_artifact(seg, suite.detector);
  r.content = reward_content(seg, prev, suite.phi, suite.config.content_keyframes);
  r.clip = reward_clip(prompt, seg, suite.psi, suite.config.clip_frames);
  r.total = r.content + r.clip + static_cast<double>(r.artifact);
  return r;
}

Matrix flatten_frames(const GenerationState& state) {
  const Geometry& geo = state.geometry();
  const std::size_t per_frame = geo.tokens_per_frame() * geo.dim;
  std::size_t total_frames = 0;
  for (const SegmentState& seg : state.segments()) total_frames += seg.frames;
  Matrix out(total_frames, per_frame);
  std::size_t row = 0;
  for (const SegmentState& seg : state.segments()) {
    for (std::size_t f = 0; f < seg.frames; ++f) {
      const Matrix frame = seg.frame_tokens(f);
      Vector flat(per_frame);
      std::copy(frame.storage().begin(), frame.storage().end(), flat.begin());
      out.set_row(row++, flat);
    }
  }
  return out;
}

Matrix phi_frame_embeddings(const GenerationState& state, const EmbeddingProvider& phi) {
  std::size_t total_frames = 0;
  for (const SegmentState& seg : state.segments()) total_frames += seg.frames;
  Matrix out(total_frames, phi.out_dim);
  std::size_t row = 0;
  for (const SegmentState& seg : state.segments()) {
    for (std::size_t f = 0; f < seg.frames; ++f) out.set_row(row++, phi(seg.frame_tokens(f)));
  }
  return out;
}

std::vector<std::size_t> scene_clip_starts(const GenerationState& state) {
  std::vector<std::size_t> starts;
  std::size_t frame = 0;
  for (const SegmentState& seg : state.segments()) {
    starts.push_back(frame);
    frame += seg.frames;
  }
  return starts;
}

void write_summary(const std::string& path, const RunConfig& cfg, const ExperimentResult& result,
                   const GenerationState& state) {
  json scenes = json::array();
  for (const SceneOutcome& s : result.scenes) {
    scenes.push_back({{"scene", s.scene},
                      {"selection", s.selection},
                      {"content", s.reward.content},
                      {"clip", s.reward.clip},
                      {"artifact", s.reward.artifact},
                      {"total", s.reward.total}});
  }
  json root = {{"strategy", strategy_name(cfg.strategy)},
               {"seed", cfg.seed},
               {"budget", cfg.budget_k},
               {"history_tokens", state.history_tokens()},
               {"scenes", scenes}};
  if (result.cross_scene_sim_phi) {
    root["cross_scene_sim_phi"] = *result.cross_scene_sim_phi;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << root.dump(2) << "\n";
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg, const std::string& resume_path) {
  cfg.validate();
  const SynthEnv env = SynthEnv::build(cfg.env);
  const RewardSuite suite = env.reward_suite(cfg.rewards);
  const std::size_t scenes = cfg.env.geometry.segments;

  fs::create_directories(cfg.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
  };

  ExperimentResult result;
  GenerationState state;
  std::size_t start_scene = 1;

  if (!resume_path.empty()) {
    Checkpoint ck = load_checkpoint(resume_path);
    if (ck.policy.config.dim != cfg.policy.dim) {
      throw MigrationError("checkpoint policy dim does not match config");
    }
    result.policy = std::move(ck.policy);
    result.optimizer = std::move(ck.optimizer);
    start_scene = ck.scenes_done;
    state = restore_state(ck, cfg.env.geometry, cfg.env.schedule.steps());
  } else {
    Rng init_rng = Rng::derive(cfg.seed, kPolicyInitChannel, 0, 0);
    result.policy = init_params(cfg.policy, init_rng);
    result.optimizer = AdamWState::like(std::as_const(result.policy).tensors());
    state = env.initial_state();
  }

  std::ofstream metrics(out_path("metrics.csv"));
  std::ofstream timings(out_path("timings.csv"));
  if (!metrics || !timings) throw ConfigError("cannot open metrics outputs");
  metrics << metrics_header() << "\n";
  timings << "scene,iteration,wall_ms\n";

  for (std::size_t scene = start_scene; scene < scenes; ++scene) {
    const PromptEmbedding prompt = env.prompt(scene);
    SceneOutcome outcome;
    outcome.scene = scene;

    if (cfg.strategy == Strategy::policy) {
      if (cfg.reset_policy_per_scene) {
        Rng init_rng = Rng::derive(cfg.seed, kPolicyInitChannel, scene, 0);
        result.policy = init_params(cfg.policy, init_rng);
        result.optimizer = AdamWState::like(std::as_const(result.policy).tensors());
      }
      std::optional<std::vector<std::size_t>> oracle;
      if (state.history_tokens() <= 12 && cfg.budget_k <= 4) {
        oracle = oracle_best_selection(env, state, prompt, cfg.budget_k, cfg.rewards).first;
      }

      TrainSceneConfig tcfg;
      tcfg.grpo = cfg.grpo;
      tcfg.budget_k = cfg.budget_k;
      tcfg.schedule = cfg.env.schedule;
      tcfg.base_seed = cfg.seed;
      tcfg.scene_index = scene;
      tcfg.jobs = cfg.jobs;
      TrainSceneResult tr = train_scene(state, prompt, scene, result.policy, result.optimizer,
                                        env.generator(), suite, tcfg, oracle);
      for (const IterationStats& row : tr.trace) {
        append_metrics_row(metrics, row);
        timings << row.scene << "," << row.iteration << "," << format_double(row.wall_ms) << "\n";
        result.trace.push_back(row);
      }
      outcome.selection = tr.greedy.indices;
      outcome.reward = tr.committed_reward;
    } else {
      Rng select_rng = Rng::derive(cfg.seed, scene, kSelectChannel, 0);
      const std::size_t k = std::min(cfg.budget_k, state.history_tokens());
      WindowParams window{cfg.global_frames, cfg.local_frames};
      const RankingSelection sel = baseline_select(cfg.strategy, state, k, select_rng, window);

      Rng commit_rng = Rng::derive(cfg.seed, scene, kCommitChannel, 0);
      SegmentState seg =
          denoise_segment(state, sel, prompt, cfg.env.schedule, env.generator(), commit_rng);
      seg.prompt_id = scene;
      outcome.reward = score_committed(seg, state, prompt, suite);
      outcome.selection = sel.indices;
      state.append(std::move(seg));

      IterationStats row;
      row.scene = scene;
      row.iteration = 0;
      row.reward_mean = row.reward_max = row.reward_min = outcome.reward.total;
      row.content_mean = outcome.reward.content;
      row.clip_mean = outcome.reward.clip;
      row.artifact_mean = static_cast<double>(outcome.reward.artifact);
      row.advantage_std = 0.0;
      append_metrics_row(metrics, row);
      timings << row.scene << "," << row.iteration << ",0\n";
    }
    result.scenes.push_back(outcome);

    Checkpoint ck;
    ck.policy = result.policy;
    ck.optimizer = result.optimizer;
    ck.scenes_done = scene + 1;
    ck.segments = state.segments();
    save_checkpoint(ck, out_path("checkpoint_scene" + std::to_string(scene) + ".bin"));
  }

  // Final artifacts.
  result.clip_starts = scene_clip_starts(state);
  result.phi_embeddings = phi_frame_embeddings(state, env.phi());
  if (state.segments().size() >= 2) {
    result.cross_scene_sim_phi = cross_scene_sim(result.phi_embeddings, result.clip_starts);
  }

  write_matrix_file(out_path("segments.txt"), flatten_frames(state), result.clip_starts);
  write_matrix_file(out_path("phi_embeddings.txt"), result.phi_embeddings, result.clip_starts);
  write_summary(out_path("summary.json"), cfg, result, state);
  write_config(cfg, out_path("config_echo.json"));

  Checkpoint final_ck;
  final_ck.policy = result.policy;
  final_ck.optimizer = result.optimizer;
  final_ck.scenes_done = state.segments().size();
  final_ck.segments = state.segments();
  save_checkpoint(final_ck, out_path("checkpoint.bin"));

  return result;
}

void run_baseline_sweep(const RunConfig& cfg) {
  static const Strategy kAll[] = {
      Strategy::policy,          Strategy::vanilla,      Strategy::random_per_token,
      Strategy::random_per_frame, Strategy::sliding_window, Strategy::global_local,
      Strategy::random_global_local,
  };
  fs::create_directories(cfg.output_dir);
  std::ofstream table((fs::path(cfg.output_dir) / "comparison.csv").string());
  if (!table) throw ConfigError("cannot open comparison.csv");
  table << "strategy,scene,content,clip,artifact,total,cross_scene_sim_phi\n";

  for (Strategy s : kAll) {
    RunConfig sub = cfg;
    sub.strategy = s;
    sub.output_dir = (fs::path(cfg.output_dir) / strategy_name(s)).string();
    const ExperimentResult r = run_experiment(sub);
    for (const SceneOutcome& sc : r.scenes) {
      table << strategy_name(s) << "," << sc.scene << "," << format_double(sc.reward.content)
            << "," << format_double(sc.reward.clip) << "," << sc.reward.artifact << ","
            << format_double(sc.reward.total) << ",";
      if (r.cross_scene_sim_phi) table << format_double(*r.cross_scene_sim_phi);
      table << "\n";
    }
  }
}

void write_plot_data(const std::string& metrics_path, const std::string& out_path) {
  std::ifstream in(metrics_path);
  if (!in) throw ConfigError("cannot open " + metrics_path);
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot open " + out_path + " for writing");

  std::string header;
  if (!std::getline(in, header)) throw ConfigError("empty metrics file");
  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
  }
  if (columns.size() < 3 || columns[0] != "scene" || columns[1] != "iteration") {
    throw ConfigError("unrecognized metrics header");
  }

  out << "scene,iteration,series,value\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns.size()) throw ConfigError("ragged metrics row");
    for (std::size_t c = 2; c < cells.size(); ++c) {
      out << cells[0] << "," << cells[1] << "," << columns[c] << "," << cells[c] << "\n";
    }
  }
}

}  // namespace ctxsel
