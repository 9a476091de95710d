// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctxsel/baselines.hpp"
#include "ctxsel/checkpoint.hpp"
#include "ctxsel/config.hpp"
#include "ctxsel/experiment.hpp"
#include "ctxsel/grpo.hpp"
#include "ctxsel/synthenv.hpp"
#include "ctxsel/textio.hpp"

using namespace ctxsel;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<std::string()> run;  // returns "" on pass, reason on failure
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<unreadable:" + path.string() + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ctxsel_acceptance_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Canonical acceptance setup: eight scene-0 tokens (three subject, three
// background, two distractor), selection budget three, group size ten.
EnvConfig canonical_env() {
  EnvConfig cfg;
  cfg.seed = 7;
  return cfg;
}

RunConfig canonical_run(const std::string& out_tag, std::uint64_t seed, std::size_t iterations) {
  RunConfig cfg;
  cfg.env = canonical_env();
  cfg.grpo.iterations = iterations;
  cfg.budget_k = 3;
  cfg.seed = seed;
  cfg.output_dir = work_dir(out_tag).string();
  return cfg;
}

GenerationState flat_state(std::size_t tokens, std::uint64_t seed) {
  Geometry geo{tokens, 1, 1, 4, 16};
  GenerationState state(geo, 3);
  Rng rng(seed);
  SegmentState seg;
  seg.segment_index = 0;
  seg.frames = tokens;
  seg.tokens_per_frame = 1;
  seg.tokens = Matrix(tokens, 16);
  for (double& x : seg.tokens.storage()) x = rng.normal();
  for (int t = 0; t < 3; ++t) {
    Matrix layer = seg.tokens;
    for (double& x : layer.storage()) x += 0.2 * static_cast<double>(t) * rng.normal();
    seg.timestep_states.push_back(std::move(layer));
  }
  state.append(seg);
  return state;
}

std::string check(bool ok, const std::string& reason) { return ok ? "" : reason; }

// ---- criteria ----

std::string criterion_pl_sampler() {
  const ScoreVector scores = {1.0, 0.0, -1.0, 0.0};
  const auto exact = enumerate_pl_distribution(scores, 2);
  std::map<std::vector<std::size_t>, std::size_t> counts;
  Rng rng(20250807);
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) ++counts[sample_topk(scores, 2, rng).indices];

  double tv = 0.0;
  for (const auto& [tuple, p] : exact) {
    const auto it = counts.find(tuple);
    const double freq = it == counts.end() ? 0.0 : static_cast<double>(it->second) / draws;
    tv += std::abs(freq - p);
  }
  tv *= 0.5;
  return check(tv < 0.01, "total variation " + format_double(tv) + " >= 0.01");
}

std::string criterion_likelihood_gradients() {
  // hand-computed fixtures, 1e-10
  struct Fixture {
    ScoreVector scores;
    std::vector<std::size_t> sel;
    double expected;
  };
  const Fixture fixtures[] = {
      {{0.0, 0.0}, {0}, std::log(0.5)},
      {{1.5, 1.5, 1.5}, {2, 0}, std::log(1.0 / 6.0)},
      {{1.0, 0.0, 0.0}, {0, 1}, (1.0 - std::log(std::exp(1.0) + 2.0)) - std::log(2.0)},
  };
  for (const Fixture& f : fixtures) {
    const double got = pl_logprob(f.scores, f.sel);
    if (std::abs(got - f.expected) > 1e-10) {
      return "pl_logprob fixture off by " + format_double(std::abs(got - f.expected));
    }
  }

  // analytic score gradient vs central differences
  Rng rng(31);
  ScoreVector scores(6);
  for (double& s : scores) s = 2.0 * rng.uniform() - 1.0;
  RankingSelection sel = sample_topk(scores, 3, rng);
  const ScoreVector grad = pl_logprob_grad(scores, sel.indices);
  double worst = 0.0;
  const double step = 1e-6;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ScoreVector up = scores, down = scores;
    up[i] += step;
    down[i] -= step;
    const double fd = (pl_logprob(up, sel.indices) - pl_logprob(down, sel.indices)) / (2 * step);
    worst = std::max(worst,
                     std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-10}));
  }
  if (worst >= 1e-3) return "score gradient rel err " + format_double(worst);

  // end-to-end parameter gradient of log pi on a dim-8, L=6, K=3 instance
  PolicyConfig pc;
  pc.dim = 8;
  Rng prng(32);
  PolicyParams policy = init_params(pc, prng);
  for (double& x : policy.linear_w.back().storage()) x = 0.3 * prng.normal();
  Matrix history(6, 8);
  for (double& x : history.storage()) x = prng.normal();
  PromptEmbedding prompt{[&] {
    Matrix m(3, 8);
    for (double& x : m.storage()) x = prng.normal();
    return m;
  }()};

  const ScoreVector s0 = score_context(policy, history, prompt);
  const RankingSelection psel = sample_topk(s0, 3, prng);
  const PolicyGrads grads =
      score_context_backward(policy, history, prompt, pl_logprob_grad(s0, psel.indices));

  std::vector<Matrix*> tensors = policy.tensors();
  double worst_param = 0.0;
  const double h = 1e-5;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
      double& cell = tensors[t]->storage()[i];
      const double saved = cell;
      cell = saved + h;
      const double up = pl_logprob(score_context(policy, history, prompt), psel.indices);
      cell = saved - h;
      const double down = pl_logprob(score_context(policy, history, prompt), psel.indices);
      cell = saved;
      const double fd = (up - down) / (2 * h);
      const double an = grads[t].storage()[i];
      worst_param =
          std::max(worst_param, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-7}));
    }
  }
  return check(worst_param < 1e-3,
               "end-to-end gradient rel err " + format_double(worst_param));
}

std::string criterion_full_context_equivalence() {
  const GenWeights w = GenWeights::seeded(8, 16, 3);
  const ToyGenerator gen(w);
  const NoiseSchedule sched = NoiseSchedule::default3();
  Rng prng(44);
  Matrix ptokens(2, 16);
  for (double& x : ptokens.storage()) x = prng.normal();
  const PromptEmbedding prompt(ptokens);

  for (std::size_t l : {4ul, 16ul, 64ul}) {
    const GenerationState state = flat_state(l, 100 + l);
    RankingSelection all;
    all.total_candidates = l;
    for (std::size_t i = 0; i < l; ++i) all.indices.push_back(i);

    Rng a(55), b(55);
    const SegmentState via_sel = denoise_segment(state, all, prompt, sched, gen, a);
    DenoiseOptions opts;
    opts.full_context = true;
    const SegmentState via_full =
        denoise_segment(state, RankingSelection{{}, l, 0.0}, prompt, sched, gen, b, opts);
    if (!(via_sel.tokens == via_full.tokens)) {
      return "mismatch at L=" + std::to_string(l);
    }
  }
  return "";
}

std::string criterion_bounded_compute() {
  const std::size_t k = 4;
  const GenWeights w = GenWeights::seeded(8, 16, 3);
  const NoiseSchedule sched = NoiseSchedule::default3();
  Rng prng(45);
  Matrix ptokens(2, 16);
  for (double& x : ptokens.storage()) x = prng.normal();
  const PromptEmbedding prompt(ptokens);

  for (std::size_t factor : {1ul, 4ul, 16ul}) {
    const std::size_t l = k * factor;
    const GenerationState state = flat_state(l, 200 + factor);
    const ToyGenerator gen(w);
    RankingSelection sel;
    sel.total_candidates = l;
    for (std::size_t i = 0; i < k; ++i) sel.indices.push_back(i * factor);

    Rng rng(66);
    denoise_segment(state, sel, prompt, sched, gen, rng);
    if (gen.attention_calls() == 0) return "no attention calls recorded";
    const std::uint64_t per_call = gen.key_rows_touched() / gen.attention_calls();
    if (per_call != k || gen.key_rows_touched() % gen.attention_calls() != 0) {
      return "key rows per call " + std::to_string(per_call) + " != " + std::to_string(k) +
             " at L=" + std::to_string(l);
    }
  }
  return "";
}

std::string criterion_grpo_arithmetic() {
  const auto z = compute_advantages({2, 2, 2}, 1e-6);
  if (z != std::vector<double>{0, 0, 0}) return "zero-variance guard failed";
  const auto p = compute_advantages({0, 1}, 1e-6);
  if (std::abs(p[0] + 1.0) > 1e-12 || std::abs(p[1] - 1.0) > 1e-12) {
    return "pair advantages wrong";
  }
  const auto t = compute_advantages({1, 2, 3}, 1e-6);
  if (std::abs(t[0] + 1.2247) > 1e-4 || std::abs(t[1]) > 1e-12 || std::abs(t[2] - 1.2247) > 1e-4) {
    return "triple advantages wrong";
  }
  const double up = grpo_objective({std::log(1.5)}, {0.0}, {1.0}, 0.2);
  if (std::abs(up - 1.2) > 1e-12) return "positive clip fixture off by " + format_double(up - 1.2);
  const double down = grpo_objective({std::log(0.5)}, {0.0}, {-1.0}, 0.2);
  if (std::abs(down + 0.8) > 1e-12) {
    return "negative clip fixture off by " + format_double(down + 0.8);
  }
  return "";
}

std::string criterion_learning() {
  const EnvConfig ec = canonical_env();
  const SynthEnv env = SynthEnv::build(ec);
  GenerationState state = env.initial_state();
  const PromptEmbedding prompt = env.prompt(1);
  const RewardSuite suite = env.reward_suite(RewardConfig{});

  const auto [oracle_set, oracle_reward] =
      oracle_best_selection(env, state, prompt, 3, RewardConfig{});

  TrainSceneConfig cfg;
  cfg.budget_k = 3;
  cfg.schedule = ec.schedule;
  cfg.base_seed = 12;
  cfg.scene_index = 1;
  cfg.grpo.iterations = 150;  // G = 10, lr = 0.001 from the defaults

  Rng init = Rng::derive(cfg.base_seed, 0xfffffffdull, 0, 0);
  PolicyParams policy = init_params(PolicyConfig{}, init);
  AdamWState opt = AdamWState::like(std::as_const(policy).tensors());

  const TrainSceneResult r = train_scene(state, prompt, 1, policy, opt, env.generator(), suite,
                                         cfg, std::optional(oracle_set));

  const double final_mean = r.trace.back().reward_mean;
  if (final_mean < 0.9 * oracle_reward) {
    return "final mean " + format_double(final_mean) + " < 0.9 * oracle " +
           format_double(oracle_reward);
  }
  std::size_t overlap = 0;
  for (std::size_t idx : r.greedy.indices) {
    for (std::size_t o : oracle_set) {
      if (idx == o) ++overlap;
    }
  }
  return check(overlap >= 2, "greedy overlap " + std::to_string(overlap) + " < 2 of 3");
}

std::string criterion_directional() {
  RunConfig policy_cfg = canonical_run("dir_policy", 12, 150);
  RunConfig vanilla_cfg = policy_cfg;
  vanilla_cfg.strategy = Strategy::vanilla;
  vanilla_cfg.output_dir = work_dir("dir_vanilla").string();
  RunConfig sliding_cfg = policy_cfg;
  sliding_cfg.strategy = Strategy::sliding_window;
  sliding_cfg.output_dir = work_dir("dir_sliding").string();

  const ExperimentResult rp = run_experiment(policy_cfg);
  const ExperimentResult rv = run_experiment(vanilla_cfg);
  const ExperimentResult rs = run_experiment(sliding_cfg);

  auto clip_mean = [](const ExperimentResult& r) {
    double total = 0.0;
    for (const SceneOutcome& s : r.scenes) total += s.reward.clip;
    return total / static_cast<double>(r.scenes.size());
  };
  const double clip_policy = clip_mean(rp);
  const double clip_vanilla = clip_mean(rv);
  if (!(clip_policy > clip_vanilla)) {
    return "policy clip " + format_double(clip_policy) + " <= vanilla " +
           format_double(clip_vanilla);
  }
  if (!rp.cross_scene_sim_phi || !rs.cross_scene_sim_phi) return "missing similarity values";
  if (!(*rp.cross_scene_sim_phi > *rs.cross_scene_sim_phi)) {
    return "policy sim " + format_double(*rp.cross_scene_sim_phi) + " <= sliding " +
           format_double(*rs.cross_scene_sim_phi);
  }
  return "";
}

std::string criterion_metric_oracle() {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t frames = 2 + rng.below(10);
    Matrix emb(frames, 5);
    for (double& x : emb.storage()) x = rng.normal() + 0.05;
    std::vector<std::size_t> starts = {0};
    for (std::size_t f = 1; f < frames; ++f) {
      if (rng.below(3) == 0) starts.push_back(f);
    }
    if (starts.size() < 2) starts.push_back(frames - 1);

    std::vector<std::size_t> clip(frames);
    std::size_t c = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      while (c + 1 < starts.size() && f >= starts[c + 1]) ++c;
      clip[f] = c;
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < frames; ++i) {
      for (std::size_t j = 0; j < frames; ++j) {
        if (clip[i] > clip[j]) {
          total += cosine(emb.row(i), emb.row(j));
          ++pairs;
        }
      }
    }
    const double expected = total / static_cast<double>(pairs);
    const double got = cross_scene_sim(emb, starts);
    if (std::abs(got - expected) > 1e-12) {
      return "naive-loop mismatch " + format_double(std::abs(got - expected));
    }
  }

  for (std::size_t clips = 2; clips <= 5; ++clips) {
    for (std::size_t size = 1; size <= 3; ++size) {
      std::vector<std::size_t> starts;
      for (std::size_t c = 0; c < clips; ++c) starts.push_back(c * size);
      if (build_sim_mask(clips * size, starts).ones() != size * size * clips * (clips - 1) / 2) {
        return "mask count formula failed at clips=" + std::to_string(clips);
      }
    }
  }
  return "";
}

std::string criterion_determinism() {
  RunConfig a = canonical_run("det_a", 12, 5);
  RunConfig b = canonical_run("det_b", 12, 5);
  run_experiment(a);
  run_experiment(b);
  for (const std::string name :
       {"metrics.csv", "segments.txt", "phi_embeddings.txt", "checkpoint.bin"}) {
    if (slurp(fs::path(a.output_dir) / name) != slurp(fs::path(b.output_dir) / name)) {
      return name + " differs between identical runs";
    }
  }

  RunConfig full = canonical_run("resume_full", 12, 5);
  run_experiment(full);
  RunConfig resumed = canonical_run("resume_part", 12, 5);
  run_experiment(resumed, (fs::path(full.output_dir) / "checkpoint_scene2.bin").string());
  if (slurp(fs::path(full.output_dir) / "checkpoint.bin") !=
      slurp(fs::path(resumed.output_dir) / "checkpoint.bin")) {
    return "resumed run diverged from the uninterrupted run";
  }
  return "";
}

std::string criterion_invariances() {
  // (a) reward translation: bit-identical parameter update
  const EnvConfig ec = canonical_env();
  const SynthEnv env = SynthEnv::build(ec);
  const GenerationState state = env.initial_state();
  const PromptEmbedding prompt = env.prompt(1);

  Rng init(90);
  PolicyParams base = init_params(PolicyConfig{}, init);
  const Matrix& features = state.cache().policy_features();
  const ScoreVector scores = score_context(base, features, prompt);

  Rng sel_rng(91);
  std::vector<RankingSelection> sels;
  for (int i = 0; i < 8; ++i) sels.push_back(sample_topk(scores, 3, sel_rng));
  const std::vector<double> rewards = {0.5, 1.25, 2.0, -0.75, 0.0, 1.0, 0.25, -0.5};

  auto updated = [&](const std::vector<double>& rw) {
    PolicyParams p = base;
    const std::vector<double> adv = compute_advantages(rw, 1e-6);
    ScoreVector upstream(scores.size(), 0.0);
    for (std::size_t i = 0; i < sels.size(); ++i) {
      const ScoreVector g = pl_logprob_grad(scores, sels[i].indices);
      for (std::size_t j = 0; j < upstream.size(); ++j) upstream[j] += adv[i] * g[j] / 8.0;
    }
    PolicyGrads grads = score_context_backward(p, features, prompt, upstream);
    for (Matrix& m : grads)
      for (double& x : m.storage()) x = -x;
    GrpoConfig gc;
    AdamWState opt = AdamWState::like(std::as_const(p).tensors());
    adamw_step(p.tensors(), grads, opt, gc);
    return p;
  };
  std::vector<double> shifted = rewards;
  for (double& r : shifted) r += 2.0;
  PolicyParams pa = updated(rewards);
  PolicyParams pb = updated(shifted);
  const auto ta = std::as_const(pa).tensors();
  const auto tb = std::as_const(pb).tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!(*ta[i] == *tb[i])) return "translated rewards changed the update";
  }

  // (b) cosine scale invariance of the reward and metric ops
  Rng rng(92);
  Geometry geo{4, 1, 1, 2, 6};
  GenerationState prev(geo, 1);
  SegmentState seg0;
  seg0.segment_index = 0;
  seg0.frames = 4;
  seg0.tokens_per_frame = 1;
  seg0.tokens = Matrix(4, 6);
  for (double& x : seg0.tokens.storage()) x = rng.normal() + 0.2;
  seg0.timestep_states.push_back(seg0.tokens);
  prev.append(seg0);

  SegmentState cur = seg0;
  cur.segment_index = 1;
  for (double& x : cur.tokens.storage()) x = rng.normal() + 0.2;

  EmbeddingProvider mean6{"mean", 6, [](const Matrix& t) {
    Vector m(t.cols(), 0.0);
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) m[j] += t(i, j);
    for (double& x : m) x /= static_cast<double>(t.rows());
    return m;
  }};
  const PromptEmbedding p6 = PromptEmbedding::from_vector({1, 0, 0.5, 0, 0, 0});

  const double content_before = reward_content(cur, prev, mean6, 2);
  const double clip_before = reward_clip(p6, cur, mean6, 3);
  SegmentState scaled = cur;
  for (double& x : scaled.tokens.storage()) x *= 8.0;
  if (std::abs(reward_content(scaled, prev, mean6, 2) - content_before) > 1e-12) {
    return "content reward not scale invariant";
  }
  if (std::abs(reward_clip(p6, scaled, mean6, 3) - clip_before) > 1e-12) {
    return "clip reward not scale invariant";
  }
  Matrix emb(4, 3);
  for (double& x : emb.storage()) x = rng.normal() + 0.1;
  const double sim_before = cross_scene_sim(emb, {0, 2});
  Matrix emb_scaled = emb;
  for (double& x : emb_scaled.storage()) x *= 4.0;
  if (std::abs(cross_scene_sim(emb_scaled, {0, 2}) - sim_before) > 1e-12) {
    return "cross-scene sim not scale invariant";
  }

  // (c) advantage normalization bounds
  Rng arng(93);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> rw(2 + arng.below(9));
    for (double& r : rw) r = 3.0 * arng.normal();
    const auto adv = compute_advantages(rw, 1e-6);
    double mean = 0.0, var = 0.0;
    for (double a2 : adv) mean += a2;
    mean /= static_cast<double>(adv.size());
    for (double a2 : adv) var += (a2 - mean) * (a2 - mean);
    var /= static_cast<double>(adv.size());
    if (std::abs(mean) > 1e-10) return "advantage mean bound violated";
    if (std::abs(std::sqrt(var) - 1.0) > 1e-8) return "advantage std bound violated";
  }
  return "";
}

}  // namespace

int main() {
  const std::vector<std::pair<Criterion, double>> criteria = {
      {{"pl-sampler-distribution", criterion_pl_sampler}, 5.0},
      {{"likelihood-and-gradients", criterion_likelihood_gradients}, 10.0},
      {{"full-context-equivalence", criterion_full_context_equivalence}, 0.0},
      {{"bounded-compute", criterion_bounded_compute}, 0.0},
      {{"grpo-arithmetic", criterion_grpo_arithmetic}, 0.0},
      {{"learning-vs-oracle", criterion_learning}, 120.0},
      {{"directional-strategy-ordering", criterion_directional}, 300.0},
      {{"metric-oracle-equivalence", criterion_metric_oracle}, 0.0},
      {{"determinism-and-persistence", criterion_determinism}, 0.0},
      {{"reward-invariances", criterion_invariances}, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [criterion, budget_s] = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    std::string reason;
    try {
      reason = criterion.run();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (reason.empty() && budget_s > 0.0 && elapsed > budget_s) {
      reason = "exceeded time budget of " + format_double(budget_s) + "s";
    }
    std::printf("[%s] %02zu %s (%.2fs)%s%s\n", reason.empty() ? "PASS" : "FAIL", i + 1,
                criterion.name.c_str(), elapsed, reason.empty() ? "" : " -- ",
                reason.c_str());
    if (!reason.empty()) ++failures;
  }
  return failures;
}
