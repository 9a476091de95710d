#include <cmath>

#include <doctest.h>

#include "ctxsel/errors.hpp"
#include "ctxsel/rewards.hpp"
#include "ctxsel/rng.hpp"

using namespace ctxsel;

namespace {

// Environment-free fixtures: dim-2 tokens, h = w = 1, embeddings are the raw
// mean token.
SegmentState segment_from_rows(const std::vector<Vector>& rows, std::size_t index = 1) {
  SegmentState seg;
  seg.segment_index = index;
  seg.frames = rows.size();
  seg.tokens_per_frame = 1;
  seg.tokens = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) seg.tokens.set_row(i, rows[i]);
  seg.timestep_states.push_back(seg.tokens);
  return seg;
}

GenerationState state_from_rows(const std::vector<Vector>& rows) {
  Geometry geo{rows.size(), 1, 1, 2, rows[0].size()};
  GenerationState state(geo, 1);
  state.append(segment_from_rows(rows, 0));
  return state;
}

EmbeddingProvider mean_provider(std::size_t dim) {
  return EmbeddingProvider{"mean", dim, [](const Matrix& tokens) {
    Vector mean(tokens.cols(), 0.0);
    for (std::size_t i = 0; i < tokens.rows(); ++i)
      for (std::size_t j = 0; j < tokens.cols(); ++j) mean[j] += tokens(i, j);
    for (double& x : mean) x /= static_cast<double>(tokens.rows());
    return mean;
  }};
}

}  // namespace

TEST_CASE("stride sampling anchors the first frame") {
  CHECK(stride_sample(10, 1) == std::vector<std::size_t>{0});
  CHECK(stride_sample(10, 2) == std::vector<std::size_t>{0, 9});
  CHECK(stride_sample(5, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  const auto over = stride_sample(3, 5);  // more samples than frames repeats
  CHECK(over.front() == 0);
  CHECK(over.back() == 2);
  CHECK_THROWS_AS(stride_sample(0, 2), DomainError);
}

TEST_CASE("reward_content fixtures") {
  const EmbeddingProvider id2 = mean_provider(2);

  SUBCASE("identical frames give 1") {
    const GenerationState prev = state_from_rows({{1, 0}, {1, 0}});
    const SegmentState cur = segment_from_rows({{1, 0}, {1, 0}});
    CHECK(reward_content(cur, prev, id2, 2) == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("orthogonal embeddings give 0") {
    const GenerationState prev = state_from_rows({{1, 0}, {1, 0}});
    const SegmentState cur = segment_from_rows({{0, 1}, {0, 1}});
    CHECK(reward_content(cur, prev, id2, 2) == doctest::Approx(0.0));
  }

  SUBCASE("hand-built e=2 mixture") {
    const double r = std::sqrt(2.0) / 2.0;
    const GenerationState prev = state_from_rows({{1, 0}, {0, 1}});
    const SegmentState cur = segment_from_rows({{1, 0}, {r, r}});
    // pairs: (1,0)x(1,0)=1, (1,0)x(0,1)=0, (r,r)x(1,0)=r, (r,r)x(0,1)=r
    const double expected = (1.0 + 0.0 + r + r) / 4.0;
    CHECK(reward_content(cur, prev, id2, 2) == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("directional API is symmetric in the frame sets") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vector> a(3, Vector(4)), b(3, Vector(4));
      for (auto& v : a)
        for (double& x : v) x = rng.normal();
      for (auto& v : b)
        for (double& x : v) x = rng.normal();
      const EmbeddingProvider id4 = mean_provider(4);
      const double fwd = reward_content(segment_from_rows(b), state_from_rows(a), id4, 3);
      const double rev = reward_content(segment_from_rows(a), state_from_rows(b), id4, 3);
      CHECK(fwd == doctest::Approx(rev).epsilon(1e-12));
    }
  }

  SUBCASE("errors") {
    Geometry geo{2, 1, 1, 2, 2};
    GenerationState empty(geo, 1);
    CHECK_THROWS_AS(reward_content(segment_from_rows({{1, 0}}), empty, id2, 1), DomainError);
    const GenerationState prev = state_from_rows({{1, 0}});
    CHECK_THROWS_AS(reward_content(segment_from_rows({{1, 0}}), prev, id2, 2), DomainError);
    CHECK_THROWS_AS(
        reward_content(segment_from_rows({{0, 0}}), prev, id2, 1), DegenerateVectorError);
  }
}

TEST_CASE("reward_clip fixtures") {
  const EmbeddingProvider id2 = mean_provider(2);
  const PromptEmbedding prompt = PromptEmbedding::from_vector({1, 0});

  CHECK(reward_clip(prompt, segment_from_rows({{2, 0}, {3, 0}}), id2, 2) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(reward_clip(prompt, segment_from_rows({{0, 1}, {0, 2}}), id2, 2) == doctest::Approx(0.0));
  // cosines {1, 0} average to 0.5
  CHECK(reward_clip(prompt, segment_from_rows({{1, 0}, {0, 1}}), id2, 2) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("artifact detector") {
  const ArtifactDetector detect = consecutive_frame_detector(0.2);

  CHECK(detect(segment_from_rows({{1, 1}, {1, 1}, {1, 1}})) == 1);
  CHECK(detect(segment_from_rows({{1, 0}, {-1, 0}, {1, 0}})) == 0);  // alternating +v/-v

  SegmentState nan_seg = segment_from_rows({{1, 0}, {1, 0}});
  nan_seg.tokens(0, 0) = std::nan("");
  CHECK_THROWS_AS(detect(nan_seg), InvalidSegmentError);

  // single-frame segments cannot be incoherent
  CHECK(detect(segment_from_rows({{1, 0}})) == 1);
}

TEST_CASE("hybrid reward sums components") {
  const EmbeddingProvider id2 = mean_provider(2);
  RewardSuite suite{id2, id2, consecutive_frame_detector(0.2), RewardConfig{2, 2, 0.2}};

  const GenerationState prev = state_from_rows({{1, 0}, {1, 0}});
  const SegmentState cur = segment_from_rows({{1, 0}, {1, 0}});
  const PromptEmbedding prompt = PromptEmbedding::from_vector({1, 0});

  const RewardBreakdown r = hybrid_reward(cur, prev, prompt, suite);
  CHECK(r.content == doctest::Approx(1.0));
  CHECK(r.clip == doctest::Approx(1.0));
  CHECK(r.artifact == 1);
  CHECK(r.total == doctest::Approx(3.0));
  CHECK(r.total == doctest::Approx(r.content + r.clip + r.artifact).epsilon(1e-15));

  // defaults carry the paper's sampling counts
  const RewardConfig defaults;
  CHECK(defaults.content_keyframes == 8);
  CHECK(defaults.clip_frames == 16);
}

TEST_CASE("reward scale invariance") {
  const EmbeddingProvider id4 = mean_provider(4);
  Rng rng(17);
  std::vector<Vector> rows(4, Vector(4));
  for (auto& v : rows)
    for (double& x : v) x = rng.normal();

  const GenerationState prev = state_from_rows(rows);
  std::vector<Vector> cur_rows = rows;
  for (auto& v : cur_rows)
    for (double& x : v) x += 0.1;

  const double base = reward_content(segment_from_rows(cur_rows), prev, id4, 2);
  std::vector<Vector> scaled = cur_rows;
  for (auto& v : scaled)
    for (double& x : v) x *= 8.0;  // exact scaling
  const double after = reward_content(segment_from_rows(scaled), prev, id4, 2);
  CHECK(after == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("sim mask construction") {
  SUBCASE("single clip is all zeros") {
    const SimMask m = build_sim_mask(4, {0});
    CHECK(m.ones() == 0);
  }

  SUBCASE("two clips of sizes a and b have a*b ones") {
    const SimMask m = build_sim_mask(5, {0, 2});  // sizes 2 and 3
    CHECK(m.ones() == 6);
    CHECK(m.at(2, 0));
    CHECK(!m.at(0, 2));
    CHECK(!m.at(0, 0));
  }

  SUBCASE("N equal clips of size m: m^2 N (N-1) / 2 ones") {
    for (std::size_t clips = 2; clips <= 4; ++clips) {
      for (std::size_t size = 1; size <= 3; ++size) {
        std::vector<std::size_t> starts;
        for (std::size_t c = 0; c < clips; ++c) starts.push_back(c * size);
        const SimMask m = build_sim_mask(clips * size, starts);
        CHECK(m.ones() == size * size * clips * (clips - 1) / 2);
      }
    }
  }

  SUBCASE("bad boundaries") {
    CHECK_THROWS_AS(build_sim_mask(4, {1, 2}), ConfigError);
    CHECK_THROWS_AS(build_sim_mask(4, {0, 2, 2}), ConfigError);
    CHECK_THROWS_AS(build_sim_mask(4, {0, 5}), ConfigError);
  }
}

TEST_CASE("cross_scene_sim fixtures") {
  SUBCASE("identical embeddings give 1 over 4 valid pairs") {
    Matrix emb(4, 3);
    for (std::size_t i = 0; i < 4; ++i) emb.set_row(i, {1, 2, 2});
    CHECK(build_sim_mask(4, {0, 2}).ones() == 4);
    CHECK(cross_scene_sim(emb, {0, 2}) == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("orthogonal second clip gives 0") {
    Matrix emb(4, 2);
    emb.set_row(0, {1, 0});
    emb.set_row(1, {1, 0});
    emb.set_row(2, {0, 1});
    emb.set_row(3, {0, 1});
    CHECK(cross_scene_sim(emb, {0, 2}) == doctest::Approx(0.0));
  }

  SUBCASE("three single-frame clips have exactly three valid pairs") {
    CHECK(build_sim_mask(3, {0, 1, 2}).ones() == 3);
  }

  SUBCASE("single clip has no valid pairs") {
    Matrix emb(3, 2);
    for (std::size_t i = 0; i < 3; ++i) emb.set_row(i, {1, 0});
    CHECK_THROWS_AS(cross_scene_sim(emb, {0}), NoValidPairsError);
  }

  SUBCASE("zero-norm row") {
    Matrix emb(2, 2);
    emb.set_row(0, {1, 0});
    emb.set_row(1, {0, 0});
    CHECK_THROWS_AS(cross_scene_sim(emb, {0, 1}), DegenerateVectorError);
  }
}

TEST_CASE("cross_scene_sim equals the naive double loop, and scales away") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t frames = 2 + rng.below(8);
    Matrix emb(frames, 4);
    for (double& x : emb.storage()) x = rng.normal() + 0.1;
    std::vector<std::size_t> starts = {0};
    for (std::size_t f = 1; f < frames; ++f) {
      if (rng.below(2) == 0) starts.push_back(f);
    }
    if (starts.size() < 2) starts.push_back(frames - 1);

    // independent reference: unnormalized cosine over valid pairs
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
    REQUIRE(pairs > 0);
    const double expected = total / static_cast<double>(pairs);
    CHECK(cross_scene_sim(emb, starts) == doctest::Approx(expected).epsilon(1e-12));

    Matrix scaled = emb;
    for (double& x : scaled.storage()) x *= 4.0;
    CHECK(cross_scene_sim(scaled, starts) == doctest::Approx(expected).epsilon(1e-12));
  }
}
