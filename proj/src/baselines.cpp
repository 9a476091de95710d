#include "ctxsel/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "ctxsel/errors.hpp"

namespace ctxsel {

namespace {

RankingSelection make_selection(std::vector<std::size_t> indices, std::size_t l) {
  RankingSelection sel;
  sel.indices = std::move(indices);
  sel.total_candidates = l;
  sel.logprob = 0.0;
  return sel;
}

std::vector<std::size_t> frame_tokens_range(std::size_t frame, std::size_t hw) {
  std::vector<std::size_t> out(hw);
  for (std::size_t i = 0; i < hw; ++i) out[i] = frame * hw + i;
  return out;
}

// Partial Fisher-Yates: k distinct draws from [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

RankingSelection baseline_select(Strategy strategy, const GenerationState& state, std::size_t k,
                                 Rng& rng, const WindowParams& window) {
  const std::size_t l = state.history_tokens();
  const std::size_t hw = state.geometry().tokens_per_frame();
  const std::size_t frames = l / hw;

  if (strategy == Strategy::vanilla) {
    std::vector<std::size_t> all(l);
    std::iota(all.begin(), all.end(), 0);
    return make_selection(std::move(all), l);
  }
  if (k < 1 || k > l) throw BudgetError("baseline budget outside [1, L]");

  switch (strategy) {
    case Strategy::random_per_token: {
      std::vector<std::size_t> idx = sample_without_replacement(l, k, rng);
      std::sort(idx.begin(), idx.end());
      return make_selection(std::move(idx), l);
    }
    case Strategy::random_per_frame: {
      if (k % hw != 0) {
        throw ConfigError("frame-wise selection needs a budget divisible by tokens per frame");
      }
      const std::vector<std::size_t> picked = sample_without_replacement(frames, k / hw, rng);
      std::vector<std::size_t> idx;
      for (std::size_t f : picked) {
        const std::vector<std::size_t> range = frame_tokens_range(f, hw);
        idx.insert(idx.end(), range.begin(), range.end());
      }
      std::sort(idx.begin(), idx.end());
      return make_selection(std::move(idx), l);
    }
    case Strategy::sliding_window: {
      std::vector<std::size_t> idx(k);
      std::iota(idx.begin(), idx.end(), l - k);
      return make_selection(std::move(idx), l);
    }
    case Strategy::global_local: {
      const std::size_t anchor_tokens = std::min(window.global_frames * hw, k);
      std::set<std::size_t> chosen;
      for (std::size_t i = 0; i < anchor_tokens && i < l; ++i) chosen.insert(i);
      // Fill the remaining budget with the most recent unchosen tokens.
      for (std::size_t i = l; i-- > 0 && chosen.size() < k;) chosen.insert(i);
      return make_selection(std::vector<std::size_t>(chosen.begin(), chosen.end()), l);
    }
    case Strategy::random_global_local: {
      if (k % hw != 0) {
        throw ConfigError("frame-wise selection needs a budget divisible by tokens per frame");
      }
      std::set<std::size_t> chosen_frames;
      const std::size_t budget_frames = k / hw;
      for (std::size_t f = 0; f < window.global_frames && chosen_frames.size() < budget_frames;
           ++f) {
        chosen_frames.insert(f);
      }
      for (std::size_t f = frames;
           f-- > 0 && chosen_frames.size() <
                          std::min(budget_frames, window.global_frames + window.local_frames);) {
        chosen_frames.insert(f);
      }
      // Intermediate frames drawn uniformly from whatever is left.
      std::vector<std::size_t> remaining;
      for (std::size_t f = 0; f < frames; ++f) {
        if (!chosen_frames.count(f)) remaining.push_back(f);
      }
      while (chosen_frames.size() < budget_frames) {
        if (remaining.empty()) throw BudgetError("not enough frames to fill the budget");
        const std::size_t pick = rng.below(remaining.size());
        chosen_frames.insert(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      std::vector<std::size_t> idx;
      for (std::size_t f : chosen_frames) {
        const std::vector<std::size_t> range = frame_tokens_range(f, hw);
        idx.insert(idx.end(), range.begin(), range.end());
      }
      std::sort(idx.begin(), idx.end());
      return make_selection(std::move(idx), l);
    }
    default:
      throw ConfigError("strategy '" + strategy_name(strategy) + "' is not a baseline");
  }
}

}  // namespace ctxsel
