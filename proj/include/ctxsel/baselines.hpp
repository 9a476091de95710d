#pragma once

#include "ctxsel/argen.hpp"
#include "ctxsel/config.hpp"
#include "ctxsel/plsampler.hpp"
#include "ctxsel/rng.hpp"

namespace ctxsel {

struct WindowParams {
  std::size_t global_frames = 1;  // anchor frames from the start
  std::size_t local_frames = 1;   // recent frames (random-global-local only)
};

// Rule-based context selections evaluated against the learned policy. Every
// strategy except vanilla returns exactly k indices; vanilla ignores k and
// keeps the whole history. The logprob is unused and left at zero.
RankingSelection baseline_select(Strategy strategy, const GenerationState& state, std::size_t k,
                                 Rng& rng, const WindowParams& window = {});

}  // namespace ctxsel
