#pragma once

#include <string>
#include <vector>

#include "ctxsel/argen.hpp"
#include "ctxsel/grpo.hpp"
#include "ctxsel/policynet.hpp"

namespace ctxsel {

// Binary checkpoint with a versioned header and named, shape-tagged f64
// tensors (little-endian). Covers the policy, the optimizer moments and the
// committed segments, which is everything needed to resume a run
// bit-exactly: RNG streams are derived per (seed, scene, iteration, rollout)
// and carry no cross-scene state.
struct Checkpoint {
  PolicyParams policy;
  AdamWState optimizer;
  std::size_t scenes_done = 0;
  std::vector<SegmentState> segments;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the generation state by replaying the checkpointed segments.
GenerationState restore_state(const Checkpoint& ck, const Geometry& geometry,
                              std::size_t timesteps);

}  // namespace ctxsel
