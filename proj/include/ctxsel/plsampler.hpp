#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "ctxsel/rng.hpp"

namespace ctxsel {

// Per-token selection scores, one entry per history token.
using ScoreVector = std::vector<double>;

// An ordered top-K selection drawn from the Plackett-Luce model over scores,
// together with its exact log-probability. The order matters for the policy
// likelihood; attention downstream is order-insensitive.
struct RankingSelection {
  std::vector<std::size_t> indices;  // ordered, distinct
  std::size_t total_candidates = 0;  // L
  double logprob = 0.0;

  std::vector<std::size_t> unselected() const;
};

// Draws K indices sequentially without replacement: at each step the scores
// of the remaining pool are renormalized and one token is sampled from the
// resulting multinomial. The returned logprob equals pl_logprob over the
// drawn ordering.
RankingSelection sample_topk(const ScoreVector& scores, std::size_t k, Rng& rng);

// Exact log-probability of an ordered selection: sum over steps of
// score[chosen] - logsumexp(scores of tokens not yet chosen).
double pl_logprob(const ScoreVector& scores, const std::vector<std::size_t>& indices);

// Analytic gradient of pl_logprob with respect to every score:
// d/ds_i = [i was chosen] - sum over steps where i was still in the pool of
// the renormalized softmax weight of i at that step.
ScoreVector pl_logprob_grad(const ScoreVector& scores, const std::vector<std::size_t>& indices);

// Brute-force oracle: exact probability of every ordered k-tuple. Guarded to
// L <= 8, k <= 4; the tuple count is L!/(L-k)!.
std::map<std::vector<std::size_t>, double> enumerate_pl_distribution(const ScoreVector& scores,
                                                                     std::size_t k);

}  // namespace ctxsel
