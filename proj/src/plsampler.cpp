#include "ctxsel/plsampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxsel/errors.hpp"
#include "ctxsel/matrix.hpp"

namespace ctxsel {

namespace {

void check_scores(const ScoreVector& scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw DomainError("non-finite selection score");
  }
}

void check_indices(const ScoreVector& scores, const std::vector<std::size_t>& indices) {
  std::vector<bool> seen(scores.size(), false);
  for (std::size_t idx : indices) {
    if (idx >= scores.size()) throw DomainError("selection index out of range");
    if (seen[idx]) throw DomainError("duplicate index in selection");
    seen[idx] = true;
  }
}

}  // namespace

std::vector<std::size_t> RankingSelection::unselected() const {
  std::vector<bool> chosen(total_candidates, false);
  for (std::size_t idx : indices) chosen[idx] = true;
  std::vector<std::size_t> out;
  out.reserve(total_candidates - indices.size());
  for (std::size_t i = 0; i < total_candidates; ++i) {
    if (!chosen[i]) out.push_back(i);
  }
  return out;
}

RankingSelection sample_topk(const ScoreVector& scores, std::size_t k, Rng& rng) {
  const std::size_t l = scores.size();
  if (k < 1 || k > l) {
    throw BudgetError("top-k budget " + std::to_string(k) + " outside [1, " + std::to_string(l) +
                      "]");
  }
  check_scores(scores);

  std::vector<std::size_t> pool(l);
  for (std::size_t i = 0; i < l; ++i) pool[i] = i;

  RankingSelection sel;
  sel.total_candidates = l;
  sel.indices.reserve(k);

  for (std::size_t step = 0; step < k; ++step) {
    Vector remaining(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) remaining[i] = scores[pool[i]];
    const Vector p = softmax(remaining);

    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = pool.size() - 1;  // guard against cum < 1 from rounding
    for (std::size_t i = 0; i < pool.size(); ++i) {
      cum += p[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
    sel.indices.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }

  sel.logprob = pl_logprob(scores, sel.indices);
  return sel;
}

double pl_logprob(const ScoreVector& scores, const std::vector<std::size_t>& indices) {
  check_scores(scores);
  check_indices(scores, indices);

  std::vector<bool> chosen(scores.size(), false);
  double total = 0.0;
  for (std::size_t step = 0; step < indices.size(); ++step) {
    Vector remaining;
    remaining.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!chosen[i]) remaining.push_back(scores[i]);
    }
    total += scores[indices[step]] - logsumexp(remaining);
    chosen[indices[step]] = true;
  }
  return total;
}

ScoreVector pl_logprob_grad(const ScoreVector& scores, const std::vector<std::size_t>& indices) {
  check_scores(scores);
  check_indices(scores, indices);

  ScoreVector grad(scores.size(), 0.0);
  std::vector<bool> chosen(scores.size(), false);
  for (std::size_t step = 0; step < indices.size(); ++step) {
    std::vector<std::size_t> pool;
    Vector remaining;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!chosen[i]) {
        pool.push_back(i);
        remaining.push_back(scores[i]);
      }
    }
    const Vector p = softmax(remaining);
    for (std::size_t i = 0; i < pool.size(); ++i) grad[pool[i]] -= p[i];
    grad[indices[step]] += 1.0;
    chosen[indices[step]] = true;
  }
  return grad;
}

namespace {

void enumerate_rec(const ScoreVector& scores, std::size_t k, std::vector<bool>& chosen,
                   std::vector<std::size_t>& prefix, double logprob_so_far,
                   std::map<std::vector<std::size_t>, double>& out) {
  if (prefix.size() == k) {
    out[prefix] = std::exp(logprob_so_far);
    return;
  }
  Vector remaining;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!chosen[i]) {
      pool.push_back(i);
      remaining.push_back(scores[i]);
    }
  }
  const double lse = logsumexp(remaining);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    chosen[pool[i]] = true;
    prefix.push_back(pool[i]);
    enumerate_rec(scores, k, chosen, prefix, logprob_so_far + scores[pool[i]] - lse, out);
    prefix.pop_back();
    chosen[pool[i]] = false;
  }
}

}  // namespace

std::map<std::vector<std::size_t>, double> enumerate_pl_distribution(const ScoreVector& scores,
                                                                     std::size_t k) {
  if (scores.size() > 8 || k > 4) {
    throw CapacityError("enumerate_pl_distribution limited to L <= 8, k <= 4");
  }
  if (k < 1 || k > scores.size()) throw BudgetError("enumeration budget outside [1, L]");
  check_scores(scores);

  std::map<std::vector<std::size_t>, double> out;
  std::vector<bool> chosen(scores.size(), false);
  std::vector<std::size_t> prefix;
  enumerate_rec(scores, k, chosen, prefix, 0.0, out);
  return out;
}

}  // namespace ctxsel
