#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ttrv/grpo.hpp"
#include "ttrv/policy.hpp"
#include "ttrv/rng.hpp"
#include "ttrv/rollout.hpp"

namespace ttrv::testing {

struct CheckResult {
  bool ok = true;
  std::string detail;  // first failure, or a short summary when ok

  void fail(std::string why) {
    if (ok) detail = std::move(why);
    ok = false;
  }
};

// A policy together with a prompt it accepts.
struct Fixture {
  Policy policy;
  PromptInput prompt;
};

// Random parameters (N(0, scale^2)) for a small policy of the given kind, and
// one matching prompt.
Fixture random_fixture(PolicyKind kind, Rng& rng, double scale = 1.0);

// N rollouts sampled from `policy` with behavior log-probs at `temperature`,
// canonicalized verbatim.
RolloutGroup sample_group(const Policy& policy, const PromptInput& prompt,
                          std::size_t n, double temperature, Rng& rng);

// Central finite difference of f at theta along every coordinate.
template <typename F>
std::vector<double> numeric_gradient(Policy policy, F&& f, double h) {
  std::vector<double> g(policy.params().size());
  auto theta = policy.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const double up = f(policy);
    theta[i] = keep - h;
    const double down = f(policy);
    theta[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
double relative_error(const std::vector<double>& a, const std::vector<double>& b);

// Analytic grad_logprob and the reinforce / clipped surrogate gradients (with
// KL) against finite differences at step h, over `triples` random
// (policy, prompt, response) draws of one policy kind.
struct GradientReport {
  CheckResult result;
  std::size_t triples = 0;
  double worst_logprob = 0.0;
  double worst_surrogate = 0.0;
};
GradientReport check_gradients(PolicyKind kind, std::size_t triples,
                               std::uint64_t seed, double h = 1e-5,
                               double tolerance = 1e-6);

// Distribution / reward / advantage / policy invariants over randomized
// inputs: normalization, r1 and H ranges, standardization, invariance to
// shift and scale, degenerate zeroing, per-group cancellation, the score
// identity, and KL >= 0.
CheckResult check_math_invariants(std::uint64_t seed);

}  // namespace ttrv::testing
