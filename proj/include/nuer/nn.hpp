#pragma once

#include <functional>
#include <vector>

#include "nuer/tensor.hpp"

namespace nuer {

// Floor applied to probabilities before taking logs.
constexpr double kProbFloor = 1e-12;

// Numerically stable softmax (max-shifted). Throws on non-finite input.
std::vector<double> softmax(const std::vector<double>& logits);

// -log(probs[target]) with the probability floor. Throws if target is out
// of range.
double cross_entropy(const std::vector<double>& probs, int target);

// One Adam step with bias correction over the tensors' accumulated
// gradients; increments step_count and zeroes the gradients afterwards.
void adam_step(const std::vector<ParamTensor*>& params, const AdamHyper& hyper);

// Central-difference gradient verification. The closure must recompute the
// loss AND repopulate every tensor's gradient buffer (it is zeroed before
// each invocation); it must be deterministic. Checks up to max_coords
// sampled coordinates (all coordinates when there are fewer) and returns the
// maximum relative error with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<double()>& loss_with_grad,
                  const std::vector<ParamTensor*>& params, double eps = 1e-5,
                  int max_coords = 200, uint64_t seed = 0);

}  // namespace nuer
