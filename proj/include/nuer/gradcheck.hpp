#pragma once

#include "nuer/encoder.hpp"

namespace nuer {

// Finite-difference verification of the full encoder through every task
// head (tagging, span QA with and without entity inputs, masked-numeral
// prediction in both head modes). Dropout is forced off. Returns the worst
// relative error across all checks; verbose prints one line per check.
double run_full_grad_check(const EncoderConfig& config, bool verbose);

}  // namespace nuer
