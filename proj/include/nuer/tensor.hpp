#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace nuer {

// Dense parameter tensor with paired gradient and Adam moment buffers.
// Values are 64-bit so finite-difference gradient checks are exact;
// checkpoints store the 32-bit rounding.
struct ParamTensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  int64_t step_count = 0;

  ParamTensor() = default;
  explicit ParamTensor(std::vector<int> s) : shape(std::move(s)) {
    const size_t n = count();
    values.assign(n, 0.0);
    grad.assign(n, 0.0);
    adam_m.assign(n, 0.0);
    adam_v.assign(n, 0.0);
  }

  size_t count() const {
    size_t n = 1;
    for (int e : shape) n *= static_cast<size_t>(e);
    return n;
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct AdamHyper {
  double eta = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

}  // namespace nuer
