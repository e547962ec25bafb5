#include "nuer/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nuer/kernels.hpp"
#include "nuer/rng.hpp"

namespace nuer {

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax input is not finite");
  }
  std::vector<double> p(logits.size());
  kern::softmax_rows(p.data(), logits.data(), 1, static_cast<int>(logits.size()));
  return p;
}

double cross_entropy(const std::vector<double>& probs, int target) {
  if (target < 0 || target >= static_cast<int>(probs.size()))
    throw std::invalid_argument("cross_entropy target out of range: " + std::to_string(target));
  return -std::log(std::max(probs[static_cast<size_t>(target)], kProbFloor));
}

void adam_step(const std::vector<ParamTensor*>& params, const AdamHyper& hyper) {
  if (hyper.eta <= 0.0 || hyper.epsilon <= 0.0 || hyper.beta1 <= 0.0 ||
      hyper.beta1 >= 1.0 || hyper.beta2 <= 0.0 || hyper.beta2 >= 1.0)
    throw std::invalid_argument("invalid Adam hyperparameters");
  for (ParamTensor* p : params) {
    p->step_count += 1;
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(p->step_count));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(p->step_count));
    kern::adam_update(p->values.data(), p->grad.data(), p->adam_m.data(), p->adam_v.data(),
                      p->count(), hyper.eta, hyper.beta1, hyper.beta2, hyper.epsilon, bias1,
                      bias2);
    p->zero_grad();
  }
}

double grad_check(const std::function<double()>& loss_with_grad,
                  const std::vector<ParamTensor*>& params, double eps, int max_coords,
                  uint64_t seed) {
  for (ParamTensor* p : params) p->zero_grad();
  const double base = loss_with_grad();
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: loss is not finite");

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  size_t total = 0;
  for (ParamTensor* p : params) {
    analytic.push_back(p->grad);
    total += p->count();
  }

  // Sample coordinates without replacement (all of them when few enough).
  std::vector<size_t> coords;
  if (total <= static_cast<size_t>(max_coords)) {
    coords.resize(total);
    for (size_t i = 0; i < total; ++i) coords[i] = i;
  } else {
    Rng rng(derive_seed(seed, 0xfd));
    std::vector<size_t> all(total);
    for (size_t i = 0; i < total; ++i) all[i] = i;
    rng.shuffle(all);
    coords.assign(all.begin(), all.begin() + max_coords);
    std::sort(coords.begin(), coords.end());
  }

  auto locate = [&](size_t flat) -> std::pair<ParamTensor*, size_t> {
    for (ParamTensor* p : params) {
      if (flat < p->count()) return {p, flat};
      flat -= p->count();
    }
    throw std::logic_error("grad_check: coordinate out of range");
  };

  double max_rel = 0.0;
  for (size_t flat : coords) {
    auto [p, idx] = locate(flat);
    const double saved = p->values[idx];
    p->values[idx] = saved + eps;
    for (ParamTensor* q : params) q->zero_grad();
    const double up = loss_with_grad();
    p->values[idx] = saved - eps;
    for (ParamTensor* q : params) q->zero_grad();
    const double down = loss_with_grad();
    p->values[idx] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("grad_check: loss is not finite under perturbation");

    const double numeric = (up - down) / (2.0 * eps);
    size_t pi = 0;
    while (params[pi] != p) ++pi;
    const double a = analytic[pi][idx];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  for (ParamTensor* p : params) p->zero_grad();
  return max_rel;
}

}  // namespace nuer
