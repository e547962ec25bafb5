#pragma once

// Finite-difference oracles for each kernel primitive. Shared between the
// unit tests and the acceptance suite; the oracle side never calls the
// backward kernels it verifies.

#include <cmath>
#include <vector>

#include "nuer/kernels.hpp"
#include "nuer/nn.hpp"
#include "nuer/rng.hpp"
#include "nuer/tensor.hpp"

namespace nuer::test {

inline void randomize(ParamTensor& t, Rng& rng, double scale = 0.5) {
  for (double& v : t.values) v = rng.next_normal() * scale;
}

// linear -> softmax -> cross-entropy micro-model over params {W, b, x}.
inline double check_linear_softmax_ce(uint64_t seed) {
  const int t = 3, in = 5, out = 4;
  Rng rng(seed);
  ParamTensor wt({in, out}), b({out}), x({t, in});
  randomize(wt, rng);
  randomize(b, rng);
  randomize(x, rng);
  const int target = 2;

  auto loss = [&]() {
    std::vector<double> y(static_cast<size_t>(t) * out);
    kern::linear_forward(y.data(), x.values.data(), wt.values.data(), b.values.data(), t, in, out);
    double total = 0.0;
    std::vector<double> dy(y.size());
    for (int r = 0; r < t; ++r) {
      std::vector<double> row(y.begin() + static_cast<ptrdiff_t>(r) * out,
                              y.begin() + static_cast<ptrdiff_t>(r + 1) * out);
      const std::vector<double> p = softmax(row);
      total += cross_entropy(p, target);
      for (int o = 0; o < out; ++o)
        dy[static_cast<size_t>(r) * out + o] = p[static_cast<size_t>(o)] - (o == target ? 1.0 : 0.0);
    }
    kern::linear_backward(x.grad.data(), wt.grad.data(), b.grad.data(), dy.data(),
                          x.values.data(), wt.values.data(), t, in, out);
    return total;
  };
  return grad_check(loss, {&wt, &b, &x}, 1e-5, 200, seed);
}

// layer_norm over params {x, gain, bias}, loss = fixed linear functional.
inline double check_layernorm(uint64_t seed) {
  const int rows = 3, d = 6;
  Rng rng(seed);
  ParamTensor x({rows, d}), gain({d}), bias({d});
  randomize(x, rng);
  randomize(gain, rng, 0.3);
  for (double& v : gain.values) v += 1.0;
  randomize(bias, rng, 0.3);
  std::vector<double> c(static_cast<size_t>(rows) * d);
  for (double& v : c) v = rng.next_normal();

  auto loss = [&]() {
    std::vector<double> y(c.size()), mean(rows), rstd(rows);
    kern::layernorm_forward(y.data(), mean.data(), rstd.data(), x.values.data(),
                            gain.values.data(), bias.values.data(), rows, d);
    double total = 0.0;
    for (size_t i = 0; i < y.size(); ++i) total += c[i] * y[i];
    kern::layernorm_backward(x.grad.data(), gain.grad.data(), bias.grad.data(), c.data(),
                             x.values.data(), mean.data(), rstd.data(), gain.values.data(), rows,
                             d);
    return total;
  };
  return grad_check(loss, {&x, &gain, &bias}, 1e-5, 200, seed);
}

inline double check_gelu(uint64_t seed) {
  const int n = 24;
  Rng rng(seed);
  ParamTensor x({n});
  randomize(x, rng, 1.5);
  std::vector<double> c(static_cast<size_t>(n));
  for (double& v : c) v = rng.next_normal();

  auto loss = [&]() {
    std::vector<double> y(static_cast<size_t>(n));
    kern::gelu_forward(y.data(), x.values.data(), static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += c[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    kern::gelu_backward(x.grad.data(), c.data(), x.values.data(), static_cast<size_t>(n));
    return total;
  };
  return grad_check(loss, {&x}, 1e-5, 200, seed);
}

// multi-head attention with a PAD column, params {q, k, v}.
inline double check_attention(uint64_t seed) {
  const int t = 5, heads = 2, dh = 3, dm = heads * dh;
  Rng rng(seed);
  ParamTensor q({t, dm}), k({t, dm}), v({t, dm});
  randomize(q, rng);
  randomize(k, rng);
  randomize(v, rng);
  std::vector<int> mask(static_cast<size_t>(t), 1);
  mask[static_cast<size_t>(t) - 1] = 0;
  std::vector<double> c(static_cast<size_t>(t) * dm);
  for (double& x : c) x = rng.next_normal();

  auto loss = [&]() {
    std::vector<double> ctx(static_cast<size_t>(t) * dm),
        probs(static_cast<size_t>(heads) * t * t);
    kern::attention_forward(ctx.data(), probs.data(), q.values.data(), k.values.data(),
                            v.values.data(), mask.data(), t, heads, dh);
    double total = 0.0;
    for (size_t i = 0; i < ctx.size(); ++i) total += c[i] * ctx[i];
    kern::attention_backward(q.grad.data(), k.grad.data(), v.grad.data(), c.data(), probs.data(),
                             q.values.data(), k.values.data(), v.values.data(), t, heads, dh);
    return total;
  };
  return grad_check(loss, {&q, &k, &v}, 1e-5, 200, seed);
}

// embedding lookup with repeated ids (exercises scatter-add), params {table}.
inline double check_embedding(uint64_t seed) {
  const int rows = 4, d = 5, t = 6;
  Rng rng(seed);
  ParamTensor table({rows, d});
  randomize(table, rng);
  const std::vector<int> ids = {1, 0, 1, 3, 1, 0};
  std::vector<double> c(static_cast<size_t>(t) * d);
  for (double& x : c) x = rng.next_normal();

  auto loss = [&]() {
    double total = 0.0;
    for (int r = 0; r < t; ++r) {
      for (int j = 0; j < d; ++j)
        total += c[static_cast<size_t>(r) * d + j] *
                 table.values[static_cast<size_t>(ids[static_cast<size_t>(r)]) * d + j];
    }
    kern::embedding_backward(table.grad.data(), c.data(), ids.data(), t, d);
    return total;
  };
  return grad_check(loss, {&table}, 1e-5, 200, seed);
}

}  // namespace nuer::test
