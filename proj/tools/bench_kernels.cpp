// Microbenchmark comparing the serial reference kernels against the OpenMP
// flavor on training-sized shapes, plus an end-to-end forward/backward
// throughput comparison. Wall-clock output only; results feed no artifact.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "nuer/encoder.hpp"
#include "nuer/kernels.hpp"
#include "nuer/rng.hpp"
#include "nuer/tagger.hpp"

using namespace nuer;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int iters) {
  fn();  // warm up
  const auto start = Clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / iters;
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}

void bench_pair(const char* name, const std::function<void()>& serial,
                const std::function<void()>& parallel, int iters) {
  const double s = time_ms(serial, iters);
  const double p = time_ms(parallel, iters);
  std::printf("%-22s serial %8.3f ms   openmp %8.3f ms   speedup %.2fx\n", name, s, p, s / p);
}

}  // namespace

int main() {
  Rng rng(42);
  const int t = 24, d = 64, f = 256, heads = 4, dh = d / heads;

  {
    auto x = random_vec(static_cast<size_t>(t) * d, rng);
    auto wt = random_vec(static_cast<size_t>(d) * f, rng);
    auto b = random_vec(static_cast<size_t>(f), rng);
    std::vector<double> y(static_cast<size_t>(t) * f);
    bench_pair(
        "linear_forward",
        [&] { kern::ref::linear_forward(y.data(), x.data(), wt.data(), b.data(), t, d, f); },
        [&] { kern::omp::linear_forward(y.data(), x.data(), wt.data(), b.data(), t, d, f); },
        2000);

    auto g = random_vec(static_cast<size_t>(t) * f, rng);
    std::vector<double> dx(static_cast<size_t>(t) * d), dwt(static_cast<size_t>(d) * f),
        db(static_cast<size_t>(f));
    bench_pair(
        "linear_backward",
        [&] {
          kern::ref::linear_backward(dx.data(), dwt.data(), db.data(), g.data(), x.data(),
                                     wt.data(), t, d, f);
        },
        [&] {
          kern::omp::linear_backward(dx.data(), dwt.data(), db.data(), g.data(), x.data(),
                                     wt.data(), t, d, f);
        },
        1000);
  }

  {
    auto q = random_vec(static_cast<size_t>(t) * d, rng);
    auto k = random_vec(static_cast<size_t>(t) * d, rng);
    auto v = random_vec(static_cast<size_t>(t) * d, rng);
    std::vector<int> mask(static_cast<size_t>(t), 1);
    mask[static_cast<size_t>(t) - 1] = 0;
    std::vector<double> ctx(static_cast<size_t>(t) * d),
        probs(static_cast<size_t>(heads) * t * t);
    bench_pair(
        "attention_forward",
        [&] {
          kern::ref::attention_forward(ctx.data(), probs.data(), q.data(), k.data(), v.data(),
                                       mask.data(), t, heads, dh);
        },
        [&] {
          kern::omp::attention_forward(ctx.data(), probs.data(), q.data(), k.data(), v.data(),
                                       mask.data(), t, heads, dh);
        },
        2000);
  }

  {
    // End to end: one tagger forward/backward per iteration, serial kernels
    // vs sharded-batch parallelism over a small batch.
    EncoderConfig cfg;
    cfg.vocab_size = 500;
    cfg.dropout = 0.0;
    cfg.seed = 1;
    EncoderModel model = init_model(cfg);
    attach_tag_head(model);

    EncodedSequence enc;
    for (int i = 0; i < t; ++i) {
      enc.token_ids.push_back(i == 0 ? kClsId : kNumReserved + i);
      enc.segment_ids.push_back(0);
      enc.attention_mask.push_back(1);
      enc.alignment.push_back(i == 0 || i == t - 1 ? -1 : i - 1);
    }
    std::vector<EntityLabel> gold(static_cast<size_t>(t - 2), EntityLabel::YEAR);

    const int batch = 16;
    BatchWorkspace workspace(model, 4);
    auto pass = [&](EncoderGrads& g) {
      return tagger_loss_and_grad(model, enc, gold, 1.0 / batch, nullptr, g);
    };
    bench_pair(
        "batch fwd+bwd (16)",
        [&] {
          kern::set_parallel(false);
          EncoderGrads g = grads_of(model);
          for (int i = 0; i < batch; ++i) pass(g);
          for (ParamTensor* p : model.params()) p->zero_grad();
        },
        [&] {
          kern::set_parallel(true);
          workspace.run(batch, [&](int, EncoderGrads& g) { return pass(g); });
          for (ParamTensor* p : model.params()) p->zero_grad();
        },
        20);
    kern::set_parallel(true);
  }

  return 0;
}
