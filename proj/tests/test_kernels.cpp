#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "nuer/kernels.hpp"
#include "nuer/rng.hpp"

using namespace nuer;

namespace {

std::vector<double> rand_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}

}  // namespace

// The OpenMP kernels must be bit-identical to the serial reference for any
// thread count: each output element is owned by one thread and every
// reduction runs in a fixed serial order.
TEST_CASE("serial and OpenMP kernels agree bitwise") {
  Rng rng(123);
  for (int trial = 0; trial < 8; ++trial) {
    const int t = 1 + static_cast<int>(rng.next_below(17));
    const int in = 1 + static_cast<int>(rng.next_below(33));
    const int out = 1 + static_cast<int>(rng.next_below(29));

    const auto x = rand_vec(static_cast<size_t>(t) * in, rng);
    const auto wt = rand_vec(static_cast<size_t>(in) * out, rng);
    const auto b = rand_vec(static_cast<size_t>(out), rng);
    std::vector<double> y_ref(static_cast<size_t>(t) * out), y_omp(y_ref.size());
    kern::ref::linear_forward(y_ref.data(), x.data(), wt.data(), b.data(), t, in, out);
    kern::omp::linear_forward(y_omp.data(), x.data(), wt.data(), b.data(), t, in, out);
    CHECK(y_ref == y_omp);

    const auto g = rand_vec(static_cast<size_t>(t) * out, rng);
    std::vector<double> dx_ref(x.size()), dx_omp(x.size());
    std::vector<double> dwt_ref(wt.size(), 0.1), dwt_omp(wt.size(), 0.1);
    std::vector<double> db_ref(b.size(), -0.2), db_omp(b.size(), -0.2);
    kern::ref::linear_backward(dx_ref.data(), dwt_ref.data(), db_ref.data(), g.data(), x.data(),
                               wt.data(), t, in, out);
    kern::omp::linear_backward(dx_omp.data(), dwt_omp.data(), db_omp.data(), g.data(), x.data(),
                               wt.data(), t, in, out);
    CHECK(dx_ref == dx_omp);
    CHECK(dwt_ref == dwt_omp);
    CHECK(db_ref == db_omp);
  }
}

TEST_CASE("layernorm and gelu flavors agree bitwise") {
  Rng rng(9);
  const int rows = 7, d = 24;
  const auto x = rand_vec(static_cast<size_t>(rows) * d, rng);
  const auto gain = rand_vec(static_cast<size_t>(d), rng);
  const auto bias = rand_vec(static_cast<size_t>(d), rng);
  std::vector<double> y1(x.size()), y2(x.size()), m1(rows), m2(rows), r1(rows), r2(rows);
  kern::ref::layernorm_forward(y1.data(), m1.data(), r1.data(), x.data(), gain.data(),
                               bias.data(), rows, d);
  kern::omp::layernorm_forward(y2.data(), m2.data(), r2.data(), x.data(), gain.data(),
                               bias.data(), rows, d);
  CHECK(y1 == y2);
  CHECK(m1 == m2);
  CHECK(r1 == r2);

  const auto g = rand_vec(x.size(), rng);
  std::vector<double> dx1(x.size()), dx2(x.size()), dg1(static_cast<size_t>(d), 0.0),
      dg2(static_cast<size_t>(d), 0.0), db1(static_cast<size_t>(d), 0.0),
      db2(static_cast<size_t>(d), 0.0);
  kern::ref::layernorm_backward(dx1.data(), dg1.data(), db1.data(), g.data(), x.data(), m1.data(),
                                r1.data(), gain.data(), rows, d);
  kern::omp::layernorm_backward(dx2.data(), dg2.data(), db2.data(), g.data(), x.data(), m2.data(),
                                r2.data(), gain.data(), rows, d);
  CHECK(dx1 == dx2);
  CHECK(dg1 == dg2);
  CHECK(db1 == db2);

  std::vector<double> gy1(x.size()), gy2(x.size());
  kern::ref::gelu_forward(gy1.data(), x.data(), x.size());
  kern::omp::gelu_forward(gy2.data(), x.data(), x.size());
  CHECK(gy1 == gy2);
}

TEST_CASE("attention flavors agree bitwise and rows sum to one") {
  Rng rng(31);
  const int t = 9, heads = 3, dh = 4, dm = heads * dh;
  const auto q = rand_vec(static_cast<size_t>(t) * dm, rng);
  const auto k = rand_vec(static_cast<size_t>(t) * dm, rng);
  const auto v = rand_vec(static_cast<size_t>(t) * dm, rng);
  std::vector<int> mask(static_cast<size_t>(t), 1);
  mask[7] = 0;
  mask[8] = 0;

  std::vector<double> ctx1(q.size()), ctx2(q.size());
  std::vector<double> p1(static_cast<size_t>(heads) * t * t), p2(p1.size());
  kern::ref::attention_forward(ctx1.data(), p1.data(), q.data(), k.data(), v.data(), mask.data(),
                               t, heads, dh);
  kern::omp::attention_forward(ctx2.data(), p2.data(), q.data(), k.data(), v.data(), mask.data(),
                               t, heads, dh);
  CHECK(ctx1 == ctx2);
  CHECK(p1 == p2);

  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < t; ++i) {
      double row_sum = 0.0;
      double masked_mass = 0.0;
      for (int j = 0; j < t; ++j) {
        const double pij = p1[(static_cast<size_t>(h) * t + i) * t + j];
        row_sum += pij;
        if (mask[static_cast<size_t>(j)] == 0) masked_mass += pij;
      }
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(masked_mass == 0.0);  // PAD columns get exactly zero weight
    }
  }

  const auto g = rand_vec(q.size(), rng);
  std::vector<double> dq1(q.size()), dq2(q.size()), dk1(q.size()), dk2(q.size()), dv1(q.size()),
      dv2(q.size());
  kern::ref::attention_backward(dq1.data(), dk1.data(), dv1.data(), g.data(), p1.data(), q.data(),
                                k.data(), v.data(), t, heads, dh);
  kern::omp::attention_backward(dq2.data(), dk2.data(), dv2.data(), g.data(), p1.data(), q.data(),
                                k.data(), v.data(), t, heads, dh);
  CHECK(dq1 == dq2);
  CHECK(dk1 == dk2);
  CHECK(dv1 == dv2);
}

TEST_CASE("embedding backward and adam flavors agree bitwise") {
  Rng rng(55);
  const int t = 11, d = 13, rows = 6;
  const auto g = rand_vec(static_cast<size_t>(t) * d, rng);
  std::vector<int> ids(static_cast<size_t>(t));
  for (int& id : ids) id = static_cast<int>(rng.next_below(rows));
  std::vector<double> tab1(static_cast<size_t>(rows) * d, 0.0), tab2(tab1);
  kern::ref::embedding_backward(tab1.data(), g.data(), ids.data(), t, d);
  kern::omp::embedding_backward(tab2.data(), g.data(), ids.data(), t, d);
  CHECK(tab1 == tab2);

  const size_t n = 257;
  auto theta1 = rand_vec(n, rng);
  auto theta2 = theta1;
  const auto grad = rand_vec(n, rng);
  std::vector<double> m1(n, 0.0), m2(n, 0.0), v1(n, 0.0), v2(n, 0.0);
  kern::ref::adam_update(theta1.data(), grad.data(), m1.data(), v1.data(), n, 1e-3, 0.9, 0.999,
                         1e-7, 0.1, 0.001);
  kern::omp::adam_update(theta2.data(), grad.data(), m2.data(), v2.data(), n, 1e-3, 0.9, 0.999,
                         1e-7, 0.1, 0.001);
  CHECK(theta1 == theta2);
  CHECK(m1 == m2);
  CHECK(v1 == v2);
}

TEST_CASE("dispatch switch selects both flavors") {
  CHECK(kern::parallel_enabled());
  kern::set_parallel(false);
  CHECK_FALSE(kern::parallel_enabled());
  Rng rng(2);
  const auto x = rand_vec(16, rng);
  std::vector<double> a(16), b(16);
  kern::gelu_forward(a.data(), x.data(), 16);
  kern::set_parallel(true);
  kern::gelu_forward(b.data(), x.data(), 16);
  CHECK(a == b);
}
