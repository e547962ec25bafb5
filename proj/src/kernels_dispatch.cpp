#include "nuer/kernels.hpp"

#include <atomic>

namespace nuer::kern {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

#define NUER_DISPATCH(call) \
  if (parallel_enabled()) { \
    omp::call;              \
  } else {                  \
    ref::call;              \
  }

void linear_forward(double* y, const double* x, const double* wt, const double* b,
                    int t, int in, int out) {
  NUER_DISPATCH(linear_forward(y, x, wt, b, t, in, out))
}
void linear_backward(double* dx, double* dwt, double* db, const double* g, const double* x,
                     const double* wt, int t, int in, int out) {
  NUER_DISPATCH(linear_backward(dx, dwt, db, g, x, wt, t, in, out))
}
void layernorm_forward(double* y, double* mean, double* rstd, const double* x,
                       const double* gain, const double* bias, int rows, int d) {
  NUER_DISPATCH(layernorm_forward(y, mean, rstd, x, gain, bias, rows, d))
}
void layernorm_backward(double* dx, double* dgain, double* dbias, const double* g,
                        const double* x, const double* mean, const double* rstd,
                        const double* gain, int rows, int d) {
  NUER_DISPATCH(layernorm_backward(dx, dgain, dbias, g, x, mean, rstd, gain, rows, d))
}
void gelu_forward(double* y, const double* x, size_t n) { NUER_DISPATCH(gelu_forward(y, x, n)) }
void gelu_backward(double* dx, const double* g, const double* x, size_t n) {
  NUER_DISPATCH(gelu_backward(dx, g, x, n))
}
void softmax_rows(double* p, const double* logits, int rows, int cols) {
  NUER_DISPATCH(softmax_rows(p, logits, rows, cols))
}
void attention_forward(double* ctx, double* probs, const double* q, const double* k,
                       const double* v, const int* mask, int t, int heads, int dh) {
  NUER_DISPATCH(attention_forward(ctx, probs, q, k, v, mask, t, heads, dh))
}
void attention_backward(double* dq, double* dk, double* dv, const double* g,
                        const double* probs, const double* q, const double* k, const double* v,
                        int t, int heads, int dh) {
  NUER_DISPATCH(attention_backward(dq, dk, dv, g, probs, q, k, v, t, heads, dh))
}
void embedding_backward(double* dtable, const double* g, const int* ids, int t, int d) {
  NUER_DISPATCH(embedding_backward(dtable, g, ids, t, d))
}
void adam_update(double* theta, const double* g, double* m, double* v, size_t n, double eta,
                 double beta1, double beta2, double epsilon, double bias1, double bias2) {
  NUER_DISPATCH(adam_update(theta, g, m, v, n, eta, beta1, beta2, epsilon, bias1, bias2))
}
void add_inplace(double* y, const double* x, size_t n) { NUER_DISPATCH(add_inplace(y, x, n)) }

#undef NUER_DISPATCH

}  // namespace nuer::kern
