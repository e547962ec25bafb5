#pragma once

#include <cstddef>

// Numeric kernels, compiled twice from one implementation: kern::ref is the
// plain serial reference, kern::omp adds OpenMP worksharing. Every output
// element is produced by exactly one thread with a fixed serial reduction
// order, so the two flavors are bit-identical and results do not depend on
// the thread count.
//
// Conventions: row-major buffers; linear weights are stored transposed as
// (in, out) so the hot loops run over contiguous memory. *_backward kernels
// overwrite activation gradients (dx, dq, ...) and accumulate (+=) into
// parameter gradients (dwt, db, dgain, ...).

// clang-format off
#define NUER_DECLARE_KERNELS                                                                        \
  void linear_forward(double* y, const double* x, const double* wt, const double* b,                \
                      int t, int in, int out);                                                      \
  void linear_backward(double* dx, double* dwt, double* db, const double* g, const double* x,       \
                       const double* wt, int t, int in, int out);                                   \
  void layernorm_forward(double* y, double* mean, double* rstd, const double* x,                    \
                         const double* gain, const double* bias, int rows, int d);                  \
  void layernorm_backward(double* dx, double* dgain, double* dbias, const double* g,                \
                          const double* x, const double* mean, const double* rstd,                  \
                          const double* gain, int rows, int d);                                     \
  void gelu_forward(double* y, const double* x, size_t n);                                          \
  void gelu_backward(double* dx, const double* g, const double* x, size_t n);                       \
  void softmax_rows(double* p, const double* logits, int rows, int cols);                           \
  void attention_forward(double* ctx, double* probs, const double* q, const double* k,              \
                         const double* v, const int* mask, int t, int heads, int dh);               \
  void attention_backward(double* dq, double* dk, double* dv, const double* g,                      \
                          const double* probs, const double* q, const double* k, const double* v,   \
                          int t, int heads, int dh);                                                \
  void embedding_backward(double* dtable, const double* g, const int* ids, int t, int d);           \
  void adam_update(double* theta, const double* g, double* m, double* v, size_t n, double eta,      \
                   double beta1, double beta2, double epsilon, double bias1, double bias2);         \
  void add_inplace(double* y, const double* x, size_t n);
// clang-format on

namespace nuer::kern {

namespace ref {
NUER_DECLARE_KERNELS
}

namespace omp {
NUER_DECLARE_KERNELS
}

// Process-wide backend switch; defaults to the OpenMP flavor.
void set_parallel(bool enabled);
bool parallel_enabled();

// Dispatching wrappers used by the model code.
void linear_forward(double* y, const double* x, const double* wt, const double* b,
                    int t, int in, int out);
void linear_backward(double* dx, double* dwt, double* db, const double* g, const double* x,
                     const double* wt, int t, int in, int out);
void layernorm_forward(double* y, double* mean, double* rstd, const double* x,
                       const double* gain, const double* bias, int rows, int d);
void layernorm_backward(double* dx, double* dgain, double* dbias, const double* g,
                        const double* x, const double* mean, const double* rstd,
                        const double* gain, int rows, int d);
void gelu_forward(double* y, const double* x, size_t n);
void gelu_backward(double* dx, const double* g, const double* x, size_t n);
void softmax_rows(double* p, const double* logits, int rows, int cols);
void attention_forward(double* ctx, double* probs, const double* q, const double* k,
                       const double* v, const int* mask, int t, int heads, int dh);
void attention_backward(double* dq, double* dk, double* dv, const double* g,
                        const double* probs, const double* q, const double* k, const double* v,
                        int t, int heads, int dh);
void embedding_backward(double* dtable, const double* g, const int* ids, int t, int d);
void adam_update(double* theta, const double* g, double* m, double* v, size_t n, double eta,
                 double beta1, double beta2, double epsilon, double bias1, double bias2);
void add_inplace(double* y, const double* x, size_t n);

}  // namespace nuer::kern
