#define NUER_KERNEL_NS omp
#ifdef _OPENMP
#define NUER_FOR _Pragma("omp parallel for schedule(static)")
#else
#define NUER_FOR
#endif
#include "kernels_impl.inc"
