#define NUER_KERNEL_NS ref
#define NUER_FOR
#include "kernels_impl.inc"
