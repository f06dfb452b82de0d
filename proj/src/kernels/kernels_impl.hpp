#pragma once

#include "mlg/kernels/kernels.hpp"

namespace mlg::kernels {
namespace scalar {
const Table& table();
}
#if defined(MLG_HAVE_AVX2)
namespace avx2 {
const Table& table();
}
#endif
}  // namespace mlg::kernels
