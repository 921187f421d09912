#include "role/kernels.hpp"

namespace role::kernels::detail {

const KernelTable* avx2_table() { return nullptr; }

}  // namespace role::kernels::detail
