#include "navlab/simd/kernels.hpp"
#include "navlab/simd/scalar_ref.hpp"

namespace navlab::simd {

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",
      &ref::dot<float>,
      &ref::gemv<float>,
      &ref::gemv_t_acc<float>,
      &ref::ger_acc<float>,
      &ref::axpy<float>,
      &ref::scale<float>,
      &ref::sum_squares<float>,
      &ref::rmsprop<float>,
  };
  return table;
}

}  // namespace navlab::simd
