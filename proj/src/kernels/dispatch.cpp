#include "mpf/kernels/kernels.hpp"

namespace mpf::kernels {

#ifdef MPF_HAVE_AVX2
const Ops* avx2_ops();  // defined in avx2.cpp, compiled with -mavx2 -mfma
bool avx2_supported();
#endif

namespace {

const Ops kScalarOps = {
    &scalar::dot<float>,  &scalar::axpy<float>, &scalar::scale<float>,
    &scalar::vadd<float>, &scalar::vmul<float>, &scalar::vsum<float>,
    &scalar::relu<float>, &scalar::relu_mask<float>,
};

struct Active {
  const Ops* table;
  const char* name;
};

Active pick_default() {
#ifdef MPF_HAVE_AVX2
  if (avx2_supported()) return {avx2_ops(), "avx2"};
#endif
  return {&kScalarOps, "scalar"};
}

Active& active() {
  static Active a = pick_default();
  return a;
}

}  // namespace

const Ops& ops() { return *active().table; }

const char* backend_name() { return active().name; }

bool set_backend(std::string_view name) {
  if (name == "scalar") {
    active() = {&kScalarOps, "scalar"};
    return true;
  }
#ifdef MPF_HAVE_AVX2
  if (name == "avx2" && avx2_supported()) {
    active() = {avx2_ops(), "avx2"};
    return true;
  }
#endif
  return false;
}

}  // namespace mpf::kernels
