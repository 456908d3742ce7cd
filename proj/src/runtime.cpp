// SPDX-License-Identifier: Apache-2.0
#include "trajset/runtime.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <cblas.h>

namespace trajset {

bool deterministic_mode() {
  const char* v = std::getenv("TRAJSET_DETERMINISTIC");
  return v == nullptr || std::strcmp(v, "0") != 0;
}

void configure_runtime() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
  if (deterministic_mode()) openblas_set_num_threads(1);
}

}  // namespace trajset
