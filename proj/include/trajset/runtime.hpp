// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace trajset {

/// Process-wide setup for executables: keeps freed tensor buffers in the
/// heap instead of returning them to the kernel after every sample, and pins
/// BLAS to one thread. Setting TRAJSET_DETERMINISTIC=0 lets BLAS use its own
/// thread count, which gives up bitwise reproducibility.
void configure_runtime();

/// False when TRAJSET_DETERMINISTIC=0.
bool deterministic_mode();

}  // namespace trajset
