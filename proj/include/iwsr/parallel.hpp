// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace iwsr {

/// Number of worker threads kernels may use. Initialised from the
/// IWSR_THREADS environment variable, else the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one thread,
/// so kernels that write disjoint outputs per index are deterministic for
/// any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t min_per_thread = 1);

}  // namespace iwsr
