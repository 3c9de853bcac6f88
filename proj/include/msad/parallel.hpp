#pragma once

#include <cstddef>
#include <functional>

namespace msad {

/// Number of worker threads used by parallel stages. Defaults to the MSAD_WORKERS
/// environment variable, else the hardware concurrency.
std::size_t worker_count();

/// Overrides worker_count(); 0 restores the default.
void set_worker_count(std::size_t workers);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never overlap, so
/// bodies that only write to their own indices give results independent of scheduling.
void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Runs body(i) for every i in [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace msad
