#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace fresel {

// Global worker count used by parallel_for. 0 means "not set yet": fall back
// to FRESEL_THREADS, then to hardware_concurrency.
void set_threads(int n);
int effective_threads();

// Index-sharded parallel map. Results must be written by index by the caller
// so that aggregation order never depends on the worker count.
void parallel_for(int n_items, const std::function<void(int)>& body);

// splitmix64 finalizer. Used to derive independent child seeds from a base
// seed plus a salt without correlated low bits.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// Writes content to path via a temp file in the same directory plus rename,
// so readers never observe a partially written file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// "%.6g" and "%.4f" formatting for CSV summaries.
std::string fmt_g6(double v);
std::string fmt_f4(double v);

// Round to 4 decimal places (selection frequencies are quantized before
// serialization so reports are stable across platforms).
double round4(double v);

}  // namespace fresel
