#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mlpath {

// Counter-based stream generator (splitmix64 core). A (seed, stream) pair
// owns a disjoint window of 2^24 counters, so per-sample streams are
// independent and there is no global state: sampling parallelizes over
// stream indices and the output depends only on (seed, stream, draw index).
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : counter_(mix(seed + kGamma) + (stream << 24) * kGamma) {}

  std::uint64_t next_u64() noexcept {
    counter_ += kGamma;
    return mix(counter_);
  }

  // Uniform on (0, 1]; never returns 0, so log() below is safe.
  double next_uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t counter_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Worker cap: MLPATH_THREADS if set, else hardware concurrency.
inline int max_worker_threads() {
  if (const char* env = std::getenv("MLPATH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v < 256 ? v : 256);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(chunk, begin, end) over a fixed 256-way partition of [0, count)
// and returns the per-chunk results in chunk order. The partition does not
// depend on the worker count, so ordered reductions over the results are
// bitwise reproducible under any thread setting.
template <class T, class ChunkFn>
std::vector<T> run_chunked(std::int64_t count, ChunkFn fn, int threads = 0) {
  const int n_chunks =
      count <= 0 ? 0 : static_cast<int>(count < 256 ? count : 256);
  std::vector<T> out(static_cast<std::size_t>(n_chunks));
  if (n_chunks == 0) return out;
  if (threads <= 0) threads = max_worker_threads();
  if (threads > n_chunks) threads = n_chunks;
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
      const std::int64_t begin = count * c / n_chunks;
      const std::int64_t end = count * (c + 1) / n_chunks;
      out[static_cast<std::size_t>(c)] = fn(c, begin, end);
    }
  };
  if (threads <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

// Element-wise parallel loop with the same fixed partition.
template <class Fn>
void parallel_for(std::int64_t count, Fn fn, int threads = 0) {
  run_chunked<int>(
      count,
      [&](int, std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return 0;
      },
      threads);
}

}  // namespace mlpath
