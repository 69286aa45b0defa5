#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace semigraph {

/// Tags that separate independent randomness streams belonging to one trajectory.
enum class StreamTag : std::uint64_t {
  Clock = 0x636c6f636bULL,
  Chain = 0x636861696eULL,
  Market = 0x6d61726b6574ULL,
  Weights = 0x77656967687473ULL,
  Sampler = 0x73616d706c6572ULL,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed for stream (master, id, tag). Distinct triples give
/// statistically unrelated seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, StreamTag tag) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ id;
  h = splitmix64(s);
  s = h ^ static_cast<std::uint64_t>(tag);
  return splitmix64(s);
}

/// 64-bit Mersenne twister with portable (implementation-independent)
/// conversions to uniforms, exponentials and bounded integers.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t master, std::uint64_t id, StreamTag tag) {
    return Rng(derive_seed(master, id, tag));
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the result exactly uniform.
    const std::uint64_t limit = max() - (max() % n + 1) % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x <= limit) return x % n;
    }
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

inline unsigned default_thread_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1U : n;
}

/// Runs body(i) for every i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into slot i, so the output does
/// not depend on scheduling. The first exception thrown by a worker is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace semigraph
