#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stchain {

using cplx = std::complex<double>;
using code_t = std::uint64_t;

// Error taxonomy. The CLI maps InvalidArgument to exit code 2 and the
// remaining solver/capacity failures to exit code 3.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual(residual) {}
  double residual;
};

struct SearchExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnsembleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxSites = 28;
// Largest Hilbert-space dimension a SpinBasis may hold.
inline constexpr std::size_t kMaxDimension = std::size_t{1} << 26;
// Operations that need full spectra or explicit 2^N x 2^N objects.
inline constexpr int kDenseSiteCap = 14;
// Dense diagonalization of a single block (sector or full space).
inline constexpr std::size_t kDenseBlockCap = 4096;

namespace detail {

inline long env_long(const char* name, long fallback) {
  if (const char* raw = std::getenv(name)) {
    char* end = nullptr;
    long v = std::strtol(raw, &end, 10);
    if (end != raw && v > 0) return v;
  }
  return fallback;
}

inline int& thread_cap_storage() {
  static int cap = static_cast<int>(env_long("STCHAIN_THREADS", 0));
  return cap;
}

inline std::size_t& memory_cap_storage() {
  static std::size_t cap =
      static_cast<std::size_t>(env_long("STCHAIN_MEMORY_CAP_MB", 2048)) << 20;
  return cap;
}

}  // namespace detail

/// Upper bound on worker threads used internally. 0 means hardware concurrency.
inline int thread_cap() {
  int cap = detail::thread_cap_storage();
  if (cap > 0) return cap;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_thread_cap(int threads) { detail::thread_cap_storage() = std::max(0, threads); }

/// Soft memory budget (bytes) for work buffers such as Krylov bases and
/// triplet-profile coefficient vectors.
inline std::size_t memory_cap() { return detail::memory_cap_storage(); }

inline void set_memory_cap(std::size_t bytes) { detail::memory_cap_storage() = bytes; }

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Chunk boundaries never affect per-index results; callers write disjoint
/// output ranges.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0, std::size_t min_chunk = 4096) {
  if (threads <= 0) threads = thread_cap();
  std::size_t workers = std::min<std::size_t>(threads, (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

inline int popcount(code_t c) { return __builtin_popcountll(c); }

inline double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Binomial(n, p) probability mass vector of length n + 1.
inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(n + 1);
  for (int k = 0; k <= n; ++k) {
    double c = binomial_coefficient(n, k);
    pmf[k] = c * std::pow(p, k) * std::pow(1.0 - p, n - k);
  }
  return pmf;
}

}  // namespace stchain
