#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include <errcalc/errors.hpp>
#include <errcalc/rng.hpp>

namespace errcalc {

// value +- CLT stderr from n i.i.d. samples.
struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
  std::uint64_t seed = 0;
};

// Raw-moment accumulator. Merging two accumulators is exact in the sense
// that the merged sums do not depend on how samples were partitioned,
// as long as the partition boundaries and merge order are fixed.
struct MomentAccumulator {
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  long n = 0;

  void add(double x) {
    const double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    ++n;
  }

  void merge(const MomentAccumulator& o) {
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
    n += o.n;
  }

  double mean() const { return n ? s1 / n : 0.0; }

  // unbiased sample variance
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double ss = s2 - n * m * m;
    return std::max(ss, 0.0) / (n - 1);
  }

  double stderr_mean() const {
    return n < 2 ? 0.0 : std::sqrt(variance() / n);
  }

  // central fourth moment
  double m4() const {
    if (n < 1) return 0.0;
    const double m = mean();
    return (s4 - 4 * m * s3 + 6 * m * m * s2 - 4 * m * m * m * s1) / n +
           m * m * m * m;
  }

  // CLT stderr of the sample variance, sqrt((m4 - s^4)/n)
  double stderr_variance() const {
    if (n < 2) return 0.0;
    const double v = variance();
    return std::sqrt(std::max(m4() - v * v, 0.0) / n);
  }
};

namespace detail {
// Fixed block size: partial results are indexed by block, so the merged
// value is bit-identical for any worker count.
inline constexpr long kMcBlock = 8192;
}  // namespace detail

// Runs block(rng, global_index) for each of n samples, grouped into fixed
// blocks; per-block partials are merged in block order on the caller
// thread. block_fn must be pure given its Rng.
template <class Partial, class BlockFn>
Partial run_blocks(long n, std::uint64_t seed, int workers, BlockFn block_fn) {
  if (n <= 0) return Partial{};
  const long nblocks = (n + detail::kMcBlock - 1) / detail::kMcBlock;
  std::vector<Partial> partials(static_cast<std::size_t>(nblocks));
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;

  auto work = [&] {
    for (;;) {
      const long b = next.fetch_add(1);
      if (b >= nblocks) return;
      try {
        Rng rng(seed, static_cast<std::uint64_t>(b));
        const long begin = b * detail::kMcBlock;
        const long end = std::min(n, begin + detail::kMcBlock);
        Partial p{};
        for (long i = begin; i < end; ++i) block_fn(rng, i, p);
        partials[static_cast<std::size_t>(b)] = p;
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  workers = std::max(1, workers);
  if (workers == 1 || nblocks == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const int count = std::min<long>(workers, nblocks);
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  Partial total{};
  for (const auto& p : partials) total.merge(p);
  return total;
}

// Moments of sample(rng) over n draws. Throws NonFiniteError on NaN/inf.
template <class SampleFn>
MomentAccumulator mc_moments(long n, std::uint64_t seed, int workers,
                             SampleFn sample) {
  return run_blocks<MomentAccumulator>(
      n, seed, workers, [&sample](Rng& rng, long /*i*/, MomentAccumulator& acc) {
        const double x = sample(rng);
        if (!std::isfinite(x))
          throw NonFiniteError("non-finite Monte Carlo sample");
        acc.add(x);
      });
}

template <class SampleFn>
MonteCarloEstimate mc_mean(long n, std::uint64_t seed, int workers,
                           SampleFn sample) {
  const MomentAccumulator acc = mc_moments(n, seed, workers, sample);
  return {acc.mean(), acc.stderr_mean(), acc.n, seed};
}

}  // namespace errcalc
