#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace corona_lab {

// Portable deterministic generator: raw 64-bit output of mt19937_64 mapped
// by hand, so results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform01();                       // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::uint64_t below(std::uint64_t n);     // [0, n), unbiased
  std::int64_t between(std::int64_t lo, std::int64_t hi);  // [lo, hi] inclusive
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Neumaier compensated accumulator.
class KahanSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(const std::vector<double>& values);

// Thread budget: CORONA_LAB_THREADS if set (>= 1), otherwise hardware concurrency.
int thread_budget();

// Runs body(i) for i in [0, n). Work is split in contiguous blocks; callers write
// results by index so the outcome never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
};

Estimate mean_estimate(const std::vector<double>& samples);

}  // namespace corona_lab
