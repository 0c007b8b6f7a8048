#include "corona_lab/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "corona_lab/errors.hpp"

namespace corona_lab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Containment: return "containment";
    case ErrorKind::Disjointness: return "disjointness";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Classification: return "classification";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Assertion: return "assertion";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double Rng::normal() {
  double u = uniform01();
  while (u <= 0.0) u = uniform01();
  const double v = uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

void KahanSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

double compensated_sum(const std::vector<double>& values) {
  KahanSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

int thread_budget() {
  if (const char* env = std::getenv("CORONA_LAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, &errors, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Estimate mean_estimate(const std::vector<double>& samples) {
  Estimate e;
  e.trials = static_cast<std::int64_t>(samples.size());
  if (samples.empty()) return e;
  e.value = compensated_sum(samples) / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    KahanSum sq;
    for (double s : samples) sq.add((s - e.value) * (s - e.value));
    const double var = sq.value() / static_cast<double>(samples.size() - 1);
    e.std_error = std::sqrt(var / static_cast<double>(samples.size()));
  }
  return e;
}

}  // namespace corona_lab
