#include <doctest.h>

#include <cmath>
#include <vector>

#include "corona_lab/errors.hpp"
#include "corona_lab/martingale.hpp"

using namespace corona_lab;

namespace {

Weight random_weight(const Grid& g, Rng& rng, double lo = 0.5, double hi = 2.0) {
  std::vector<double> v(static_cast<std::size_t>(g.size()));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Weight(g, std::move(v));
}

// Random function supported in the central cube [1/4, 3/4)^d.
GridFunction central_random(const Grid& g, Rng& rng) {
  GridFunction f(static_cast<std::size_t>(g.size()), 0.0);
  const Index n = g.side();
  for (Index i = 0; i < g.size(); ++i) {
    const IVec c = g.coords(i);
    bool inside = true;
    for (int k = 0; k < g.dim; ++k) inside = inside && 4 * c[k] >= n && 4 * c[k] < 3 * n;
    if (inside) f[static_cast<std::size_t>(i)] = rng.normal();
  }
  return f;
}

double max_abs_diff(const GridFunction& a, const GridFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const GridFunction& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("constant functions have no differences") {
  const Grid g(1, 5);
  Rng rng(1);
  const Weight w = random_weight(g, rng);
  const Lattice lat{1, 5, {0, 0, 0}, 0};
  const GridFunction f(static_cast<std::size_t>(g.size()), 2.5);
  const auto dec = decompose(f, w.mu(), lat);
  CHECK(dec.top == doctest::Approx(2.5).epsilon(1e-14));
  for (const auto& co : dec.coeffs) {
    for (double v : co.child_values) CHECK(std::abs(v) <= 1e-14);
  }
  CHECK(max_abs(delta_apply(f, lat.cube(2, {1, 0, 0}), w.mu())) <= 1e-14);
}

TEST_CASE("Haar function has a single coefficient") {
  const Grid g(1, 6);
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  GridFunction f(static_cast<std::size_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i) f[static_cast<std::size_t>(i)] = 2 * i < g.size() ? 1.0 : -1.0;
  const auto dec = decompose(f, Measure::lebesgue(g), lat);
  CHECK(dec.top == 0.0);
  int nonzero = 0;
  for (const auto& co : dec.coeffs) {
    if (co.is_zero()) continue;
    ++nonzero;
    CHECK(co.cube == lat.top());
    CHECK(co.child_values[0] == 1.0);
    CHECK(co.child_values[1] == -1.0);
  }
  CHECK(nonzero == 1);
}

TEST_CASE("Parseval and reconstruction on a random suite") {
  Rng rng(2024);
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 2;
    const int L = d == 1 ? 2 + t % 5 : 2 + t % 3;
    const Grid g(d, L);
    const Weight w = random_weight(g, rng);
    const Index q = g.side() / 4;
    const Lattice lat{d, L, {rng.between(-q, q), rng.between(-q, q), 0}, 0};
    const GridFunction f = central_random(g, rng);
    const Measure mu = w.mu();
    const auto dec = decompose(f, mu, lat);
    const GridFunction back = dec.reconstruct(g);
    CHECK(max_abs_diff(back, f) <= 1e-10 * std::max(1.0, max_abs(f)));
    KahanSum energy;
    energy.add(dec.top * dec.top * mu.mass(dec.top_cube));
    for (const auto& co : dec.coeffs) energy.add(co.norm_sq(mu));
    const double total = mu.inner(f, f);
    CHECK(std::abs(energy.value() - total) <= 1e-10 * total);
  }
}

TEST_CASE("differences are orthogonal, idempotent and mean zero") {
  const Grid g(1, 4);
  Rng rng(5);
  const Weight w = random_weight(g, rng);
  const Measure mu = w.mu();
  const Lattice lat{1, 4, {0, 0, 0}, 0};
  GridFunction f(static_cast<std::size_t>(g.size()));
  for (double& x : f) x = rng.normal();
  std::vector<Cube> cubes;
  for (int level = 0; level < 4; ++level) {
    for (const Cube& c : lat.cubes_at_level(level)) cubes.push_back(c);
  }
  std::vector<GridFunction> parts;
  for (const Cube& c : cubes) parts.push_back(delta_apply(f, c, mu));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double ni = mu.norm(parts[i]);
    CHECK(std::abs(mu.integral(cubes[i], parts[i])) <= 1e-12 * (1.0 + ni));
    const GridFunction twice = delta_apply(parts[i], cubes[i], mu);
    CHECK(max_abs_diff(twice, parts[i]) <= 1e-12 * (1.0 + max_abs(parts[i])));
    for (std::size_t j = i + 1; j < parts.size(); ++j) {
      CHECK(std::abs(mu.inner(parts[i], parts[j])) <= 1e-12 * (1.0 + ni * mu.norm(parts[j])));
    }
    // Support inside the cube.
    for (Index c = 0; c < g.size(); ++c) {
      if (!cubes[i].contains_cell(g.coords(c))) CHECK(parts[i][static_cast<std::size_t>(c)] == 0.0);
    }
  }
}

TEST_CASE("child values are bounded by the difference norm") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const Grid g(1 + t % 2, 4);
    const Weight w = random_weight(g, rng, 0.1, 10.0);
    const Measure mu = w.mu();
    GridFunction f(static_cast<std::size_t>(g.size()));
    for (double& x : f) x = rng.normal();
    const Lattice lat{g.dim, 4, {0, 0, 0}, 0};
    for (const Cube& c : lat.cubes_at_level(static_cast<int>(rng.below(4)))) {
      const Coefficient co = delta_coefficient(f, c, mu);
      const double nrm = std::sqrt(co.norm_sq(mu));
      const auto sons = children(c);
      for (std::size_t s = 0; s < sons.size(); ++s) {
        CHECK(std::abs(co.child_values[s]) <= nrm / std::sqrt(mu.mass(sons[s])) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("support escaping the top cube") {
  const Grid g(1, 4);
  const Lattice lat{1, 4, {2, 0, 0}, 0};
  GridFunction f(static_cast<std::size_t>(g.size()), 0.0);
  f[0] = 1.0;
  CHECK_THROWS_AS(decompose(f, Measure::lebesgue(g), lat), Error);
  CHECK_FALSE(supported_in_center(f, g));
}

TEST_CASE("good and bad split") {
  Rng rng(13);
  const int L = 6;
  const Grid g(1, L);
  for (int t = 0; t < 10; ++t) {
    const Weight w = random_weight(g, rng);
    const Measure mu = w.mu();
    const GridFunction f = central_random(g, rng);
    const LatticePair pair = sample_lattice_pair(300 + static_cast<std::uint64_t>(t), 1, 1.0, 2, L);
    const auto dec = decompose(f, mu, pair.mu);
    const auto split = split_good_bad(dec, pair, g);
    GridFunction sum(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) sum[i] = split.good[i] + split.bad[i];
    CHECK(max_abs_diff(sum, f) <= 1e-10 * max_abs(f));
    const double total = mu.inner(f, f);
    CHECK(std::abs(mu.inner(split.good, split.good) + mu.inner(split.bad, split.bad) - total) <= 1e-10 * total);
    for (std::size_t i = 0; i < dec.coeffs.size(); ++i) {
      CHECK(split.essentially_bad[i] == classify_badness(dec.coeffs[i].cube, pair).essentially_bad);
    }
  }
  const LatticePair far = sample_lattice_pair(1, 1, 1.0, L + 1, L);
  const GridFunction f = central_random(g, rng);
  const auto split = split_good_bad(decompose(f, Measure::lebesgue(g), far.mu), far, g);
  CHECK(max_abs(split.bad) == 0.0);
}

TEST_CASE("bad mass expectation") {
  const int L = 6;
  const Grid g(1, L);
  Rng rng(21);
  const Weight w = random_weight(g, rng);
  const Measure mu = w.mu();

  const GridFunction zero(static_cast<std::size_t>(g.size()), 0.0);
  CHECK(bad_mass_expectation(zero, mu, 2, 10, 1).value == 0.0);

  // Constant on the domain part of the top cube of an aligned lattice.
  const GridFunction flat(static_cast<std::size_t>(g.size()), 1.0);
  const LatticePair aligned = make_lattice_pair(1, 1.0, 1, L, {0, 0, 0}, {3, 0, 0});
  CHECK(max_abs(split_good_bad(decompose(flat, mu, aligned.mu), aligned, g).bad) <= 1e-14);

  const GridFunction f = central_random(g, rng);
  const Estimate one = bad_mass_expectation(f, mu, 2, 1, 77);
  const LatticePair pair = sample_lattice_pair(77, 1, 1.0, 2, L);
  const auto split = split_good_bad(decompose(f, mu, pair.mu), pair, g);
  CHECK(one.value == doctest::Approx(mu.norm(split.bad) / mu.norm(f)).epsilon(1e-14));

  const Estimate a = bad_mass_expectation(f, mu, 2, 200, 9);
  const Estimate b = bad_mass_expectation(f, mu, 2, 200, 9);
  CHECK(a.value == b.value);
  for (int r = 1; r <= 3; ++r) {
    const Estimate lo = bad_mass_expectation(f, mu, r, 300, 40);
    const Estimate hi = bad_mass_expectation(f, mu, r + 2, 300, 40);
    const double se = std::sqrt(lo.std_error * lo.std_error + hi.std_error * hi.std_error);
    CHECK(hi.value <= lo.value + 3.0 * se);
  }
}
