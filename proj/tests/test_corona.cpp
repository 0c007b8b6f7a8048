#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "corona_lab/corona.hpp"
#include "corona_lab/errors.hpp"
#include "corona_lab/pivotal.hpp"

using namespace corona_lab;

namespace {

// Largest criterion ratio P^2 nu / mu over proper subcubes of the root.
double max_root_ratio(const Lattice& lat, const Measure& mu, const Measure& nu) {
  double best = 0.0;
  for (const Cube& I : lat.descendants(lat.top(), lat.grid_level)) {
    if (I.level == 0) continue;
    const double p = poisson_functional(I, lat.top(), mu);
    best = std::max(best, p * p * nu.mass(I) / mu.mass(I));
  }
  return best;
}

std::vector<Weight> suite() {
  std::vector<Weight> out;
  for (double c : {2.0, 4.0, 8.0, 16.0, 64.0}) out.push_back(Weight::step(Grid(1, 6), c));
  out.push_back(Weight::step(Grid(1, 6), 64.0, {0.40625, 0, 0}, 0.03125));
  for (double a : {-0.9, -0.5, 0.5, 0.9}) out.push_back(Weight::power(Grid(1, 7), a));
  out.push_back(Weight::step(Grid(2, 4), 8.0, {0.25, 0.25, 0.0}, 0.5));
  return out;
}

}  // namespace

TEST_CASE("stopping trees of trivial configurations") {
  const Weight one = Weight::constant(Grid(1, 6));
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  const double K = estimate_pivotal_constant(one.mu(), one.nu()).K_estimate;
  CHECK(max_root_ratio(lat, one.mu(), one.nu()) < 100.0 * K);
  const StoppingTree tree = build_stopping_tree(lat.top(), lat, one.mu(), one.nu(), K);
  CHECK(tree.nodes.size() == 1);
  CHECK(packing_check(tree, one.mu()).passed);

  const Weight s = Weight::step(Grid(1, 6), 16.0);
  CoronaOptions inf;
  inf.threshold_multiplier = std::numeric_limits<double>::infinity();
  CHECK(build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 1e-9, inf).nodes.size() == 1);
  CHECK_THROWS_AS(build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 0.0), Error);
}

TEST_CASE("lowering K below a firing ratio creates stopping cubes") {
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  for (double c : {2.0, 4.0}) {
    const Weight s = Weight::step(Grid(1, 6), c);
    const double top_ratio = max_root_ratio(lat, s.mu(), s.nu());
    const double K_quiet = top_ratio / 100.0 * 1.01;
    const StoppingTree quiet = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), K_quiet);
    CHECK(quiet.nodes.size() == 1);
    const StoppingTree fired = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), top_ratio / 200.0);
    REQUIRE(fired.nodes.size() >= 2);
    for (std::size_t i = 1; i < fired.nodes.size(); ++i) {
      const auto& n = fired.nodes[i];
      CHECK(n.ratio >= 100.0 * fired.K);
      CHECK(n.generation == fired.nodes[static_cast<std::size_t>(n.parent)].generation + 1);
      CHECK(fired.nodes[static_cast<std::size_t>(n.parent)].cube.contains(n.cube));
    }
  }
}

TEST_CASE("stopping cubes are maximal") {
  const Weight s = Weight::step(Grid(1, 6), 64.0, {0.40625, 0, 0}, 0.03125);
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  const StoppingTree tree = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 1.0, {0.1, 1.0});
  REQUIRE(tree.nodes.size() >= 2);
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    const Cube parent = tree.nodes[static_cast<std::size_t>(n.parent)].cube;
    for (int level = parent.level + 1; level < n.cube.level; ++level) {
      const Cube a = lat.ancestor(n.cube, level);
      const double p = poisson_functional(a, parent, s.mu());
      CHECK(p * p * s.nu().mass(a) / s.mu().mass(a) < tree.threshold_multiplier * tree.K);
    }
  }
}

TEST_CASE("packing with K from the pivotal search") {
  for (const Weight& w : suite()) {
    const Grid& g = w.grid();
    const Lattice lat{g.dim, g.level, {0, 0, 0}, 0};
    const double K = estimate_pivotal_constant(w.mu(), w.nu()).K_estimate;
    const StoppingTree tree = build_stopping_tree(lat.top(), lat, w.mu(), w.nu(), K);
    const PackingReport rep = packing_check(tree, w.mu());
    CHECK(rep.passed);
    CHECK(rep.violations.empty());
    CHECK(rep.max_child_fraction <= 0.5 + 1e-12);
    CHECK(rep.generation_ok);
    CHECK(rep.max_subtree_ratio <= 2.0 + 1e-12);
  }
}

TEST_CASE("an injected node violating the packing is detected") {
  const Weight one = Weight::constant(Grid(1, 6));
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  StoppingTree tree = build_stopping_tree(lat.top(), lat, one.mu(), one.nu(), 10.0);
  const int idx = inject_node(tree, lat.cube(1, {0, 0, 0}));
  inject_node(tree, lat.cube(2, {2, 0, 0}));
  const PackingReport rep = packing_check(tree, one.mu());
  CHECK_FALSE(rep.passed);
  REQUIRE_FALSE(rep.violations.empty());
  CHECK(rep.violations[0].node == 0);
  CHECK(rep.violations[0].fraction == doctest::Approx(0.75));
  CHECK(tree.nodes[static_cast<std::size_t>(idx)].generation == 1);
}

TEST_CASE("shells partition the cubes") {
  const Weight s = Weight::step(Grid(1, 6), 64.0, {0.40625, 0, 0}, 0.03125);
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  const Lattice other{1, 6, {5, 0, 0}, 1};

  const StoppingTree root_only = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 1e6);
  const auto all = lat.descendants(lat.top(), 6);
  CHECK(shell(root_only, 0, all).size() == all.size());

  const StoppingTree tree = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 1.0, {0.1, 1.0});
  REQUIRE(tree.nodes.size() >= 3);
  for (const auto* cubes : {&all}) {
    std::set<Cube> seen;
    std::size_t total = 0;
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      for (const Cube& c : shell(tree, static_cast<int>(n), *cubes)) {
        CHECK(seen.insert(c).second);
        ++total;
      }
    }
    CHECK(total == cubes->size());
  }
  // Cubes of the other lattice inside the root land in exactly one shell too.
  std::vector<Cube> inside;
  for (int level = 1; level <= 6; ++level) {
    for (const Cube& c : other.cubes_at_level(level)) {
      if (lat.top().contains(c)) inside.push_back(c);
    }
  }
  std::size_t counted = 0;
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) counted += shell(tree, static_cast<int>(n), inside).size();
  CHECK(counted == inside.size());

  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    const auto own = shell(tree, static_cast<int>(n), all);
    CHECK(std::find(own.begin(), own.end(), tree.nodes[n].cube) != own.end());
    for (int ch : tree.nodes[n].children) {
      CHECK(std::find(own.begin(), own.end(), tree.nodes[static_cast<std::size_t>(ch)].cube) == own.end());
    }
  }
}

TEST_CASE("stopping distance never exceeds dyadic distance") {
  const Weight s = Weight::step(Grid(1, 6), 64.0, {0.40625, 0, 0}, 0.03125);
  const Lattice lat{1, 6, {0, 0, 0}, 0};
  const StoppingTree tree = build_stopping_tree(lat.top(), lat, s.mu(), s.nu(), 1.0, {0.1, 1.0});
  int pairs = 0;
  for (std::size_t a = 0; a < tree.nodes.size(); ++a) {
    for (std::size_t b = 0; b < tree.nodes.size(); ++b) {
      const int r = stopping_distance(tree, static_cast<int>(a), static_cast<int>(b));
      if (r < 0) continue;
      ++pairs;
      CHECK(r <= dyadic_distance(tree.nodes[a].cube, tree.nodes[b].cube));
    }
  }
  CHECK(pairs >= static_cast<int>(tree.nodes.size()));
}

TEST_CASE("Carleson embedding") {
  const int L = 5;
  const Weight one = Weight::constant(Grid(1, L));
  const Lattice lat{1, L, {0, 0, 0}, 0};
  const Measure mu = one.mu();

  std::vector<std::pair<Cube, double>> leaves;
  for (const Cube& c : lat.cubes_at_level(L)) leaves.emplace_back(c, mu.mass(c));
  const CarlesonReport lr = carleson_embedding_check(leaves, lat, mu, 1.0);
  CHECK(lr.passed());
  CHECK(lr.carleson_constant == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lr.embedding_ratio <= 1.0 + 1e-12);

  std::vector<std::pair<Cube, double>> zero;
  for (const Cube& c : lat.cubes_at_level(2)) zero.emplace_back(c, 0.0);
  const CarlesonReport zr = carleson_embedding_check(zero, lat, mu, 1.0);
  CHECK(zr.embedding_ratio == 0.0);
  CHECK(zr.carleson_constant == 0.0);

  std::vector<std::pair<Cube, double>> stack;
  for (const Cube& c : lat.descendants(lat.top(), L)) stack.emplace_back(c, mu.mass(c));
  const CarlesonReport sr = carleson_embedding_check(stack, lat, mu, L + 1.0);
  CHECK(sr.carleson_constant == doctest::Approx(L + 1.0).epsilon(1e-12));
  CHECK(sr.passed());
  CHECK(sr.embedding_ratio <= 4.0 * (L + 1.0));
  CHECK(sr.exact_ratio >= sr.probe_ratio * (1.0 - 1e-9));

  // Random weighted sequences respect the 4C bound with C measured.
  Rng rng(12);
  const Weight w = Weight::power(Grid(1, L), 0.7);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::pair<Cube, double>> seq;
    for (const Cube& c : lat.descendants(lat.top(), L)) seq.emplace_back(c, rng.uniform01() * w.mu().mass(c));
    const CarlesonReport probe = carleson_embedding_check(seq, lat, w.mu(), 1e9);
    const CarlesonReport rep = carleson_embedding_check(seq, lat, w.mu(), probe.carleson_constant);
    CHECK(rep.carleson_ok);
    CHECK(rep.embedding_ok);
  }
}
