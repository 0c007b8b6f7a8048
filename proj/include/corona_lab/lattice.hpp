#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "corona_lab/grid.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

// Dyadic lattice shifted by an integer number of grid cells. Only cubes with side <= 1
// that meet the unit domain are ever enumerated.
struct Lattice {
  int dim = 1;
  int grid_level = 0;
  IVec shift{0, 0, 0};
  int id = 0;

  Grid grid() const { return Grid(dim, grid_level); }
  Cube cube(int level, const IVec& index) const;
  Cube top() const { return cube(0, {0, 0, 0}); }
  Cube containing(const IVec& cell, int level) const;
  Cube ancestor(const Cube& c, int level) const;
  Cube parent(const Cube& c) const;
  bool member(const Cube& c) const;
  std::vector<Cube> cubes_at_level(int level) const;
  // Cubes of this lattice inside root that meet the domain, ordered by level then anchor.
  std::vector<Cube> descendants(const Cube& root, int max_level) const;
};

// All 2^d sons, including any that fall outside the domain.
std::vector<Cube> children(const Cube& c);

struct LatticePair {
  Lattice mu;
  Lattice nu;
  double epsilon = 1.0;
  double delta = 0.25;
  int r = 1;
  std::uint64_t seed = 0;

  int dim() const { return mu.dim; }
  int grid_level() const { return mu.grid_level; }
  const Lattice& lattice(int id) const { return id == 0 ? mu : nu; }
  const Lattice& other(int id) const { return id == 0 ? nu : mu; }
};

double goodness_delta(int dim, double epsilon);

LatticePair sample_lattice_pair(std::uint64_t seed, int dim, double epsilon, int r, int grid_level);
LatticePair make_lattice_pair(int dim, double epsilon, int r, int grid_level, const IVec& shift_mu,
                              const IVec& shift_nu);

// Distance from the closed cube I to the union of the boundaries of the sons of J.
double skeleton_distance(const Cube& J, const Cube& I);

struct BadnessResult {
  bool bad = false;
  bool essentially_bad = false;
  std::optional<Cube> witness;
  std::optional<Cube> essential_witness;

  bool good() const { return !essentially_bad; }
  const char* label() const;
};

BadnessResult classify_badness(const Cube& I, const Lattice& other, double delta, int r);
BadnessResult classify_badness(const Cube& I, const LatticePair& pair);

struct BadnessProbabilityOptions {
  int dim = 1;
  double epsilon = 1.0;
  int grid_level = -1;  // default: level + 4
};

// Fraction of sampled pairs in which the mu-cube at `level` containing the domain
// center is essentially bad; trial i uses seed base_seed + i.
Estimate badness_probability(int level, int r, std::int64_t trials, std::uint64_t base_seed,
                             const BadnessProbabilityOptions& options = {});

}  // namespace corona_lab
