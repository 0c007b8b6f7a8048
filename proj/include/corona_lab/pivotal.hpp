#pragma once

#include <string>
#include <vector>

#include "corona_lab/lattice.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

// Tail integral over outer \ inner of side^eps / (side + |center - x|)^(d + eps),
// evaluated at cell midpoints against the measure.
double poisson_functional(const Cube& inner, const Cube& outer, const Measure& measure, double epsilon = 1.0);

// Uncentered maximal function over every grid-aligned cube, Lebesgue averages of |g|.
GridFunction maximal_function(const GridFunction& g, const Grid& grid);

// Same, but only cubes inside `box` are used and only cells of `box` are filled.
GridFunction maximal_function_within(const GridFunction& g, const Grid& grid, const Cube& box);

// Sum over the family of P(J)^2 nu(J) with P(J) the tail functional of J inside `outer`.
double pivotal_sum(const Cube& outer, const std::vector<Cube>& family, const Measure& mu, const Measure& nu,
                   double epsilon = 1.0);

enum class PivotalSearch { SonPartitions, StoppingFamilies, Both };

struct PivotalOptions {
  PivotalSearch search = PivotalSearch::Both;
  int depth = -1;          // son-partition depth below each cube; -1 = down to grid resolution
  double epsilon = 1.0;
  Lattice lattice{};       // cubes I range over this lattice; defaults to the unshifted one
  bool lattice_set = false;
  std::vector<double> stopping_multipliers{100.0, 10.0, 1.0, 0.1};
};

struct PivotalReport {
  double K_estimate = 0.0;
  Cube witness;
  std::string witness_family;  // "partition" or "stopping"
  std::vector<Cube> witness_cubes;
  double K_tilde = 0.0;
  double buckley_ratio = 0.0;
  int depth = 0;
};

PivotalReport estimate_pivotal_constant(const Measure& mu, const Measure& nu, const PivotalOptions& options = {});

// Best son-partition ratio for one cube, with the maximizing family.
double best_partition_ratio(const Cube& outer, const Lattice& lattice, const Measure& mu, const Measure& nu,
                            int depth, double epsilon, std::vector<Cube>* family = nullptr);

// sup over dyadic I of int_I M(chi_I / w)^2 w / ([w]^2 w^{-1}(I)).
double buckley_ratio(const Weight& w, double a2 = 0.0);

}  // namespace corona_lab
