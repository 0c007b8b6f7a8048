#pragma once

#include <cstdint>
#include <vector>

#include "corona_lab/lattice.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

// Martingale difference on one cube: constant value per son, ordered as children().
struct Coefficient {
  Cube cube;
  std::vector<double> child_values;

  bool is_zero() const;
  GridFunction as_function(const Grid& grid) const;
  double norm_sq(const Measure& measure) const;
};

enum class MeasureTag { Mu, Nu, Lebesgue };

struct MartingaleDecomposition {
  Cube top_cube;
  double top = 0.0;  // average of f on the top cube
  std::vector<Coefficient> coeffs;  // ordered by level, then anchor
  MeasureTag measure_tag = MeasureTag::Mu;
  int lattice_id = 0;

  GridFunction top_function(const Grid& grid) const;
  GridFunction reconstruct(const Grid& grid) const;
  // Coefficient index of a cube, or -1.
  std::ptrdiff_t find(const Cube& cube) const;
};

MartingaleDecomposition decompose(const GridFunction& f, const Measure& measure, const Lattice& lattice,
                                  MeasureTag tag = MeasureTag::Mu);

GridFunction delta_apply(const GridFunction& f, const Cube& cube, const Measure& measure);
Coefficient delta_coefficient(const GridFunction& f, const Cube& cube, const Measure& measure);

// True when f vanishes outside [1/4, 3/4)^d.
bool supported_in_center(const GridFunction& f, const Grid& grid);

struct GoodBadSplit {
  GridFunction good;
  GridFunction bad;  // sum of the essentially bad differences
  std::vector<bool> essentially_bad;  // per coefficient
  MartingaleDecomposition good_part;  // same cubes, bad coefficients zeroed
};

GoodBadSplit split_good_bad(const MartingaleDecomposition& dec, const LatticePair& pair, const Grid& grid);

struct BadMassOptions {
  int dim = 1;
  double epsilon = 1.0;
};

// Mean of ||f_bad||_mu / ||f||_mu over sampled pairs; trial i uses seed base_seed + i
// and decomposes f on the mu-lattice of that pair.
Estimate bad_mass_expectation(const GridFunction& f, const Measure& mu, int r, std::int64_t trials,
                              std::uint64_t base_seed, const BadMassOptions& options = {});

}  // namespace corona_lab
