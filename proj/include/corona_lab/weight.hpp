#pragma once

#include <string>
#include <vector>

#include "corona_lab/grid.hpp"

namespace corona_lab {

// Piecewise-constant density on a grid.
struct Measure {
  Grid grid;
  std::vector<double> density;

  static Measure lebesgue(const Grid& grid);

  double cell_mass(Index cell) const { return density[static_cast<std::size_t>(cell)] * grid.cell_volume(); }
  double mass(const Cube& cube) const;
  double integral(const Cube& cube, const GridFunction& f) const;
  double average(const Cube& cube, const GridFunction& f) const;
  double total_integral(const GridFunction& f) const;
  double inner(const GridFunction& f, const GridFunction& g) const;
  double norm(const GridFunction& f) const;
};

struct CubeStats {
  double mass = 0.0;
  double average = 0.0;
};

// Mass of the cube (times f when given) and average of f (1 when absent).
CubeStats cube_stats(const Cube& cube, const Measure& measure, const GridFunction* f = nullptr);

enum class CubeFamily { Dyadic, AllAligned };

const char* to_string(CubeFamily family);
CubeFamily cube_family_from_string(const std::string& name);

struct Clamp {
  double lo = 0x1p-20;
  double hi = 0x1p20;
};

struct WeightSpec {
  std::string kind = "constant";  // constant | step | power | lacunary | explicit
  int dim = 1;
  int level = 6;
  double value = 1.0;             // constant
  double c = 4.0;                 // step: value on the region, 1/c elsewhere
  Point region_lo{0.0, 0.0, 0.0}; // step region [lo, lo + side)^d
  double region_side = 0.5;
  double alpha = 0.5;             // power exponent
  Point center{0.5, 0.5, 0.5};    // power / lacunary center
  double ratio = 2.0;             // lacunary growth per dyadic shell
  std::vector<double> values;     // explicit
  Clamp clamp;
};

class Weight {
 public:
  Weight(const Grid& grid, std::vector<double> values, Clamp clamp = {});

  static Weight constant(const Grid& grid, double value = 1.0);
  static Weight step(const Grid& grid, double c, const Point& region_lo = {0.0, 0.0, 0.0},
                     double region_side = 0.5, Clamp clamp = {});
  static Weight power(const Grid& grid, double alpha, const Point& center = {0.5, 0.5, 0.5},
                      Clamp clamp = {});
  static Weight lacunary(const Grid& grid, double ratio, const Point& center = {0.5, 0.5, 0.5},
                         Clamp clamp = {});

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](Index cell) const { return values_[static_cast<std::size_t>(cell)]; }
  const Clamp& clamp() const { return clamp_; }

  Measure mu() const;  // density 1/w
  Measure nu() const;  // density w
  Measure lebesgue() const { return Measure::lebesgue(grid_); }
  Weight inverse() const;

 private:
  Grid grid_;
  std::vector<double> values_;
  Clamp clamp_;
};

Weight make_weight(const WeightSpec& spec);

double a2_norm(const Weight& w, CubeFamily family = CubeFamily::Dyadic);
double a1_norm(const Weight& w, CubeFamily family = CubeFamily::Dyadic);
double joint_a2(const Measure& mu, const Measure& nu, CubeFamily family = CubeFamily::Dyadic);

// Cubes of the family (unshifted dyadic or every grid-aligned cube inside the domain).
std::vector<Cube> family_cubes(const Grid& grid, CubeFamily family);

}  // namespace corona_lab
