#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace corona_lab {

constexpr int kMaxDim = 3;

using Index = std::int64_t;
using IVec = std::array<Index, kMaxDim>;
using Point = std::array<double, kMaxDim>;
using GridFunction = std::vector<double>;

// Uniform grid of 2^level cells per side tiling [0,1)^dim.
struct Grid {
  int dim = 1;
  int level = 0;

  Grid() = default;
  Grid(int dim_, int level_);

  Index side() const { return Index{1} << level; }
  Index size() const;
  double cell_width() const;
  double cell_volume() const;
  Index linear(const IVec& coords) const;
  IVec coords(Index cell) const;
  Point midpoint(Index cell) const;
  bool operator==(const Grid& other) const { return dim == other.dim && level == other.level; }
};

// Half-open cube [lo, lo + side)^dim in units of grid cells. Cubes may stick out of
// the unit domain (shifted lattices); only the cells inside count for measures.
struct Cube {
  int dim = 1;
  int level = 0;
  int grid_level = 0;
  IVec lo{0, 0, 0};
  int lattice = 0;

  Index side_cells() const { return Index{1} << (grid_level - level); }
  double side() const;
  double lower(int k) const;
  double upper(int k) const;
  Point center() const;
  double volume() const;

  bool meets_domain() const;
  bool inside_domain() const;
  bool contains(const Cube& other) const;  // geometric, half-open
  bool intersects(const Cube& other) const;
  bool contains_cell(const IVec& cell) const;

  // Clipped cell range [first, last) per coordinate.
  void clipped_range(IVec& first, IVec& last) const;
  Index cell_count() const;  // cells inside the domain
  std::vector<Index> cells(const Grid& grid) const;

  std::string describe() const;
  bool same_box(const Cube& other) const;
  bool operator==(const Cube& other) const;
  bool operator<(const Cube& other) const;
};

// Euclidean distance between the closures of two cubes.
double cube_distance(const Cube& a, const Cube& b);

// Distance between closed axis-aligned boxes given by corner coordinates.
double box_distance(const Point& alo, const Point& ahi, const Point& blo, const Point& bhi, int dim);

Index floor_div(Index a, Index b);

}  // namespace corona_lab
