#include "corona_lab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "corona_lab/errors.hpp"

namespace corona_lab {

Index floor_div(Index a, Index b) {
  Index q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Grid::Grid(int dim_, int level_) : dim(dim_), level(level_) {
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::Parameter, "dimension must be in [1, 3]");
  require(level >= 0 && level * dim <= 24, ErrorKind::Parameter, "grid level out of range");
}

Index Grid::size() const {
  Index n = 1;
  for (int k = 0; k < dim; ++k) n *= side();
  return n;
}

double Grid::cell_width() const { return std::ldexp(1.0, -level); }

double Grid::cell_volume() const { return std::ldexp(1.0, -level * dim); }

Index Grid::linear(const IVec& c) const {
  Index idx = 0;
  for (int k = dim - 1; k >= 0; --k) idx = idx * side() + c[k];
  return idx;
}

IVec Grid::coords(Index cell) const {
  IVec c{0, 0, 0};
  for (int k = 0; k < dim; ++k) {
    c[k] = cell % side();
    cell /= side();
  }
  return c;
}

Point Grid::midpoint(Index cell) const {
  const IVec c = coords(cell);
  Point p{0.0, 0.0, 0.0};
  const double h = cell_width();
  for (int k = 0; k < dim; ++k) p[k] = (static_cast<double>(c[k]) + 0.5) * h;
  return p;
}

double Cube::side() const { return std::ldexp(1.0, -level); }

double Cube::lower(int k) const { return std::ldexp(static_cast<double>(lo[k]), -grid_level); }

double Cube::upper(int k) const {
  return std::ldexp(static_cast<double>(lo[k] + side_cells()), -grid_level);
}

Point Cube::center() const {
  Point p{0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) p[k] = 0.5 * (lower(k) + upper(k));
  return p;
}

double Cube::volume() const { return std::pow(side(), dim); }

bool Cube::meets_domain() const {
  const Index n = Index{1} << grid_level;
  for (int k = 0; k < dim; ++k) {
    if (lo[k] >= n || lo[k] + side_cells() <= 0) return false;
  }
  return true;
}

bool Cube::inside_domain() const {
  const Index n = Index{1} << grid_level;
  for (int k = 0; k < dim; ++k) {
    if (lo[k] < 0 || lo[k] + side_cells() > n) return false;
  }
  return true;
}

bool Cube::contains(const Cube& other) const {
  // Compare at the finer of the two unit scales.
  const int g = std::max(grid_level, other.grid_level);
  for (int k = 0; k < dim; ++k) {
    const Index a0 = lo[k] << (g - grid_level);
    const Index a1 = (lo[k] + side_cells()) << (g - grid_level);
    const Index b0 = other.lo[k] << (g - other.grid_level);
    const Index b1 = (other.lo[k] + other.side_cells()) << (g - other.grid_level);
    if (b0 < a0 || b1 > a1) return false;
  }
  return true;
}

bool Cube::intersects(const Cube& other) const {
  const int g = std::max(grid_level, other.grid_level);
  for (int k = 0; k < dim; ++k) {
    const Index a0 = lo[k] << (g - grid_level);
    const Index a1 = (lo[k] + side_cells()) << (g - grid_level);
    const Index b0 = other.lo[k] << (g - other.grid_level);
    const Index b1 = (other.lo[k] + other.side_cells()) << (g - other.grid_level);
    if (b1 <= a0 || a1 <= b0) return false;
  }
  return true;
}

bool Cube::contains_cell(const IVec& cell) const {
  for (int k = 0; k < dim; ++k) {
    if (cell[k] < lo[k] || cell[k] >= lo[k] + side_cells()) return false;
  }
  return true;
}

void Cube::clipped_range(IVec& first, IVec& last) const {
  const Index n = Index{1} << grid_level;
  first = {0, 0, 0};
  last = {1, 1, 1};
  for (int k = 0; k < dim; ++k) {
    first[k] = std::clamp<Index>(lo[k], 0, n);
    last[k] = std::clamp<Index>(lo[k] + side_cells(), 0, n);
  }
}

Index Cube::cell_count() const {
  IVec first, last;
  clipped_range(first, last);
  Index count = 1;
  for (int k = 0; k < dim; ++k) count *= std::max<Index>(0, last[k] - first[k]);
  return count;
}

std::vector<Index> Cube::cells(const Grid& grid) const {
  IVec first, last;
  clipped_range(first, last);
  std::vector<Index> out;
  for (int k = 0; k < dim; ++k) {
    if (last[k] <= first[k]) return out;
  }
  out.reserve(static_cast<std::size_t>(cell_count()));
  IVec c{first[0], first[1], first[2]};
  for (int k = dim; k < kMaxDim; ++k) c[k] = 0;
  while (true) {
    out.push_back(grid.linear(c));
    int k = 0;
    for (; k < dim; ++k) {
      if (++c[k] < last[k]) break;
      c[k] = first[k];
    }
    if (k == dim) break;
  }
  return out;
}

std::string Cube::describe() const {
  std::ostringstream os;
  os << (lattice == 0 ? "mu" : "nu") << ":";
  for (int k = 0; k < dim; ++k) {
    if (k) os << "x";
    os << "[" << lower(k) << "," << upper(k) << ")";
  }
  return os.str();
}

bool Cube::same_box(const Cube& other) const {
  return dim == other.dim && contains(other) && other.contains(*this);
}

bool Cube::operator==(const Cube& other) const {
  return dim == other.dim && level == other.level && grid_level == other.grid_level &&
         lo == other.lo && lattice == other.lattice;
}

bool Cube::operator<(const Cube& other) const {
  return std::tie(lattice, level, lo, dim, grid_level) <
         std::tie(other.lattice, other.level, other.lo, other.dim, other.grid_level);
}

double box_distance(const Point& alo, const Point& ahi, const Point& blo, const Point& bhi, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double gap = std::max({0.0, blo[k] - ahi[k], alo[k] - bhi[k]});
    s += gap * gap;
  }
  return std::sqrt(s);
}

double cube_distance(const Cube& a, const Cube& b) {
  Point alo{}, ahi{}, blo{}, bhi{};
  for (int k = 0; k < a.dim; ++k) {
    alo[k] = a.lower(k);
    ahi[k] = a.upper(k);
    blo[k] = b.lower(k);
    bhi[k] = b.upper(k);
  }
  return box_distance(alo, ahi, blo, bhi, a.dim);
}

}  // namespace corona_lab
