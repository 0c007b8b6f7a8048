#include "corona_lab/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "corona_lab/errors.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

bool Coefficient::is_zero() const {
  return std::all_of(child_values.begin(), child_values.end(), [](double v) { return v == 0.0; });
}

GridFunction Coefficient::as_function(const Grid& grid) const {
  GridFunction out(static_cast<std::size_t>(grid.size()), 0.0);
  const auto sons = children(cube);
  for (std::size_t s = 0; s < sons.size(); ++s) {
    if (child_values[s] == 0.0) continue;
    for (Index c : sons[s].cells(grid)) out[static_cast<std::size_t>(c)] = child_values[s];
  }
  return out;
}

double Coefficient::norm_sq(const Measure& measure) const {
  const auto sons = children(cube);
  KahanSum acc;
  for (std::size_t s = 0; s < sons.size(); ++s) {
    if (child_values[s] == 0.0) continue;
    acc.add(child_values[s] * child_values[s] * measure.mass(sons[s]));
  }
  return acc.value();
}

GridFunction MartingaleDecomposition::top_function(const Grid& grid) const {
  GridFunction out(static_cast<std::size_t>(grid.size()), 0.0);
  for (Index c : top_cube.cells(grid)) out[static_cast<std::size_t>(c)] = top;
  return out;
}

GridFunction MartingaleDecomposition::reconstruct(const Grid& grid) const {
  GridFunction out = top_function(grid);
  for (const Coefficient& co : coeffs) {
    if (co.is_zero()) continue;
    const auto sons = children(co.cube);
    for (std::size_t s = 0; s < sons.size(); ++s) {
      for (Index c : sons[s].cells(grid)) out[static_cast<std::size_t>(c)] += co.child_values[s];
    }
  }
  return out;
}

std::ptrdiff_t MartingaleDecomposition::find(const Cube& cube) const {
  const auto it = std::lower_bound(coeffs.begin(), coeffs.end(), cube,
                                   [](const Coefficient& a, const Cube& b) { return a.cube < b; });
  if (it == coeffs.end() || !(it->cube == cube)) return -1;
  return it - coeffs.begin();
}

namespace {

struct CubeSums {
  double mass = 0.0;
  double weighted = 0.0;
  double average() const { return mass > 0.0 ? weighted / mass : 0.0; }
};

CubeSums sums_on(const Cube& cube, const GridFunction& f, const Measure& measure) {
  KahanSum m, wf;
  for (Index c : cube.cells(measure.grid)) {
    const auto i = static_cast<std::size_t>(c);
    m.add(measure.density[i]);
    wf.add(measure.density[i] * f[i]);
  }
  return {m.value(), wf.value()};
}

}  // namespace

Coefficient delta_coefficient(const GridFunction& f, const Cube& cube, const Measure& measure) {
  Coefficient co;
  co.cube = cube;
  const auto sons = children(cube);
  co.child_values.assign(sons.size(), 0.0);
  const CubeSums parent = sums_on(cube, f, measure);
  if (parent.mass <= 0.0) return co;
  for (std::size_t s = 0; s < sons.size(); ++s) {
    const CubeSums child = sums_on(sons[s], f, measure);
    if (child.mass > 0.0) co.child_values[s] = child.average() - parent.average();
  }
  return co;
}

GridFunction delta_apply(const GridFunction& f, const Cube& cube, const Measure& measure) {
  require(static_cast<Index>(f.size()) == measure.grid.size(), ErrorKind::Parameter,
          "function and measure grids differ");
  return delta_coefficient(f, cube, measure).as_function(measure.grid);
}

bool supported_in_center(const GridFunction& f, const Grid& grid) {
  const Index n = grid.side();
  for (Index i = 0; i < grid.size(); ++i) {
    if (f[static_cast<std::size_t>(i)] == 0.0) continue;
    const IVec x = grid.coords(i);
    for (int k = 0; k < grid.dim; ++k) {
      if (4 * x[k] < n || 4 * x[k] >= 3 * n) return false;
    }
  }
  return true;
}

MartingaleDecomposition decompose(const GridFunction& f, const Measure& measure, const Lattice& lattice,
                                  MeasureTag tag) {
  const Grid& grid = measure.grid;
  require(grid.dim == lattice.dim && grid.level == lattice.grid_level, ErrorKind::Parameter,
          "lattice and measure live on different grids");
  require(static_cast<Index>(f.size()) == grid.size(), ErrorKind::Parameter,
          "function has the wrong number of cells");
  MartingaleDecomposition dec;
  dec.top_cube = lattice.top();
  dec.measure_tag = tag;
  dec.lattice_id = lattice.id;
  for (Index i = 0; i < grid.size(); ++i) {
    if (f[static_cast<std::size_t>(i)] != 0.0 && !dec.top_cube.contains_cell(grid.coords(i))) {
      fail(ErrorKind::Domain, "support of f escapes the top cube " + dec.top_cube.describe());
    }
  }

  // Bottom-up sums: level L cubes are single cells.
  const int L = grid.level;
  std::map<Cube, CubeSums> sums;
  for (const Cube& c : lattice.cubes_at_level(L)) sums[c] = sums_on(c, f, measure);
  for (int level = L - 1; level >= 0; --level) {
    for (const Cube& c : lattice.cubes_at_level(level)) {
      CubeSums acc;
      KahanSum m, wf;
      for (const Cube& ch : children(c)) {
        const auto it = sums.find(ch);
        if (it == sums.end()) continue;
        m.add(it->second.mass);
        wf.add(it->second.weighted);
      }
      sums[c] = CubeSums{m.value(), wf.value()};
    }
  }
  dec.top = sums[dec.top_cube].average();
  for (int level = 0; level < L; ++level) {
    for (const Cube& c : lattice.cubes_at_level(level)) {
      Coefficient co;
      co.cube = c;
      const auto sons = children(c);
      co.child_values.assign(sons.size(), 0.0);
      const CubeSums& parent = sums[c];
      if (parent.mass > 0.0) {
        for (std::size_t s = 0; s < sons.size(); ++s) {
          const auto it = sums.find(sons[s]);
          if (it != sums.end() && it->second.mass > 0.0) {
            co.child_values[s] = it->second.average() - parent.average();
          }
        }
      }
      dec.coeffs.push_back(std::move(co));
    }
  }
  std::sort(dec.coeffs.begin(), dec.coeffs.end(),
            [](const Coefficient& a, const Coefficient& b) { return a.cube < b.cube; });
  return dec;
}

GoodBadSplit split_good_bad(const MartingaleDecomposition& dec, const LatticePair& pair, const Grid& grid) {
  GoodBadSplit out;
  out.good = dec.top_function(grid);
  out.bad.assign(static_cast<std::size_t>(grid.size()), 0.0);
  out.good_part = dec;
  out.essentially_bad.assign(dec.coeffs.size(), false);
  const Lattice& other = pair.other(dec.lattice_id);
  for (std::size_t i = 0; i < dec.coeffs.size(); ++i) {
    const Coefficient& co = dec.coeffs[i];
    const bool bad = classify_badness(co.cube, other, pair.delta, pair.r).essentially_bad;
    out.essentially_bad[i] = bad;
    if (bad) std::fill(out.good_part.coeffs[i].child_values.begin(), out.good_part.coeffs[i].child_values.end(), 0.0);
    if (co.is_zero()) continue;
    GridFunction& target = bad ? out.bad : out.good;
    const auto sons = children(co.cube);
    for (std::size_t s = 0; s < sons.size(); ++s) {
      for (Index c : sons[s].cells(grid)) target[static_cast<std::size_t>(c)] += co.child_values[s];
    }
  }
  return out;
}

Estimate bad_mass_expectation(const GridFunction& f, const Measure& mu, int r, std::int64_t trials,
                              std::uint64_t base_seed, const BadMassOptions& options) {
  require(trials >= 1, ErrorKind::Parameter, "trials must be >= 1");
  const double total = mu.norm(f);
  std::vector<double> ratios(static_cast<std::size_t>(trials), 0.0);
  if (total == 0.0) return mean_estimate(ratios);
  parallel_for(ratios.size(), [&](std::size_t i) {
    const LatticePair pair = sample_lattice_pair(base_seed + i, options.dim, options.epsilon, r, mu.grid.level);
    const auto dec = decompose(f, mu, pair.mu);
    const auto split = split_good_bad(dec, pair, mu.grid);
    ratios[i] = mu.norm(split.bad) / total;
  });
  return mean_estimate(ratios);
}

}  // namespace corona_lab
