#include "corona_lab/pivotal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "corona_lab/corona.hpp"
#include "corona_lab/errors.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

double poisson_functional(const Cube& inner, const Cube& outer, const Measure& measure, double epsilon) {
  require(outer.contains(inner), ErrorKind::Containment,
          inner.describe() + " is not contained in " + outer.describe());
  if (outer.same_box(inner)) return 0.0;
  const Grid& grid = measure.grid;
  const double side = inner.side();
  const Point c = inner.center();
  const double num = std::pow(side, epsilon);
  const double power = grid.dim + epsilon;
  KahanSum acc;
  for (Index cell : outer.cells(grid)) {
    if (inner.contains_cell(grid.coords(cell))) continue;
    const Point x = grid.midpoint(cell);
    double r2 = 0.0;
    for (int k = 0; k < grid.dim; ++k) r2 += (x[k] - c[k]) * (x[k] - c[k]);
    acc.add(num / std::pow(side + std::sqrt(r2), power) * measure.cell_mass(cell));
  }
  return acc.value();
}

namespace {

void maximal_1d(const GridFunction& g, Index first, Index last, GridFunction& out) {
  const Index n = last - first;
  std::vector<double> prefix(static_cast<std::size_t>(n + 1), 0.0);
  {
    KahanSum acc;
    for (Index i = 0; i < n; ++i) {
      acc.add(std::abs(g[static_cast<std::size_t>(first + i)]));
      prefix[static_cast<std::size_t>(i + 1)] = acc.value();
    }
  }
  std::vector<double> suffix(static_cast<std::size_t>(n + 2));
  for (Index a = 0; a < n; ++a) {
    // suffix[b] = max over b' >= b of the average on [a, b')
    suffix[static_cast<std::size_t>(n + 1)] = 0.0;
    for (Index b = n; b > a; --b) {
      const double avg = (prefix[static_cast<std::size_t>(b)] - prefix[static_cast<std::size_t>(a)]) /
                         static_cast<double>(b - a);
      suffix[static_cast<std::size_t>(b)] = std::max(avg, suffix[static_cast<std::size_t>(b + 1)]);
    }
    for (Index i = a; i < n; ++i) {
      auto& slot = out[static_cast<std::size_t>(first + i)];
      slot = std::max(slot, suffix[static_cast<std::size_t>(i + 1)]);
    }
  }
}

void maximal_brute(const GridFunction& g, const Grid& grid, const IVec& first, const IVec& last,
                   GridFunction& out) {
  const int d = grid.dim;
  Index extent = std::numeric_limits<Index>::max();
  for (int k = 0; k < d; ++k) extent = std::min(extent, last[k] - first[k]);
  for (Index s = 1; s <= extent; ++s) {
    IVec lo = first;
    while (true) {
      // average over [lo, lo + s)^d
      KahanSum acc;
      std::vector<Index> cells;
      IVec c = lo;
      while (true) {
        const Index id = grid.linear(c);
        cells.push_back(id);
        acc.add(std::abs(g[static_cast<std::size_t>(id)]));
        int k = 0;
        for (; k < d; ++k) {
          if (++c[k] < lo[k] + s) break;
          c[k] = lo[k];
        }
        if (k == d) break;
      }
      const double avg = acc.value() / static_cast<double>(cells.size());
      for (Index id : cells) out[static_cast<std::size_t>(id)] = std::max(out[static_cast<std::size_t>(id)], avg);
      int k = 0;
      for (; k < d; ++k) {
        if (++lo[k] + s <= last[k]) break;
        lo[k] = first[k];
      }
      if (k == d) break;
    }
  }
}

}  // namespace

GridFunction maximal_function_within(const GridFunction& g, const Grid& grid, const Cube& box) {
  require(static_cast<Index>(g.size()) == grid.size(), ErrorKind::Parameter, "function has the wrong size");
  GridFunction out(g.size(), 0.0);
  IVec first, last;
  box.clipped_range(first, last);
  if (grid.dim == 1) {
    maximal_1d(g, first[0], last[0], out);
  } else {
    maximal_brute(g, grid, first, last, out);
  }
  return out;
}

GridFunction maximal_function(const GridFunction& g, const Grid& grid) {
  Cube all;
  all.dim = grid.dim;
  all.level = 0;
  all.grid_level = grid.level;
  return maximal_function_within(g, grid, all);
}

double pivotal_sum(const Cube& outer, const std::vector<Cube>& family, const Measure& mu, const Measure& nu,
                   double epsilon) {
  for (std::size_t a = 0; a < family.size(); ++a) {
    require(outer.contains(family[a]), ErrorKind::Containment,
            family[a].describe() + " is not inside " + outer.describe());
    for (std::size_t b = a + 1; b < family.size(); ++b) {
      require(!family[a].intersects(family[b]), ErrorKind::Disjointness,
              family[a].describe() + " overlaps " + family[b].describe());
    }
  }
  KahanSum acc;
  for (const Cube& J : family) {
    const double p = poisson_functional(J, outer, mu, epsilon);
    acc.add(p * p * nu.mass(J));
  }
  return acc.value();
}

double best_partition_ratio(const Cube& outer, const Lattice& lattice, const Measure& mu, const Measure& nu,
                            int depth, double epsilon, std::vector<Cube>* family) {
  const double mass = mu.mass(outer);
  if (mass <= 0.0) return 0.0;
  const int max_level = std::min(outer.level + depth, lattice.grid_level);
  const std::vector<Cube> cubes = lattice.descendants(outer, max_level);
  // Values and best antichain sums, filled bottom-up (descendants is ordered by level).
  std::map<Cube, std::pair<double, bool>> best;  // value, take-self
  for (auto it = cubes.rbegin(); it != cubes.rend(); ++it) {
    const Cube& J = *it;
    const double p = poisson_functional(J, outer, mu, epsilon);
    const double own = p * p * nu.mass(J);
    double kids = 0.0;
    if (J.level < max_level) {
      for (const Cube& ch : children(J)) {
        const auto f = best.find(ch);
        if (f != best.end()) kids += f->second.first;
      }
    }
    best[J] = own >= kids ? std::make_pair(own, true) : std::make_pair(kids, false);
  }
  if (family != nullptr) {
    family->clear();
    std::vector<Cube> stack{outer};
    while (!stack.empty()) {
      const Cube J = stack.back();
      stack.pop_back();
      const auto f = best.find(J);
      if (f == best.end()) continue;
      if (f->second.second) {
        family->push_back(J);
      } else {
        for (const Cube& ch : children(J)) stack.push_back(ch);
      }
    }
    std::sort(family->begin(), family->end());
  }
  return best[outer].first / mass;
}

PivotalReport estimate_pivotal_constant(const Measure& mu, const Measure& nu, const PivotalOptions& options) {
  const Grid& grid = mu.grid;
  Lattice lattice = options.lattice_set ? options.lattice : Lattice{grid.dim, grid.level, {0, 0, 0}, 0};
  const int depth = options.depth < 0 ? grid.level : options.depth;
  require(depth <= grid.level, ErrorKind::Parameter, "search depth exceeds the grid level");
  PivotalReport report;
  report.depth = depth;

  if (options.search != PivotalSearch::StoppingFamilies) {
    const std::vector<Cube> cubes = lattice.descendants(lattice.top(), grid.level - 1);
    std::vector<double> ratios(cubes.size(), 0.0);
    parallel_for(cubes.size(), [&](std::size_t i) {
      ratios[i] = best_partition_ratio(cubes[i], lattice, mu, nu, depth, options.epsilon);
    });
    for (std::size_t i = 0; i < cubes.size(); ++i) {
      if (ratios[i] > report.K_estimate) {
        report.K_estimate = ratios[i];
        report.witness = cubes[i];
        report.witness_family = "partition";
      }
    }
    if (!report.witness_family.empty()) {
      best_partition_ratio(report.witness, lattice, mu, nu, depth, options.epsilon, &report.witness_cubes);
    }
  }

  if (options.search != PivotalSearch::SonPartitions) {
    // Stopping families of trees built at a ladder of constants.
    const double base = report.K_estimate > 0.0 ? report.K_estimate : 1.0;
    for (double mult : options.stopping_multipliers) {
      CoronaOptions copts;
      copts.threshold_multiplier = 1.0;
      copts.epsilon = options.epsilon;
      const StoppingTree tree = build_stopping_tree(lattice.top(), lattice, mu, nu, mult * base, copts);
      for (std::size_t s = 0; s < tree.nodes.size(); ++s) {
        const auto& node = tree.nodes[s];
        if (node.children.empty()) continue;
        std::vector<Cube> fam;
        for (int ch : node.children) fam.push_back(tree.nodes[static_cast<std::size_t>(ch)].cube);
        const double m = mu.mass(node.cube);
        if (m <= 0.0) continue;
        const double ratio = pivotal_sum(node.cube, fam, mu, nu, options.epsilon) / m;
        if (ratio > report.K_estimate) {
          report.K_estimate = ratio;
          report.witness = node.cube;
          report.witness_family = "stopping";
          report.witness_cubes = fam;
        }
      }
    }
  }
  report.K_tilde = 100.0 * report.K_estimate;
  return report;
}

double buckley_ratio(const Weight& w, double a2) {
  const Grid& grid = w.grid();
  if (a2 <= 0.0) a2 = a2_norm(w, CubeFamily::Dyadic);
  const Lattice lattice{grid.dim, grid.level, {0, 0, 0}, 0};
  const std::vector<Cube> cubes = lattice.descendants(lattice.top(), grid.level);
  std::vector<double> ratios(cubes.size(), 0.0);
  const Measure mu = w.mu();
  parallel_for(cubes.size(), [&](std::size_t i) {
    const Cube& I = cubes[i];
    GridFunction g(static_cast<std::size_t>(grid.size()), 0.0);
    const auto cells = I.cells(grid);
    for (Index c : cells) g[static_cast<std::size_t>(c)] = 1.0 / w[c];
    // In d = 1 an interval leaving I only dilutes the average of chi_I g.
    const GridFunction M = grid.dim == 1 ? maximal_function_within(g, grid, I) : maximal_function(g, grid);
    KahanSum acc;
    for (Index c : cells) acc.add(M[static_cast<std::size_t>(c)] * M[static_cast<std::size_t>(c)] * w[c]);
    ratios[i] = acc.value() * grid.cell_volume() / (a2 * a2 * mu.mass(I));
  });
  return *std::max_element(ratios.begin(), ratios.end());
}

}  // namespace corona_lab
