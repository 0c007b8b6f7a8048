#include "corona_lab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "corona_lab/errors.hpp"

namespace corona_lab {

Cube Lattice::cube(int level, const IVec& index) const {
  require(level >= 0 && level <= grid_level, ErrorKind::Resolution, "cube level outside [0, L]");
  Cube c;
  c.dim = dim;
  c.level = level;
  c.grid_level = grid_level;
  c.lattice = id;
  const Index s = c.side_cells();
  for (int k = 0; k < dim; ++k) c.lo[k] = shift[k] + index[k] * s;
  return c;
}

Cube Lattice::containing(const IVec& cell, int level) const {
  require(level >= 0 && level <= grid_level, ErrorKind::Resolution, "cube level outside [0, L]");
  const Index s = Index{1} << (grid_level - level);
  IVec idx{0, 0, 0};
  for (int k = 0; k < dim; ++k) idx[k] = floor_div(cell[k] - shift[k], s);
  return cube(level, idx);
}

Cube Lattice::ancestor(const Cube& c, int level) const {
  require(level <= c.level, ErrorKind::Parameter, "ancestor level below cube level");
  return containing(c.lo, level);
}

Cube Lattice::parent(const Cube& c) const {
  require(c.level >= 1, ErrorKind::Parameter, "top-level cube has no parent");
  return ancestor(c, c.level - 1);
}

bool Lattice::member(const Cube& c) const {
  if (c.dim != dim || c.grid_level != grid_level) return false;
  const Index s = c.side_cells();
  for (int k = 0; k < dim; ++k) {
    if (floor_div(c.lo[k] - shift[k], s) * s != c.lo[k] - shift[k]) return false;
  }
  return true;
}

std::vector<Cube> Lattice::cubes_at_level(int level) const {
  require(level >= 0 && level <= grid_level, ErrorKind::Resolution, "cube level outside [0, L]");
  const Index n = Index{1} << grid_level;
  const Index s = Index{1} << (grid_level - level);
  IVec first{0, 0, 0}, last{0, 0, 0};
  for (int k = 0; k < dim; ++k) {
    // lo < n and lo + s > 0 with lo = shift + m s
    first[k] = floor_div(-shift[k], s);
    if (shift[k] + first[k] * s + s <= 0) ++first[k];
    last[k] = floor_div(n - 1 - shift[k], s);
  }
  std::vector<Cube> out;
  IVec m = first;
  for (int k = dim; k < kMaxDim; ++k) m[k] = 0;
  while (true) {
    out.push_back(cube(level, m));
    int k = 0;
    for (; k < dim; ++k) {
      if (++m[k] <= last[k]) break;
      m[k] = first[k];
    }
    if (k == dim) break;
  }
  return out;
}

std::vector<Cube> Lattice::descendants(const Cube& root, int max_level) const {
  std::vector<Cube> out;
  if (!root.meets_domain()) return out;
  std::vector<Cube> frontier{root};
  for (int level = root.level; level <= max_level && !frontier.empty(); ++level) {
    std::vector<Cube> next;
    for (const Cube& c : frontier) {
      out.push_back(c);
      if (level < max_level) {
        for (const Cube& ch : children(c)) {
          if (ch.meets_domain()) next.push_back(ch);
        }
      }
    }
    frontier = std::move(next);
  }
  return out;
}

std::vector<Cube> children(const Cube& c) {
  require(c.level < c.grid_level, ErrorKind::Resolution,
          "cannot split a cube below grid resolution");
  std::vector<Cube> out;
  const int n = 1 << c.dim;
  const Index half = c.side_cells() / 2;
  out.reserve(static_cast<std::size_t>(n));
  for (int mask = 0; mask < n; ++mask) {
    Cube ch = c;
    ch.level = c.level + 1;
    for (int k = 0; k < c.dim; ++k) {
      if (mask & (1 << k)) ch.lo[k] += half;
    }
    out.push_back(ch);
  }
  return out;
}

double goodness_delta(int dim, double epsilon) {
  return epsilon / (2.0 * (static_cast<double>(dim) + epsilon));
}

namespace {

void validate_pair_params(int dim, double epsilon, int r, int grid_level) {
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::Parameter, "dimension must be in [1, 3]");
  require(epsilon > 0.0 && epsilon <= 1.0, ErrorKind::Parameter, "epsilon must lie in (0, 1]");
  require(r >= 1, ErrorKind::Parameter, "r must be >= 1");
  require(grid_level >= 1 && grid_level * dim <= 24, ErrorKind::Parameter,
          "grid level out of range");
}

}  // namespace

LatticePair make_lattice_pair(int dim, double epsilon, int r, int grid_level, const IVec& shift_mu,
                              const IVec& shift_nu) {
  validate_pair_params(dim, epsilon, r, grid_level);
  const Index q = (Index{1} << grid_level) / 4;
  for (int k = 0; k < dim; ++k) {
    require(std::abs(shift_mu[k]) <= q && std::abs(shift_nu[k]) <= q, ErrorKind::Parameter,
            "shift outside [-1/4, 1/4]");
  }
  LatticePair p;
  p.mu = Lattice{dim, grid_level, shift_mu, 0};
  p.nu = Lattice{dim, grid_level, shift_nu, 1};
  for (int k = dim; k < kMaxDim; ++k) p.mu.shift[k] = p.nu.shift[k] = 0;
  p.epsilon = epsilon;
  p.delta = goodness_delta(dim, epsilon);
  p.r = r;
  return p;
}

LatticePair sample_lattice_pair(std::uint64_t seed, int dim, double epsilon, int r, int grid_level) {
  validate_pair_params(dim, epsilon, r, grid_level);
  Rng rng(seed);
  const Index q = (Index{1} << grid_level) / 4;
  IVec smu{0, 0, 0}, snu{0, 0, 0};
  for (int k = 0; k < dim; ++k) smu[k] = rng.between(-q, q);
  for (int k = 0; k < dim; ++k) snu[k] = rng.between(-q, q);
  LatticePair p = make_lattice_pair(dim, epsilon, r, grid_level, smu, snu);
  p.seed = seed;
  return p;
}

double skeleton_distance(const Cube& J, const Cube& I) {
  const int d = J.dim;
  Point ilo{}, ihi{}, jlo{}, jhi{};
  for (int k = 0; k < d; ++k) {
    ilo[k] = I.lower(k);
    ihi[k] = I.upper(k);
    jlo[k] = J.lower(k);
    jhi[k] = J.upper(k);
  }
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d; ++k) {
    const double planes[3] = {jlo[k], 0.5 * (jlo[k] + jhi[k]), jhi[k]};
    for (double v : planes) {
      Point flo = jlo, fhi = jhi;
      flo[k] = fhi[k] = v;
      best = std::min(best, box_distance(ilo, ihi, flo, fhi, d));
    }
  }
  return best;
}

const char* BadnessResult::label() const {
  if (essentially_bad) return "essentially_bad";
  if (bad) return "bad";
  return "good";
}

BadnessResult classify_badness(const Cube& I, const Lattice& other, double delta, int r) {
  BadnessResult result;
  const int d = I.dim;
  const Index n = Index{1} << other.grid_level;
  for (int level = 0; level <= I.level; ++level) {
    const double threshold = std::pow(std::ldexp(1.0, -level), 1.0 - delta) * std::pow(I.side(), delta);
    const Index s = Index{1} << (other.grid_level - level);
    const double h = std::ldexp(1.0, -other.grid_level);
    IVec first{0, 0, 0}, last{0, 0, 0};
    bool empty = false;
    for (int k = 0; k < d; ++k) {
      // Candidate J whose closure comes within `threshold` of I, restricted to the domain.
      const Index lo_cells = static_cast<Index>(std::floor((I.lower(k) - threshold) / h));
      const Index hi_cells = static_cast<Index>(std::ceil((I.upper(k) + threshold) / h));
      first[k] = std::max(floor_div(lo_cells - other.shift[k], s) - 1, floor_div(-other.shift[k], s) - 1);
      last[k] = std::min(floor_div(hi_cells - other.shift[k], s) + 1, floor_div(n - 1 - other.shift[k], s));
      if (first[k] > last[k]) empty = true;
    }
    if (empty) continue;
    IVec m = first;
    while (true) {
      const Cube J = other.cube(level, m);
      if (J.meets_domain() && skeleton_distance(J, I) < threshold) {
        if (!result.bad) {
          result.bad = true;
          result.witness = J;
        }
        if (level <= I.level - r) {
          result.essentially_bad = true;
          result.essential_witness = J;
          return result;
        }
      }
      int k = 0;
      for (; k < d; ++k) {
        if (++m[k] <= last[k]) break;
        m[k] = first[k];
      }
      if (k == d) break;
    }
  }
  return result;
}

BadnessResult classify_badness(const Cube& I, const LatticePair& pair) {
  return classify_badness(I, pair.other(I.lattice), pair.delta, pair.r);
}

Estimate badness_probability(int level, int r, std::int64_t trials, std::uint64_t base_seed,
                             const BadnessProbabilityOptions& options) {
  require(trials >= 1, ErrorKind::Parameter, "trials must be >= 1");
  require(level >= 0, ErrorKind::Parameter, "level must be >= 0");
  const int grid_level = options.grid_level < 0 ? level + 4 : options.grid_level;
  require(grid_level >= level, ErrorKind::Parameter, "grid level below reference level");
  std::vector<double> hits(static_cast<std::size_t>(trials), 0.0);
  IVec center{0, 0, 0};
  for (int k = 0; k < options.dim; ++k) center[k] = (Index{1} << grid_level) / 2;
  parallel_for(hits.size(), [&](std::size_t i) {
    const LatticePair pair =
        sample_lattice_pair(base_seed + i, options.dim, options.epsilon, r, grid_level);
    const Cube I = pair.mu.containing(center, level);
    hits[i] = classify_badness(I, pair).essentially_bad ? 1.0 : 0.0;
  });
  return mean_estimate(hits);
}

}  // namespace corona_lab
