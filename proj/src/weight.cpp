#include "corona_lab/weight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "corona_lab/errors.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

Measure Measure::lebesgue(const Grid& grid) {
  return Measure{grid, std::vector<double>(static_cast<std::size_t>(grid.size()), 1.0)};
}

double Measure::mass(const Cube& cube) const {
  KahanSum acc;
  for (Index c : cube.cells(grid)) acc.add(density[static_cast<std::size_t>(c)]);
  return acc.value() * grid.cell_volume();
}

double Measure::integral(const Cube& cube, const GridFunction& f) const {
  KahanSum acc;
  for (Index c : cube.cells(grid)) {
    const auto i = static_cast<std::size_t>(c);
    acc.add(density[i] * f[i]);
  }
  return acc.value() * grid.cell_volume();
}

double Measure::average(const Cube& cube, const GridFunction& f) const {
  const double m = mass(cube);
  require(m > 0.0, ErrorKind::Degenerate, "average over a zero-mass cube " + cube.describe());
  return integral(cube, f) / m;
}

double Measure::total_integral(const GridFunction& f) const {
  KahanSum acc;
  for (std::size_t i = 0; i < density.size(); ++i) acc.add(density[i] * f[i]);
  return acc.value() * grid.cell_volume();
}

double Measure::inner(const GridFunction& f, const GridFunction& g) const {
  KahanSum acc;
  for (std::size_t i = 0; i < density.size(); ++i) acc.add(density[i] * f[i] * g[i]);
  return acc.value() * grid.cell_volume();
}

double Measure::norm(const GridFunction& f) const { return std::sqrt(std::max(0.0, inner(f, f))); }

CubeStats cube_stats(const Cube& cube, const Measure& measure, const GridFunction* f) {
  CubeStats s;
  const double m = measure.mass(cube);
  require(m > 0.0, ErrorKind::Degenerate, "zero-mass cube " + cube.describe());
  if (f == nullptr) {
    s.mass = m;
    s.average = 1.0;
  } else {
    s.mass = measure.integral(cube, *f);
    s.average = s.mass / m;
  }
  return s;
}

const char* to_string(CubeFamily family) {
  return family == CubeFamily::Dyadic ? "dyadic" : "all";
}

CubeFamily cube_family_from_string(const std::string& name) {
  if (name == "dyadic") return CubeFamily::Dyadic;
  if (name == "all" || name == "all_aligned") return CubeFamily::AllAligned;
  fail(ErrorKind::Config, "unknown cube family '" + name + "'");
}

// ---------------------------------------------------------------------------
// Weight construction

Weight::Weight(const Grid& grid, std::vector<double> values, Clamp clamp)
    : grid_(grid), values_(std::move(values)), clamp_(clamp) {
  require(static_cast<Index>(values_.size()) == grid_.size(), ErrorKind::Parameter,
          "weight has the wrong number of cells");
  require(clamp_.lo > 0.0 && clamp_.lo <= clamp_.hi, ErrorKind::Parameter, "invalid clamp");
  for (double v : values_) {
    require(std::isfinite(v) && v > 0.0, ErrorKind::Parameter, "weight values must be positive");
    require(v >= clamp_.lo && v <= clamp_.hi, ErrorKind::Parameter,
            "weight value outside the declared clamp");
  }
}

Weight Weight::constant(const Grid& grid, double value) {
  return Weight(grid, std::vector<double>(static_cast<std::size_t>(grid.size()), value));
}

Weight Weight::step(const Grid& grid, double c, const Point& region_lo, double region_side, Clamp clamp) {
  require(c > 0.0, ErrorKind::Parameter, "step value must be positive");
  std::vector<double> v(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    const Point x = grid.midpoint(i);
    bool inside = true;
    for (int k = 0; k < grid.dim; ++k) {
      inside = inside && x[k] >= region_lo[k] && x[k] < region_lo[k] + region_side;
    }
    v[static_cast<std::size_t>(i)] = inside ? c : 1.0 / c;
  }
  return Weight(grid, std::move(v), clamp);
}

Weight Weight::power(const Grid& grid, double alpha, const Point& center, Clamp clamp) {
  const double bound = static_cast<double>(grid.dim);
  require(alpha > -bound && alpha < bound, ErrorKind::Parameter,
          "power exponent must lie in (-d, d)");
  std::vector<double> v(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    const Point x = grid.midpoint(i);
    double r2 = 0.0;
    for (int k = 0; k < grid.dim; ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
    const double val = r2 > 0.0 ? std::pow(std::sqrt(r2), alpha) : clamp.hi;
    v[static_cast<std::size_t>(i)] = std::clamp(val, clamp.lo, clamp.hi);
  }
  return Weight(grid, std::move(v), clamp);
}

Weight Weight::lacunary(const Grid& grid, double ratio, const Point& center, Clamp clamp) {
  require(ratio > 0.0, ErrorKind::Parameter, "lacunary ratio must be positive");
  std::vector<double> v(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    const Point x = grid.midpoint(i);
    double r2 = 0.0;
    for (int k = 0; k < grid.dim; ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
    // shell k: 2^{-k-1} <= |x - center| < 2^{-k}
    const double dist = std::sqrt(r2);
    const int shell = dist > 0.0 ? static_cast<int>(std::floor(-std::log2(dist))) : grid.level + 1;
    const double val = std::pow(ratio, std::max(shell, 0));
    v[static_cast<std::size_t>(i)] = std::clamp(val, clamp.lo, clamp.hi);
  }
  return Weight(grid, std::move(v), clamp);
}

Measure Weight::mu() const {
  Measure m{grid_, values_};
  for (double& x : m.density) x = 1.0 / x;
  return m;
}

Measure Weight::nu() const { return Measure{grid_, values_}; }

Weight Weight::inverse() const {
  std::vector<double> inv(values_);
  for (double& x : inv) x = 1.0 / x;
  return Weight(grid_, std::move(inv), Clamp{1.0 / clamp_.hi, 1.0 / clamp_.lo});
}

Weight make_weight(const WeightSpec& spec) {
  const Grid grid(spec.dim, spec.level);
  if (spec.kind == "constant") {
    require(spec.value > 0.0, ErrorKind::Parameter, "constant weight must be positive");
    return Weight(grid, std::vector<double>(static_cast<std::size_t>(grid.size()), spec.value), spec.clamp);
  }
  if (spec.kind == "step") return Weight::step(grid, spec.c, spec.region_lo, spec.region_side, spec.clamp);
  if (spec.kind == "power") {
    if (spec.dim == 1) {
      require(spec.alpha > -1.0 && spec.alpha < 1.0, ErrorKind::Parameter,
              "power exponent must lie in (-1, 1) for d = 1");
    }
    return Weight::power(grid, spec.alpha, spec.center, spec.clamp);
  }
  if (spec.kind == "lacunary") return Weight::lacunary(grid, spec.ratio, spec.center, spec.clamp);
  if (spec.kind == "explicit") return Weight(grid, spec.values, spec.clamp);
  fail(ErrorKind::Config, "unknown weight kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Characteristics

namespace {

// Double-double prefix sums so that box sums keep relative accuracy even when a
// box carries a tiny fraction of the total mass.
struct DD {
  double hi = 0.0;
  double lo = 0.0;
};

DD dd_add(DD a, double b) {
  const double s = a.hi + b;
  const double bb = s - a.hi;
  const double err = (a.hi - (s - bb)) + (b - bb);
  const double lo = a.lo + err;
  const double hi = s + lo;
  return DD{hi, lo - (hi - s)};
}

DD dd_add(DD a, DD b) { return dd_add(dd_add(a, b.hi), b.lo); }

DD dd_neg(DD a) { return DD{-a.hi, -a.lo}; }

class BoxSums {
 public:
  BoxSums(const Grid& grid, const std::vector<double>& values) : grid_(grid), n_(grid.side() + 1) {
    Index total = 1;
    for (int k = 0; k < grid.dim; ++k) total *= n_;
    prefix_.assign(static_cast<std::size_t>(total), DD{});
    // prefix over (n+1)^d with a zero border; accumulate axis by axis.
    for (Index c = 0; c < grid.size(); ++c) {
      const IVec x = grid.coords(c);
      IVec y{x[0] + 1, x[1] + 1, x[2] + 1};
      prefix_[static_cast<std::size_t>(index(y))] = DD{values[static_cast<std::size_t>(c)], 0.0};
    }
    for (int axis = 0; axis < grid.dim; ++axis) {
      for (Index p = 0; p < total; ++p) {
        IVec y = unindex(p);
        if (y[axis] == 0) continue;
        IVec prev = y;
        --prev[axis];
        prefix_[static_cast<std::size_t>(p)] =
            dd_add(prefix_[static_cast<std::size_t>(p)], prefix_[static_cast<std::size_t>(index(prev))]);
      }
    }
  }

  // Sum over the box [lo, lo + s)^d.
  double sum(const IVec& lo, Index s) const {
    DD acc;
    const int corners = 1 << grid_.dim;
    for (int mask = 0; mask < corners; ++mask) {
      IVec y{0, 0, 0};
      int ups = 0;
      for (int k = 0; k < grid_.dim; ++k) {
        const bool up = (mask >> k) & 1;
        y[k] = lo[k] + (up ? s : 0);
        ups += up ? 1 : 0;
      }
      const DD v = prefix_[static_cast<std::size_t>(index(y))];
      acc = dd_add(acc, ((grid_.dim - ups) % 2 == 0) ? v : dd_neg(v));
    }
    return acc.hi + acc.lo;
  }

 private:
  Index index(const IVec& y) const {
    Index idx = 0;
    for (int k = grid_.dim - 1; k >= 0; --k) idx = idx * n_ + y[k];
    return idx;
  }
  IVec unindex(Index p) const {
    IVec y{0, 0, 0};
    for (int k = 0; k < grid_.dim; ++k) {
      y[k] = p % n_;
      p /= n_;
    }
    return y;
  }

  Grid grid_;
  Index n_;
  std::vector<DD> prefix_;
};

// Calls fn(lo, side_cells) for every cube of the family.
template <class Fn>
void for_each_family_box(const Grid& grid, CubeFamily family, Fn&& fn) {
  const Index n = grid.side();
  const int d = grid.dim;
  auto iterate = [&](Index s, Index stride) {
    const Index count = (n - s) / stride + 1;
    IVec m{0, 0, 0};
    while (true) {
      IVec lo{m[0] * stride, m[1] * stride, m[2] * stride};
      fn(lo, s);
      int k = 0;
      for (; k < d; ++k) {
        if (++m[k] < count) break;
        m[k] = 0;
      }
      if (k == d) break;
    }
  };
  if (family == CubeFamily::Dyadic) {
    for (int level = 0; level <= grid.level; ++level) {
      const Index s = Index{1} << (grid.level - level);
      iterate(s, s);
    }
  } else {
    for (Index s = 1; s <= n; ++s) iterate(s, 1);
  }
}

double box_volume(const Grid& grid, Index s) {
  return std::pow(static_cast<double>(s), grid.dim);
}

double box_min(const Grid& grid, const std::vector<double>& values, const IVec& lo, Index s) {
  double m = std::numeric_limits<double>::infinity();
  IVec c = lo;
  while (true) {
    m = std::min(m, values[static_cast<std::size_t>(grid.linear(c))]);
    int k = 0;
    for (; k < grid.dim; ++k) {
      if (++c[k] < lo[k] + s) break;
      c[k] = lo[k];
    }
    if (k == grid.dim) break;
  }
  return m;
}

}  // namespace

double joint_a2(const Measure& mu, const Measure& nu, CubeFamily family) {
  require(mu.grid == nu.grid, ErrorKind::Parameter, "measures live on different grids");
  const Grid& grid = mu.grid;
  const BoxSums smu(grid, mu.density), snu(grid, nu.density);
  double best = 0.0;
  for_each_family_box(grid, family, [&](const IVec& lo, Index s) {
    const double v = box_volume(grid, s);
    best = std::max(best, (smu.sum(lo, s) / v) * (snu.sum(lo, s) / v));
  });
  return best;
}

double a2_norm(const Weight& w, CubeFamily family) { return joint_a2(w.mu(), w.nu(), family); }

double a1_norm(const Weight& w, CubeFamily family) {
  const Grid& grid = w.grid();
  const BoxSums sums(grid, w.values());
  double best = 0.0;
  if (family == CubeFamily::AllAligned && grid.dim == 1) {
    // Running minimum per left endpoint keeps this O(N^2).
    const Index n = grid.side();
    for (Index a = 0; a < n; ++a) {
      double mn = std::numeric_limits<double>::infinity();
      for (Index b = a; b < n; ++b) {
        mn = std::min(mn, w[b]);
        const Index s = b - a + 1;
        best = std::max(best, sums.sum({a, 0, 0}, s) / static_cast<double>(s) / mn);
      }
    }
    return best;
  }
  for_each_family_box(grid, family, [&](const IVec& lo, Index s) {
    const double avg = sums.sum(lo, s) / box_volume(grid, s);
    best = std::max(best, avg / box_min(grid, w.values(), lo, s));
  });
  return best;
}

std::vector<Cube> family_cubes(const Grid& grid, CubeFamily family) {
  std::vector<Cube> out;
  if (family == CubeFamily::AllAligned) {
    // Cubes whose side is not a power of two have no level; only power-of-two sides
    // are representable as Cube values.
    for (int level = 0; level <= grid.level; ++level) {
      const Index s = Index{1} << (grid.level - level);
      const Index count = grid.side() - s + 1;
      IVec m{0, 0, 0};
      while (true) {
        Cube c;
        c.dim = grid.dim;
        c.level = level;
        c.grid_level = grid.level;
        c.lo = m;
        out.push_back(c);
        int k = 0;
        for (; k < grid.dim; ++k) {
          if (++m[k] < count) break;
          m[k] = 0;
        }
        if (k == grid.dim) break;
      }
    }
    return out;
  }
  for_each_family_box(grid, family, [&](const IVec& lo, Index s) {
    Cube c;
    c.dim = grid.dim;
    c.grid_level = grid.level;
    c.level = grid.level - static_cast<int>(std::lround(std::log2(static_cast<double>(s))));
    c.lo = lo;
    out.push_back(c);
  });
  return out;
}

}  // namespace corona_lab
