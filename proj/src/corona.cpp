#include "corona_lab/corona.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "corona_lab/errors.hpp"
#include "corona_lab/pivotal.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

int StoppingTree::owner(const Cube& c) const {
  if (nodes.empty() || !nodes[0].cube.contains(c)) return -1;
  int current = 0;
  while (true) {
    int next = -1;
    for (int ch : nodes[static_cast<std::size_t>(current)].children) {
      if (nodes[static_cast<std::size_t>(ch)].cube.contains(c)) {
        next = ch;
        break;
      }
    }
    if (next < 0) return current;
    current = next;
  }
}

bool StoppingTree::is_ancestor(int ancestor, int node) const {
  for (int cur = node; cur >= 0; cur = nodes[static_cast<std::size_t>(cur)].parent) {
    if (cur == ancestor) return true;
  }
  return false;
}

namespace {

void select_children(StoppingTree& tree, int node_index, const Measure& mu, const Measure& nu) {
  const Cube S = tree.nodes[static_cast<std::size_t>(node_index)].cube;
  if (S.level >= tree.lattice.grid_level) return;
  const double threshold = tree.threshold_multiplier * tree.K;
  std::vector<Cube> stack;
  for (const Cube& ch : children(S)) stack.push_back(ch);
  std::vector<std::pair<Cube, double>> fired;
  while (!stack.empty()) {
    const Cube I = stack.back();
    stack.pop_back();
    if (!I.meets_domain()) continue;
    const double m = mu.mass(I);
    if (m <= 0.0) continue;
    const double p = poisson_functional(I, S, mu, tree.epsilon);
    const double ratio = p * p * nu.mass(I) / m;
    if (ratio >= threshold) {
      fired.emplace_back(I, ratio);
    } else if (I.level < tree.lattice.grid_level) {
      for (const Cube& ch : children(I)) stack.push_back(ch);
    }
  }
  std::sort(fired.begin(), fired.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [cube, ratio] : fired) {
    StoppingNode node;
    node.cube = cube;
    node.parent = node_index;
    node.generation = tree.nodes[static_cast<std::size_t>(node_index)].generation + 1;
    node.ratio = ratio;
    tree.nodes.push_back(node);
    const int idx = static_cast<int>(tree.nodes.size()) - 1;
    tree.nodes[static_cast<std::size_t>(node_index)].children.push_back(idx);
    select_children(tree, idx, mu, nu);
  }
}

}  // namespace

StoppingTree build_stopping_tree(const Cube& root, const Lattice& lattice, const Measure& mu, const Measure& nu,
                                 double K, const CoronaOptions& options) {
  require(K > 0.0, ErrorKind::Parameter, "pivotal constant must be positive");
  require(options.threshold_multiplier > 0.0, ErrorKind::Parameter, "threshold multiplier must be positive");
  require(lattice.member(root), ErrorKind::Parameter, "root is not a cube of the lattice");
  StoppingTree tree;
  tree.root = root;
  tree.lattice = lattice;
  tree.K = K;
  tree.threshold_multiplier = options.threshold_multiplier;
  tree.epsilon = options.epsilon;
  StoppingNode top;
  top.cube = root;
  tree.nodes.push_back(top);
  if (std::isfinite(options.threshold_multiplier)) select_children(tree, 0, mu, nu);
  return tree;
}

int inject_node(StoppingTree& tree, const Cube& cube) {
  const int parent = tree.owner(cube);
  require(parent >= 0, ErrorKind::Containment, "injected cube lies outside the root");
  StoppingNode node;
  node.cube = cube;
  node.parent = parent;
  node.generation = tree.nodes[static_cast<std::size_t>(parent)].generation + 1;
  tree.nodes.push_back(node);
  const int idx = static_cast<int>(tree.nodes.size()) - 1;
  // Existing children of the parent that sit inside the new cube move under it.
  auto& siblings = tree.nodes[static_cast<std::size_t>(parent)].children;
  std::vector<int> keep;
  for (int ch : siblings) {
    if (cube.contains(tree.nodes[static_cast<std::size_t>(ch)].cube)) {
      tree.nodes[static_cast<std::size_t>(ch)].parent = idx;
      tree.nodes[static_cast<std::size_t>(idx)].children.push_back(ch);
    } else {
      keep.push_back(ch);
    }
  }
  keep.push_back(idx);
  tree.nodes[static_cast<std::size_t>(parent)].children = keep;
  // Regenerate generations below the new node.
  std::vector<int> stack{idx};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (int ch : tree.nodes[static_cast<std::size_t>(cur)].children) {
      tree.nodes[static_cast<std::size_t>(ch)].generation = tree.nodes[static_cast<std::size_t>(cur)].generation + 1;
      stack.push_back(ch);
    }
  }
  return idx;
}

PackingReport packing_check(const StoppingTree& tree, const Measure& mu) {
  constexpr double kSlack = 1e-12;
  PackingReport report;
  std::vector<double> mass(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) mass[i] = mu.mass(tree.nodes[i].cube);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.children.empty() || mass[i] <= 0.0) continue;
    KahanSum acc;
    for (int ch : node.children) acc.add(mass[static_cast<std::size_t>(ch)]);
    const double fraction = acc.value() / mass[i];
    report.max_child_fraction = std::max(report.max_child_fraction, fraction);
    if (fraction > 0.5 + kSlack) report.violations.push_back({static_cast<int>(i), fraction});
  }
  int max_gen = 0;
  for (const auto& n : tree.nodes) max_gen = std::max(max_gen, n.generation);
  report.generation_fraction.assign(static_cast<std::size_t>(max_gen + 1), 0.0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    report.generation_fraction[static_cast<std::size_t>(tree.nodes[i].generation)] += mass[i];
  }
  for (std::size_t g = 0; g < report.generation_fraction.size(); ++g) {
    report.generation_fraction[g] /= mass[0];
    if (report.generation_fraction[g] > std::ldexp(1.0, -static_cast<int>(g)) + kSlack) report.generation_ok = false;
  }
  // Subtree sums, children before parents (children always have larger indices).
  std::vector<double> subtree(mass);
  for (std::size_t i = tree.nodes.size(); i-- > 0;) {
    for (int ch : tree.nodes[i].children) subtree[i] += subtree[static_cast<std::size_t>(ch)];
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    report.max_subtree_ratio = std::max(report.max_subtree_ratio, subtree[i] / mass[i]);
  }
  report.subtree_ok = report.max_subtree_ratio <= 2.0 + kSlack;
  report.passed = report.violations.empty() && report.generation_ok && report.subtree_ok;
  return report;
}

std::vector<Cube> shell(const StoppingTree& tree, int node, const std::vector<Cube>& candidates) {
  std::vector<Cube> out;
  for (const Cube& c : candidates) {
    if (tree.owner(c) == node) out.push_back(c);
  }
  return out;
}

int stopping_distance(const StoppingTree& tree, int outer, int inner) {
  if (!tree.is_ancestor(outer, inner)) return -1;
  return tree.nodes[static_cast<std::size_t>(inner)].generation - tree.nodes[static_cast<std::size_t>(outer)].generation;
}

int dyadic_distance(const Cube& outer, const Cube& inner) {
  if (!outer.contains(inner) || inner.level < outer.level) return -1;
  return inner.level - outer.level;
}

CarlesonReport carleson_embedding_check(const std::vector<std::pair<Cube, double>>& sequence, const Lattice& lattice,
                                        const Measure& mu, double C, const CarlesonOptions& options) {
  CarlesonReport report;
  const Grid& grid = mu.grid;
  for (const auto& [cube, value] : sequence) {
    require(value >= 0.0, ErrorKind::Parameter, "Carleson sequences are nonnegative");
  }
  const std::vector<Cube> tests = lattice.descendants(lattice.top(), grid.level);
  std::vector<double> ratios(tests.size(), 0.0);
  parallel_for(tests.size(), [&](std::size_t i) {
    const double m = mu.mass(tests[i]);
    if (m <= 0.0) return;
    KahanSum acc;
    for (const auto& [cube, value] : sequence) {
      if (value != 0.0 && tests[i].contains(cube)) acc.add(value);
    }
    ratios[i] = acc.value() / m;
  });
  for (double r : ratios) report.carleson_constant = std::max(report.carleson_constant, r);

  // Cubes with mass, their masses, and cell lists.
  struct Entry {
    std::vector<Index> cells;
    double mass;
    double a;
  };
  std::vector<Entry> entries;
  for (const auto& [cube, value] : sequence) {
    if (value == 0.0) continue;
    const double m = mu.mass(cube);
    if (m <= 0.0) continue;
    entries.push_back({cube.cells(grid), m, value});
  }
  auto form = [&](const GridFunction& phi) {
    KahanSum acc;
    for (const Entry& e : entries) {
      KahanSum s;
      for (Index c : e.cells) s.add(phi[static_cast<std::size_t>(c)] * mu.cell_mass(c));
      const double avg = s.value() / e.mass;
      acc.add(avg * avg * e.a);
    }
    return acc.value();
  };
  const auto n = static_cast<std::size_t>(grid.size());
  for (const Cube& c : tests) {
    GridFunction phi(n, 0.0);
    for (Index cell : c.cells(grid)) phi[static_cast<std::size_t>(cell)] = 1.0;
    const double norm2 = mu.inner(phi, phi);
    if (norm2 > 0.0) report.probe_ratio = std::max(report.probe_ratio, form(phi) / norm2);
  }
  Rng rng(options.seed);
  for (int p = 0; p < options.random_probes; ++p) {
    GridFunction phi(n);
    for (auto& v : phi) v = p % 2 == 0 ? rng.uniform01() : rng.normal();
    const double norm2 = mu.inner(phi, phi);
    if (norm2 > 0.0) report.probe_ratio = std::max(report.probe_ratio, form(phi) / norm2);
  }
  if (options.exact && !entries.empty()) {
    // In coordinates psi = sqrt(mass) phi the form is sum a v v^T with v = chi sqrt(mass) / mu(I).
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const Entry& e : entries) {
      const double scale = e.a / (e.mass * e.mass);
      for (Index i : e.cells) {
        const double si = std::sqrt(mu.cell_mass(i)) * scale;
        for (Index j : e.cells) A(i, j) += si * std::sqrt(mu.cell_mass(j));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, Eigen::EigenvaluesOnly);
    report.exact_ratio = solver.eigenvalues().maxCoeff();
  }
  report.embedding_ratio = std::max(report.probe_ratio, report.exact_ratio);
  constexpr double kRel = 1e-9;
  report.carleson_ok = report.carleson_constant <= C * (1.0 + kRel);
  report.embedding_ok = report.embedding_ratio <= 4.0 * C * (1.0 + kRel);
  return report;
}

}  // namespace corona_lab
