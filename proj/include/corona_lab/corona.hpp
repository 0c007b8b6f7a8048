#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "corona_lab/lattice.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

struct CoronaOptions {
  double threshold_multiplier = 100.0;
  double epsilon = 1.0;
};

struct StoppingNode {
  Cube cube;
  int parent = -1;
  int generation = 0;
  double ratio = 0.0;  // P^2 nu / mu at selection; 0 for the root
  std::vector<int> children;
};

struct StoppingTree {
  Cube root;
  Lattice lattice;
  double K = 0.0;
  double threshold_multiplier = 100.0;
  double epsilon = 1.0;
  std::vector<StoppingNode> nodes;  // nodes[0] is the root

  // Deepest node whose cube contains c geometrically, or -1 outside the root.
  int owner(const Cube& c) const;
  // Smallest node containing c, as owner() but also defined when c is a node.
  int generation_of(int node) const { return nodes[static_cast<std::size_t>(node)].generation; }
  bool is_ancestor(int ancestor, int node) const;
};

StoppingTree build_stopping_tree(const Cube& root, const Lattice& lattice, const Measure& mu, const Measure& nu,
                                 double K, const CoronaOptions& options = {});

// Adds a node by hand (no criterion check); used for negative controls.
int inject_node(StoppingTree& tree, const Cube& cube);

struct PackingViolation {
  int node = -1;
  double fraction = 0.0;
};

struct PackingReport {
  bool passed = true;
  double max_child_fraction = 0.0;      // max over nodes of mu(children) / mu(node)
  std::vector<PackingViolation> violations;
  std::vector<double> generation_fraction;  // mu(generation g) / mu(root)
  bool generation_ok = true;
  double max_subtree_ratio = 0.0;       // max over nodes of sum of mu(S inside) / mu(node)
  bool subtree_ok = true;
};

PackingReport packing_check(const StoppingTree& tree, const Measure& mu);

// Cubes of `candidates` that belong to the shell of `node`.
std::vector<Cube> shell(const StoppingTree& tree, int node, const std::vector<Cube>& candidates);

// Generation gap when `inner` descends from `outer` in the tree, -1 otherwise.
int stopping_distance(const StoppingTree& tree, int outer, int inner);
// Level gap between nested cubes of one lattice, -1 when not nested.
int dyadic_distance(const Cube& outer, const Cube& inner);

struct CarlesonOptions {
  int random_probes = 32;
  std::uint64_t seed = 1;
  bool exact = true;  // also compute the exact embedding constant by eigen-decomposition
};

struct CarlesonReport {
  double carleson_constant = 0.0;  // max over lattice cubes of sum_{l in I} a_l / mu(I)
  double probe_ratio = 0.0;        // best probe value of sum <phi>^2 a / ||phi||^2
  double exact_ratio = 0.0;        // largest eigenvalue of the embedding form
  double embedding_ratio = 0.0;    // max(probe, exact)
  bool carleson_ok = true;
  bool embedding_ok = true;
  bool passed() const { return carleson_ok && embedding_ok; }
};

CarlesonReport carleson_embedding_check(const std::vector<std::pair<Cube, double>>& sequence, const Lattice& lattice,
                                        const Measure& mu, double C, const CarlesonOptions& options = {});

}  // namespace corona_lab
