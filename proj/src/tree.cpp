#include "demexp/tree.hpp"

#include "demexp/errors.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace demexp {

namespace {

std::string column_name(const std::vector<std::string>& names, int var) {
  if (var >= 0 && static_cast<std::size_t>(var) < names.size()) return names[var];
  return "x" + std::to_string(var + 1);
}

}  // namespace

Tree::Tree(double root_value) { nodes_.push_back(TreeNode{.value = root_value}); }

int Tree::allocate(int parent, int depth, double value) {
  TreeNode fresh{.parent = parent, .depth = depth, .value = value};
  if (!free_.empty()) {
    const int id = free_.back();
    free_.pop_back();
    nodes_[static_cast<std::size_t>(id)] = fresh;
    return id;
  }
  nodes_.push_back(fresh);
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Tree::prunable() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.alive && !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

int Tree::num_leaves() const {
  int count = 0;
  for (const auto& n : nodes_) count += (n.alive && n.is_leaf()) ? 1 : 0;
  return count;
}

int Tree::max_depth() const {
  int depth = 0;
  for (const auto& n : nodes_) {
    if (n.alive) depth = std::max(depth, n.depth);
  }
  return depth;
}

std::pair<int, int> Tree::split(int id, int var, double cutpoint, double left_value,
                                double right_value) {
  if (!node(id).alive || !node(id).is_leaf()) {
    throw InvalidArgument("only live leaves can be split");
  }
  const int depth = node(id).depth + 1;
  const int l = allocate(id, depth, left_value);
  const int r = allocate(id, depth, right_value);
  auto& n = nodes_[static_cast<std::size_t>(id)];
  n.split_var = var;
  n.cutpoint = cutpoint;
  n.left = l;
  n.right = r;
  return {l, r};
}

void Tree::collapse(int id, double value) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.is_leaf() || !node(n.left).is_leaf() || !node(n.right).is_leaf()) {
    throw InvalidArgument("collapse requires a branch with two leaf children");
  }
  for (int child : {n.left, n.right}) {
    nodes_[static_cast<std::size_t>(child)].alive = false;
    free_.push_back(child);
  }
  n.left = n.right = -1;
  n.split_var = -1;
  n.cutpoint = 0.0;
  n.value = value;
}

void Tree::set_value(int leaf, double value) { nodes_[static_cast<std::size_t>(leaf)].value = value; }

int Tree::leaf_for(const Matrix& x, Index row) const {
  int id = kRoot;
  while (!node(id).is_leaf()) {
    const auto& n = node(id);
    id = x(row, n.split_var) < n.cutpoint ? n.left : n.right;
  }
  return id;
}

Vector Tree::predict(const Matrix& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict(x, i);
  return out;
}

std::string Tree::to_text(const std::vector<std::string>& names) const {
  std::ostringstream os;
  std::function<void(int, int)> walk = [&](int id, int indent) {
    const auto& n = node(id);
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (n.is_leaf()) {
      os << pad << "leaf: " << n.value << "\n";
      return;
    }
    const std::string var = column_name(names, n.split_var);
    os << pad << var << " < " << n.cutpoint << ":\n";
    walk(n.left, indent + 1);
    os << pad << var << " >= " << n.cutpoint << ":\n";
    walk(n.right, indent + 1);
  };
  walk(kRoot, 0);
  return os.str();
}

std::string Tree::to_dot(const std::vector<std::string>& names) const {
  std::ostringstream os;
  os << "digraph tree {\n  node [shape=box];\n";
  std::function<void(int)> walk = [&](int id) {
    const auto& n = node(id);
    if (n.is_leaf()) {
      os << "  n" << id << " [label=\"" << n.value << "\", shape=ellipse];\n";
      return;
    }
    os << "  n" << id << " [label=\"" << column_name(names, n.split_var) << " < " << n.cutpoint
       << "\"];\n";
    os << "  n" << id << " -> n" << n.left << " [label=\"yes\"];\n";
    os << "  n" << id << " -> n" << n.right << " [label=\"no\"];\n";
    walk(n.left);
    walk(n.right);
  };
  walk(kRoot);
  os << "}\n";
  return os.str();
}

}  // namespace demexp
