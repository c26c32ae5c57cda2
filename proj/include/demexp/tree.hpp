#pragma once

#include "demexp/linalg.hpp"

#include <string>
#include <vector>

namespace demexp {

/// A node is a leaf when it has no children. Branches route x to the left
/// child when x[split_var] < cutpoint.
struct TreeNode {
  int split_var = -1;
  double cutpoint = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  double value = 0.0;
  bool alive = true;

  bool is_leaf() const { return left < 0; }
};

/// Binary regression tree with hard decision rules, stored as a flat node
/// array. Node ids stay valid until the node is removed by collapse().
class Tree {
 public:
  explicit Tree(double root_value = 0.0);

  static constexpr int kRoot = 0;

  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t capacity() const { return nodes_.size(); }

  std::vector<int> leaves() const;
  /// Branches whose two children are both leaves.
  std::vector<int> prunable() const;
  int num_leaves() const;
  bool is_stump() const { return nodes_.front().is_leaf(); }
  int max_depth() const;

  /// Turns leaf `id` into a branch with two new leaves; returns {left, right}.
  std::pair<int, int> split(int id, int var, double cutpoint, double left_value,
                            double right_value);
  /// Turns a branch with two leaf children back into a leaf.
  void collapse(int id, double value);
  void set_value(int leaf, double value);

  int leaf_for(const Matrix& x, Index row) const;
  double predict(const Matrix& x, Index row) const { return node(leaf_for(x, row)).value; }
  Vector predict(const Matrix& x) const;

  /// Indented rule listing. `names` may be empty (columns print as x1, x2, ...).
  std::string to_text(const std::vector<std::string>& names = {}) const;
  std::string to_dot(const std::vector<std::string>& names = {}) const;

 private:
  int allocate(int parent, int depth, double value);

  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
};

}  // namespace demexp
