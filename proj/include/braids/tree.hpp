#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/data.hpp"

namespace braids {

// Assignment of N units to K groups labelled 0..K-1.
struct Partition {
  std::vector<int> group;
  int n_groups = 1;

  int n_units() const { return static_cast<int>(group.size()); }
  std::vector<int> sizes() const;
  std::vector<std::vector<int>> members() const;

  static Partition trivial(int n);
  // Validates labels lie in [0, k).
  static Partition from_labels(std::vector<int> labels, int k);
};

struct TreeNode {
  bool leaf = true;
  Split split;
  int left = -1;
  int right = -1;
  int payload = 0;
};

// Binary decision tree stored as a node array with the root at index 0.
class BinaryTree {
 public:
  BinaryTree() : nodes_{TreeNode{}} {}
  static BinaryTree leaf(int payload = 0);
  static BinaryTree branch(const Split& split, const BinaryTree& left, const BinaryTree& right);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;
  int n_leaves() const;
  // Index of the leaf node reached by a covariate row.
  int route(const Eigen::MatrixXd& x, Eigen::Index row) const;

  // Preorder token sequence: a split contributes (column, threshold or level
  // mask), a leaf contributes -1. Compared lexicographically after depth for
  // deterministic tie-breaking.
  std::vector<double> encoding() const;

  nlohmann::json to_json(const std::vector<ColumnSpec>& columns) const;
  static BinaryTree from_json(const nlohmann::json& j);

  using LeafLabel = std::function<std::string(const TreeNode&)>;
  std::string render(const std::vector<ColumnSpec>& columns, const LeafLabel& label) const;

  std::vector<TreeNode>& mutable_nodes() { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

// Lexicographic (depth, preorder encoding) comparison.
bool encoding_less(const BinaryTree& a, const BinaryTree& b);

// Tree whose leaves are subgroups, numbered 0..K-1 in preorder.
class SubgroupTree {
 public:
  SubgroupTree() = default;
  explicit SubgroupTree(BinaryTree structure);

  int n_groups() const { return structure_.n_leaves(); }
  int depth() const { return structure_.depth(); }
  int group_of(const Eigen::MatrixXd& x, Eigen::Index row) const;
  Partition partition(const Dataset& d) const;
  Partition partition(const Eigen::MatrixXd& x) const;
  const BinaryTree& structure() const { return structure_; }
  std::string render(const std::vector<ColumnSpec>& columns,
                     const std::function<std::string(int)>& group_label = {}) const;

 private:
  BinaryTree structure_;
};

// Tree whose leaves carry a treat (1) / don't-treat (0) action.
class PolicyTree {
 public:
  PolicyTree() = default;
  explicit PolicyTree(BinaryTree structure);

  int depth() const { return structure_.depth(); }
  int action(const Eigen::MatrixXd& x, Eigen::Index row) const;
  std::vector<int> actions(const Dataset& d) const;
  const BinaryTree& structure() const { return structure_; }
  std::string render(const std::vector<ColumnSpec>& columns) const;

 private:
  BinaryTree structure_;
};

}  // namespace braids
