#include "braids/tree.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace braids {

std::vector<int> Partition::sizes() const {
  std::vector<int> out(n_groups, 0);
  for (int g : group) out[g]++;
  return out;
}

std::vector<std::vector<int>> Partition::members() const {
  std::vector<std::vector<int>> out(n_groups);
  for (int i = 0; i < n_units(); ++i) out[group[i]].push_back(i);
  return out;
}

Partition Partition::trivial(int n) { return Partition{std::vector<int>(n, 0), 1}; }

Partition Partition::from_labels(std::vector<int> labels, int k) {
  if (k < 1) throw std::invalid_argument("partition needs at least one group");
  for (int g : labels) {
    if (g < 0 || g >= k) throw std::invalid_argument("group label out of range");
  }
  return Partition{std::move(labels), k};
}

BinaryTree BinaryTree::leaf(int payload) {
  BinaryTree t;
  t.nodes_[0].payload = payload;
  return t;
}

BinaryTree BinaryTree::branch(const Split& split, const BinaryTree& left, const BinaryTree& right) {
  BinaryTree t;
  TreeNode& root = t.nodes_[0];
  root.leaf = false;
  root.split = split;
  auto append = [&t](const BinaryTree& sub) {
    const int offset = static_cast<int>(t.nodes_.size());
    for (TreeNode node : sub.nodes_) {
      if (!node.leaf) {
        node.left += offset;
        node.right += offset;
      }
      t.nodes_.push_back(node);
    }
    return offset;
  };
  const int l = append(left);
  const int r = append(right);
  t.nodes_[0].left = l;
  t.nodes_[0].right = r;
  return t;
}

namespace {

int depth_from(const std::vector<TreeNode>& nodes, int at) {
  const TreeNode& n = nodes[at];
  if (n.leaf) return 0;
  return 1 + std::max(depth_from(nodes, n.left), depth_from(nodes, n.right));
}

void preorder(const std::vector<TreeNode>& nodes, int at, const std::function<void(int)>& visit) {
  visit(at);
  if (!nodes[at].leaf) {
    preorder(nodes, nodes[at].left, visit);
    preorder(nodes, nodes[at].right, visit);
  }
}

}  // namespace

int BinaryTree::depth() const { return depth_from(nodes_, 0); }

int BinaryTree::n_leaves() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf; }));
}

int BinaryTree::route(const Eigen::MatrixXd& x, Eigen::Index row) const {
  int at = 0;
  while (!nodes_[at].leaf) {
    const TreeNode& n = nodes_[at];
    at = n.split.goes_left(x(row, n.split.column)) ? n.left : n.right;
  }
  return at;
}

std::vector<double> BinaryTree::encoding() const {
  std::vector<double> out;
  preorder(nodes_, 0, [&](int at) {
    const TreeNode& n = nodes_[at];
    if (n.leaf) {
      out.push_back(-1.0);
      return;
    }
    out.push_back(n.split.column);
    out.push_back(n.split.categorical ? static_cast<double>(n.split.left_levels) : n.split.threshold);
  });
  return out;
}

bool encoding_less(const BinaryTree& a, const BinaryTree& b) {
  const int da = a.depth();
  const int db = b.depth();
  if (da != db) return da < db;
  const auto ea = a.encoding();
  const auto eb = b.encoding();
  return std::lexicographical_compare(ea.begin(), ea.end(), eb.begin(), eb.end());
}

nlohmann::json BinaryTree::to_json(const std::vector<ColumnSpec>& columns) const {
  std::function<nlohmann::json(int)> emit = [&](int at) -> nlohmann::json {
    const TreeNode& n = nodes_[at];
    if (n.leaf) return {{"leaf", n.payload}};
    nlohmann::json split = {{"column", n.split.column}};
    if (n.split.column < static_cast<int>(columns.size())) split["name"] = columns[n.split.column].name;
    if (n.split.categorical) {
      split["kind"] = "categorical";
      std::vector<int> levels;
      for (int l = 0; l < 64; ++l) {
        if ((n.split.left_levels >> l) & 1ULL) levels.push_back(l);
      }
      split["left_levels"] = levels;
    } else {
      split["kind"] = "continuous";
      split["threshold"] = n.split.threshold;
    }
    return {{"split", split}, {"left", emit(n.left)}, {"right", emit(n.right)}};
  };
  return emit(0);
}

BinaryTree BinaryTree::from_json(const nlohmann::json& j) {
  if (j.contains("leaf")) return leaf(j.at("leaf").get<int>());
  const auto& s = j.at("split");
  Split split;
  split.column = s.at("column").get<int>();
  if (s.at("kind").get<std::string>() == "categorical") {
    split.categorical = true;
    for (int l : s.at("left_levels").get<std::vector<int>>()) split.left_levels |= 1ULL << l;
  } else {
    split.threshold = s.at("threshold").get<double>();
  }
  return branch(split, from_json(j.at("left")), from_json(j.at("right")));
}

std::string BinaryTree::render(const std::vector<ColumnSpec>& columns, const LeafLabel& label) const {
  std::ostringstream os;
  std::function<void(int, int)> emit = [&](int at, int indent) {
    const TreeNode& n = nodes_[at];
    const std::string pad(2 * indent, ' ');
    if (n.leaf) {
      os << pad << label(n) << "\n";
      return;
    }
    os << pad << "if " << n.split.describe(columns, true) << ":\n";
    emit(n.left, indent + 1);
    os << pad << "else (" << n.split.describe(columns, false) << "):\n";
    emit(n.right, indent + 1);
  };
  emit(0, 0);
  return os.str();
}

SubgroupTree::SubgroupTree(BinaryTree structure) : structure_(std::move(structure)) {
  int next = 0;
  auto& nodes = structure_.mutable_nodes();
  preorder(nodes, 0, [&](int at) {
    if (nodes[at].leaf) nodes[at].payload = next++;
  });
}

int SubgroupTree::group_of(const Eigen::MatrixXd& x, Eigen::Index row) const {
  return structure_.nodes()[structure_.route(x, row)].payload;
}

Partition SubgroupTree::partition(const Eigen::MatrixXd& x) const {
  Partition p;
  p.n_groups = n_groups();
  p.group.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p.group[i] = group_of(x, i);
  return p;
}

Partition SubgroupTree::partition(const Dataset& d) const { return partition(d.x()); }

std::string SubgroupTree::render(const std::vector<ColumnSpec>& columns,
                                 const std::function<std::string(int)>& group_label) const {
  return structure_.render(columns, [&](const TreeNode& n) {
    return group_label ? group_label(n.payload) : "group " + std::to_string(n.payload + 1);
  });
}

PolicyTree::PolicyTree(BinaryTree structure) : structure_(std::move(structure)) {
  for (const auto& n : structure_.nodes()) {
    if (n.leaf && n.payload != 0 && n.payload != 1) {
      throw std::invalid_argument("policy leaves must carry action 0 or 1");
    }
  }
}

int PolicyTree::action(const Eigen::MatrixXd& x, Eigen::Index row) const {
  return structure_.nodes()[structure_.route(x, row)].payload;
}

std::vector<int> PolicyTree::actions(const Dataset& d) const {
  std::vector<int> out(d.n());
  for (int i = 0; i < d.n(); ++i) out[i] = action(d.x(), i);
  return out;
}

std::string PolicyTree::render(const std::vector<ColumnSpec>& columns) const {
  return structure_.render(columns, [](const TreeNode& n) {
    return n.payload == 1 ? std::string("treat") : std::string("do not treat");
  });
}

}  // namespace braids
