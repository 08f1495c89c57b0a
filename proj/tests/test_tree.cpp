#include <doctest.h>

#include "braids/tree.hpp"
#include "helpers.hpp"

using namespace braids;

namespace {

Split cut(int column, double t) { return Split{column, false, t, 0}; }

BinaryTree depth_two() {
  return BinaryTree::branch(cut(0, 0.0), BinaryTree::branch(cut(1, 1.0), BinaryTree::leaf(), BinaryTree::leaf()),
                            BinaryTree::leaf());
}

}  // namespace

TEST_CASE("tree shape queries") {
  const BinaryTree t = depth_two();
  CHECK(t.depth() == 2);
  CHECK(t.n_leaves() == 3);
  CHECK(BinaryTree::leaf().depth() == 0);
  CHECK(BinaryTree::leaf().n_leaves() == 1);
}

TEST_CASE("subgroup trees number leaves left to right") {
  const SubgroupTree tree(depth_two());
  Eigen::MatrixXd x(4, 2);
  x << -1, 0, -1, 2, 1, 0, 1, 5;
  CHECK(tree.n_groups() == 3);
  CHECK(tree.group_of(x, 0) == 0);
  CHECK(tree.group_of(x, 1) == 1);
  CHECK(tree.group_of(x, 2) == 2);
  const Partition p = tree.partition(x);
  CHECK(p.group == std::vector<int>{0, 1, 2, 2});
  CHECK(p.sizes() == std::vector<int>{1, 1, 2});
}

TEST_CASE("categorical splits route by level mask") {
  const Split s{0, true, 0.0, 0b101};
  CHECK(s.goes_left(0));
  CHECK(!s.goes_left(1));
  CHECK(s.goes_left(2));
}

TEST_CASE("trees survive a json round trip") {
  const BinaryTree t = depth_two();
  const std::vector<ColumnSpec> cols{ColumnSpec::continuous("x1"), ColumnSpec::continuous("x2")};
  const BinaryTree back = BinaryTree::from_json(t.to_json(cols));
  CHECK(back.encoding() == t.encoding());
  CHECK(back.n_leaves() == 3);
}

TEST_CASE("encoding order prefers shallow trees then small columns") {
  const BinaryTree leaf = BinaryTree::leaf();
  const BinaryTree a = BinaryTree::branch(cut(0, 1.0), leaf, leaf);
  const BinaryTree b = BinaryTree::branch(cut(1, 0.0), leaf, leaf);
  const BinaryTree c = BinaryTree::branch(cut(0, 2.0), leaf, leaf);
  CHECK(encoding_less(leaf, a));
  CHECK(encoding_less(a, b));
  CHECK(encoding_less(a, c));
  CHECK(encoding_less(b, depth_two()));
  CHECK(!encoding_less(a, a));
}

TEST_CASE("policy trees return leaf actions") {
  BinaryTree t = BinaryTree::branch(cut(0, 0.0), BinaryTree::leaf(0), BinaryTree::leaf(1));
  const PolicyTree policy(t);
  Eigen::MatrixXd x(3, 1);
  x << -1, 0, 2;
  const Dataset d = testing::continuous_dataset(x, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK(policy.actions(d) == std::vector<int>{0, 0, 1});
  CHECK_THROWS(PolicyTree(BinaryTree::branch(cut(0, 0.0), BinaryTree::leaf(0), BinaryTree::leaf(2))));
}

TEST_CASE("render lists every leaf") {
  const std::vector<ColumnSpec> cols{ColumnSpec::continuous("age"), ColumnSpec::continuous("bmi")};
  const std::string text = SubgroupTree(depth_two()).render(cols);
  CHECK(text.find("age") != std::string::npos);
  CHECK(text.find("bmi") != std::string::npos);
}

TEST_CASE("partitions from labels are validated") {
  CHECK_THROWS(Partition::from_labels({0, 2}, 2));
  const Partition p = Partition::from_labels({1, 0, 1}, 2);
  CHECK(p.members()[1] == std::vector<int>{0, 2});
  CHECK(Partition::trivial(3).sizes() == std::vector<int>{3});
}
