#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treegate/errors.hpp"

namespace treegate {

struct TreeNode {
  int label = 0;
  std::string token;          // leaves only
  std::vector<int> children;  // node ids; empty for leaves

  bool is_leaf() const { return children.empty(); }
};

// A labeled parse tree stored as a pre-order node array: node 0 is the root
// and every child id is larger than its parent's.
class LabeledTree {
 public:
  LabeledTree() = default;
  explicit LabeledTree(std::vector<TreeNode> nodes);

  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const TreeNode& root() const { return nodes_.front(); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  bool is_binary() const;
  int depth() const;
  // Leaf tokens under `id`, left to right, joined by single spaces.
  std::string span(int id) const;

  friend bool operator==(const LabeledTree& a, const LabeledTree& b);

 private:
  std::vector<TreeNode> nodes_;
};

bool operator==(const TreeNode& a, const TreeNode& b);

LabeledTree parse_tree_line(std::string_view line);

// Canonical form: `(label token)` for leaves, `(label child child ...)` otherwise.
std::string serialize(const LabeledTree& tree);

// Left-branching binarization with unary collapse; see README for the rules.
LabeledTree binarize(const LabeledTree& tree);

struct Example {
  LabeledTree tree;
  int label = 0;  // sentence label, read from the root before binarization
};

struct Dataset {
  std::vector<Example> examples;
  int classes = 2;

  std::size_t size() const { return examples.size(); }
};

Dataset load_dataset(const std::filesystem::path& path, int classes);
Dataset parse_dataset(std::string_view text, int classes);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed);

}  // namespace treegate
