#include "treegate/tree.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "treegate/rng.hpp"

namespace treegate {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

class SexprParser {
 public:
  explicit SexprParser(std::string_view text) : text_(text) {}

  LabeledTree parse() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty input", pos_);
    parse_node();
    skip_space();
    if (pos_ != text_.size()) throw ParseError("trailing characters after tree", pos_);
    return LabeledTree(std::move(nodes_));
  }

 private:
  int parse_node() {
    const std::size_t open = pos_;
    expect('(');
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    skip_space();
    nodes_[static_cast<std::size_t>(id)].label = parse_label();
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unbalanced parentheses", pos_);
    if (text_[pos_] == ')') throw ParseError("empty node", open);

    if (text_[pos_] == '(') {
      while (pos_ < text_.size() && text_[pos_] == '(') {
        const int child = parse_node();
        nodes_[static_cast<std::size_t>(id)].children.push_back(child);
        skip_space();
      }
    } else {
      nodes_[static_cast<std::size_t>(id)].token = std::string(read_atom());
      skip_space();
    }
    expect(')');
    return id;
  }

  int parse_label() {
    const std::size_t start = pos_;
    const std::string_view atom = read_atom();
    int value = 0;
    const auto [end, ec] = std::from_chars(atom.data(), atom.data() + atom.size(), value);
    if (atom.empty() || ec != std::errc() || end != atom.data() + atom.size()) {
      throw ParseError("non-integer label '" + std::string(atom) + "'", start);
    }
    return value;
  }

  std::string_view read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  void expect(char c) {
    if (pos_ >= text_.size()) throw ParseError("unbalanced parentheses", pos_);
    if (text_[pos_] != c) {
      throw ParseError(std::string("expected '") + c + "', found '" + text_[pos_] + "'", pos_);
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<TreeNode> nodes_;
};

void serialize_into(const LabeledTree& tree, int id, std::string& out) {
  const TreeNode& n = tree.node(id);
  out += '(';
  out += std::to_string(n.label);
  if (n.is_leaf()) {
    out += ' ';
    out += n.token;
  } else {
    for (int c : n.children) {
      out += ' ';
      serialize_into(tree, c, out);
    }
  }
  out += ')';
}

// Intermediate form for rebuilding trees before ids are reassigned.
struct Draft {
  int label = 0;
  std::string token;
  std::vector<Draft> children;
};

Draft to_draft(const LabeledTree& tree, int id) {
  const TreeNode& n = tree.node(id);
  Draft d{n.label, n.token, {}};
  d.children.reserve(n.children.size());
  for (int c : n.children) d.children.push_back(to_draft(tree, c));
  return d;
}

Draft binarize_draft(Draft d) {
  for (Draft& c : d.children) c = binarize_draft(std::move(c));
  if (d.children.size() == 1) return std::move(d.children.front());
  while (d.children.size() > 2) {
    Draft joined{d.label, {}, {}};
    joined.children.push_back(std::move(d.children[0]));
    joined.children.push_back(std::move(d.children[1]));
    d.children.erase(d.children.begin());
    d.children.front() = std::move(joined);
  }
  return d;
}

void flatten(Draft& d, std::vector<TreeNode>& out) {
  const std::size_t id = out.size();
  out.push_back(TreeNode{d.label, std::move(d.token), {}});
  for (Draft& c : d.children) {
    const int child = static_cast<int>(out.size());
    flatten(c, out);
    out[id].children.push_back(child);
  }
}

}  // namespace

LabeledTree::LabeledTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("tree has no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.is_leaf() == n.token.empty()) {
      throw DataError("node " + std::to_string(i) + " must have either a token or children");
    }
    for (int c : n.children) {
      if (c <= static_cast<int>(i) || c >= static_cast<int>(nodes_.size())) {
        throw DataError("node " + std::to_string(i) + " has a child id out of pre-order");
      }
    }
  }
}

bool LabeledTree::is_binary() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const TreeNode& n) { return n.is_leaf() || n.children.size() == 2; });
}

int LabeledTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (int c : nodes_[i].children) d[static_cast<std::size_t>(c)] = d[i] + 1;
    best = std::max(best, d[i]);
  }
  return best;
}

std::string LabeledTree::span(int id) const {
  const TreeNode& n = node(id);
  if (n.is_leaf()) return n.token;
  std::string out;
  for (int c : n.children) {
    if (!out.empty()) out += ' ';
    out += span(c);
  }
  return out;
}

bool operator==(const TreeNode& a, const TreeNode& b) {
  return a.label == b.label && a.token == b.token && a.children == b.children;
}

bool operator==(const LabeledTree& a, const LabeledTree& b) { return a.nodes_ == b.nodes_; }

LabeledTree parse_tree_line(std::string_view line) { return SexprParser(line).parse(); }

std::string serialize(const LabeledTree& tree) {
  std::string out;
  serialize_into(tree, 0, out);
  return out;
}

LabeledTree binarize(const LabeledTree& tree) {
  Draft d = binarize_draft(to_draft(tree, 0));
  std::vector<TreeNode> nodes;
  nodes.reserve(static_cast<std::size_t>(tree.size()) * 2);
  flatten(d, nodes);
  return LabeledTree(std::move(nodes));
}

Dataset parse_dataset(std::string_view text, int classes) {
  if (classes < 2) throw DataError("classes must be at least 2");
  Dataset data;
  data.classes = classes;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;

    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    LabeledTree raw;
    try {
      raw = parse_tree_line(line);
    } catch (const std::exception& e) {
      throw DataError(where + e.what());
    }
    const int label = raw.root().label;
    if (label < 0 || label >= classes) {
      throw DataError(where + "root label " + std::to_string(label) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    data.examples.push_back(Example{binarize(raw), label});
    if (end == text.size()) break;
  }
  if (data.examples.empty()) throw DataError("empty dataset");
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, int classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_dataset(buffer.str(), classes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    throw DataError("fold count " + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t folds = static_cast<std::size_t>(k);
  std::vector<Fold> out(folds);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = n / folds + (f < n % folds ? 1 : 0);
    out[f].validation.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(begin + len));
    begin += len;
  }
  for (std::size_t f = 0; f < folds; ++f) {
    for (std::size_t g = 0; g < folds; ++g) {
      if (g == f) continue;
      out[f].train.insert(out[f].train.end(), out[g].validation.begin(), out[g].validation.end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

}  // namespace treegate
