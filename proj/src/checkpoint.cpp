#include "treegate/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <algorithm>
#include <map>
#include <tuple>
#include <sstream>
#include <vector>

#include "treegate/errors.hpp"
#include "treegate/format.hpp"

namespace treegate {

namespace {

constexpr std::string_view kKeys[] = {"model",   "dim",        "gate_hidden",      "activation",
                                      "classes", "gated_bias", "train_embeddings", "seed"};

std::string_view on_off(bool b) { return b ? "on" : "off"; }

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  std::size_t line_no() const { return line_; }

  std::string_view next() {
    if (done()) fail("unexpected end of file");
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) fail("missing final newline");
    std::string_view line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  std::string_view peek() const {
    std::size_t end = text_.find('\n', pos_);
    return text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError("checkpoint line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t sp = line.find(' ', start);
    out.push_back(line.substr(start, sp == std::string_view::npos ? sp : sp - start));
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

struct RawTensor {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<double> values;
};

void fill(const RawTensor& raw, double* dst) { std::copy(raw.values.begin(), raw.values.end(), dst); }

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  const ModelConfig& c = model.config;
  std::string out;
  out += kCheckpointMagic;
  out += '\n';
  out += "model=" + std::string(to_string(c.kind)) + '\n';
  out += "dim=" + std::to_string(c.dim) + '\n';
  out += "gate_hidden=" + std::to_string(c.gate_hidden) + '\n';
  out += "activation=" + std::string(to_string(c.activation)) + '\n';
  out += "classes=" + std::to_string(c.classes) + '\n';
  out += "gated_bias=" + std::string(on_off(c.gated_bias)) + '\n';
  out += "train_embeddings=" + std::string(on_off(c.train_embeddings)) + '\n';
  out += "seed=" + std::to_string(c.seed) + '\n';

  visit_tensors(model.params, &model.embeddings.vectors(), [&](const ConstTensorView& t) {
    out += "tensor " + t.name + ' ' + std::to_string(t.rows) + ' ' + std::to_string(t.cols) + '\n';
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index k = 0; k < t.cols; ++k) {
        if (k) out += ' ';
        out += format_double(t.data[static_cast<std::size_t>(r * t.cols + k)]);
      }
      out += '\n';
    }
  });

  out += "vocab " + std::to_string(model.embeddings.size()) + '\n';
  for (const std::string& token : model.embeddings.vocab()) out += token + '\n';
  return out;
}

Model parse_checkpoint(std::string_view text) {
  LineReader in(text);
  if (in.done() || in.next() != kCheckpointMagic) in.fail("bad magic or version");

  std::map<std::string, std::string, std::less<>> meta;
  for (std::string_view key : kKeys) {
    const std::string_view line = in.next();
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || line.substr(0, eq) != key) {
      in.fail("expected metadata key '" + std::string(key) + "'");
    }
    meta.emplace(std::string(key), std::string(line.substr(eq + 1)));
  }

  ModelConfig config;
  auto bad = [&](std::string_view key) { in.fail("bad value for '" + std::string(key) + "'"); };
  if (auto k = parse_model_kind(meta["model"])) config.kind = *k; else bad("model");
  if (auto a = parse_activation(meta["activation"])) config.activation = *a; else bad("activation");
  if (!parse_number(meta["dim"], config.dim) || config.dim < 1) bad("dim");
  if (!parse_number(meta["gate_hidden"], config.gate_hidden)) bad("gate_hidden");
  if (!parse_number(meta["classes"], config.classes) || config.classes < 2) bad("classes");
  if (!parse_number(meta["seed"], config.seed)) bad("seed");
  for (auto [key, flag] : {std::pair{"gated_bias", &config.gated_bias},
                           std::pair{"train_embeddings", &config.train_embeddings}}) {
    const std::string& v = meta[key];
    if (v != "on" && v != "off") bad(key);
    *flag = v == "on";
  }

  std::vector<std::pair<std::string, RawTensor>> tensors;
  while (!in.done() && in.peek().starts_with("tensor ")) {
    const auto fields = split_spaces(in.next());
    RawTensor t;
    if (fields.size() != 4 || !parse_number(fields[2], t.rows) || !parse_number(fields[3], t.cols) ||
        t.rows < 1 || t.cols < 1) {
      in.fail("malformed tensor header");
    }
    t.values.reserve(static_cast<std::size_t>(t.rows * t.cols));
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      const auto values = split_spaces(in.next());
      if (static_cast<Eigen::Index>(values.size()) != t.cols) in.fail("wrong number of values");
      for (std::string_view v : values) {
        double x = 0;
        if (!parse_number(v, x)) in.fail("malformed value '" + std::string(v) + "'");
        t.values.push_back(x);
      }
    }
    tensors.emplace_back(std::string(fields[1]), std::move(t));
  }

  const auto vocab_header = split_spaces(in.next());
  std::size_t vocab_size = 0;
  if (vocab_header.size() != 2 || vocab_header[0] != "vocab" ||
      !parse_number(vocab_header[1], vocab_size)) {
    in.fail("expected 'vocab <n>'");
  }
  std::vector<std::string> vocab;
  vocab.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) vocab.emplace_back(in.next());
  if (!in.done()) in.fail("trailing content after vocabulary");

  // Expected layout for this configuration; label tables are discovered.
  const Eigen::Index K = config.dim;
  const Eigen::Index D = config.gate_hidden;
  const bool gated = is_gated(config.kind);
  const bool bias = config.composition_bias();
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> expected = {
      {"composition.W", K, 2 * K}};
  if (bias) expected.emplace_back("composition.b", K, 1);
  if (gated) {
    expected.emplace_back("gate.W", D, K);
    expected.emplace_back("gate.b", D, 1);
    expected.emplace_back("gate.u", D, 1);
  }
  expected.emplace_back("classifier.U", config.logits(), K);
  expected.emplace_back("classifier.b", config.logits(), 1);
  if (config.kind == ModelKind::rntn) expected.emplace_back("rntn.V", 2 * K * K, 2 * K);
  std::vector<int> labels;
  if (config.kind == ModelKind::label) {
    for (const auto& [name, t] : tensors) {
      int label = 0;
      if (name.starts_with("label.") && name.ends_with(".W") &&
          parse_number(std::string_view(name).substr(6, name.size() - 8), label)) {
        labels.push_back(label);
      }
    }
    std::sort(labels.begin(), labels.end());
    for (int label : labels) {
      expected.emplace_back("label." + std::to_string(label) + ".W", K, 2 * K);
      expected.emplace_back("label." + std::to_string(label) + ".b", K, 1);
    }
  }
  expected.emplace_back("embeddings", static_cast<Eigen::Index>(vocab_size), K);

  if (tensors.size() != expected.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model '" +
                          std::string(to_string(config.kind)) + "' needs " +
                          std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, rows, cols] = expected[i];
    if (tensors[i].first != name) {
      throw CheckpointError("tensor " + std::to_string(i) + " is '" + tensors[i].first +
                            "', expected '" + name + "'");
    }
    if (tensors[i].second.rows != rows || tensors[i].second.cols != cols) {
      throw CheckpointError("tensor '" + name + "' has shape " +
                            std::to_string(tensors[i].second.rows) + "x" +
                            std::to_string(tensors[i].second.cols) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Model model;
  model.config = config;
  Mat vectors(static_cast<Eigen::Index>(vocab_size), K);
  fill(tensors.back().second, vectors.data());
  try {
    model.embeddings = EmbeddingTable(std::move(vocab), std::move(vectors));
  } catch (const DataError& e) {
    throw CheckpointError(std::string("bad vocabulary: ") + e.what());
  }
  if (model.embeddings.size() != static_cast<int>(vocab_size)) {
    throw CheckpointError("checkpoint vocabulary lacks the unknown-word token");
  }
  model.embeddings.trainable = config.train_embeddings;

  ParamSet& p = model.params;
  p.composition.W.resize(K, 2 * K);
  if (bias) p.composition.b.resize(K);
  if (gated) {
    p.gate.W.resize(D, K);
    p.gate.b.resize(D);
    p.gate.u.resize(D);
  }
  p.classifier.U.resize(config.logits(), K);
  p.classifier.b.resize(config.logits());
  if (config.kind == ModelKind::rntn) p.rntn_V.resize(2 * K * K, 2 * K);
  for (int label : labels) p.label_tables[label] = {Mat(K, 2 * K), Vec(K)};

  std::size_t i = 0;
  visit_tensors(p, static_cast<Mat*>(nullptr), [&](const TensorView& t) {
    fill(tensors[i++].second, t.data.data());
  });
  if (!model.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << serialize_checkpoint(model);
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace treegate
