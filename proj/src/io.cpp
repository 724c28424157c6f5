#include "dualqp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

namespace dualqp {

namespace {

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    skip();
    if (pos_ >= text_.size()) {
      return std::nullopt;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '#') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  std::optional<std::string_view> peek() {
    const std::size_t saved = pos_;
    auto tok = next();
    pos_ = saved;
    return tok;
  }

  std::string_view word() {
    auto tok = next();
    if (!tok) {
      throw FormatError("unexpected end of input");
    }
    return *tok;
  }

  void expect(std::string_view keyword) {
    const std::string_view got = word();
    if (got != keyword) {
      throw FormatError("expected '" + std::string(keyword) + "', got '" + std::string(got) + "'");
    }
  }

  double real() {
    const std::string_view tok = word();
    double v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw FormatError("malformed number '" + std::string(tok) + "'");
    }
    return v;
  }

  std::uint64_t unsigned_int() {
    const std::string_view tok = word();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw FormatError("malformed integer '" + std::string(tok) + "'");
    }
    return v;
  }

  Index count(std::string_view what) {
    const std::uint64_t v = unsigned_int();
    if (v > (1ULL << 40)) {
      throw FormatError(std::string(what) + " is out of range");
    }
    return static_cast<Index>(v);
  }

  VectorXd vector(Index n) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) {
      v(i) = real();
    }
    return v;
  }

  MatrixXd matrix(Index rows, Index cols) {
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        m(r, c) = real();
      }
    }
    return m;
  }

 private:
  static bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r'; }

  void skip() {
    while (pos_ < text_.size()) {
      if (is_space(text_[pos_])) {
        ++pos_;
      } else if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') {
          ++pos_;
        }
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void write_row(std::ostringstream& os, const auto& row) {
  for (Index j = 0; j < row.size(); ++j) {
    if (j > 0) {
      os << ' ';
    }
    os << format_double(row(j));
  }
}

void write_matrix(std::ostringstream& os, std::string_view name, const MatrixXd& m) {
  os << name << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    write_row(os, m.row(r));
    os << '\n';
  }
}

void write_delay_body(std::ostringstream& os, const DelayModel& dm) {
  os << "q " << dm.q() << " N " << dm.num_nodes() << '\n';
  bool shared = true;
  for (Index i = 1; i < dm.num_nodes() && shared; ++i) {
    shared = dm.node(i) == dm.node(0);
  }
  if (shared) {
    os << "uniform ";
    write_row(os, dm.node(0));
    os << '\n';
    return;
  }
  for (Index i = 0; i < dm.num_nodes(); ++i) {
    os << "node " << i << ' ';
    write_row(os, dm.node(i));
    os << '\n';
  }
}

DelayModel read_delay_body(Tokenizer& tok, std::optional<Index> nodes) {
  tok.expect("q");
  const Index q = tok.count("q");
  std::optional<Index> declared;
  if (tok.peek() == std::optional<std::string_view>("N")) {
    tok.word();
    declared = tok.count("N");
  }
  if (declared && nodes && *declared != *nodes) {
    throw FormatError("delay model declares " + std::to_string(*declared) + " nodes, problem has " +
                      std::to_string(*nodes));
  }
  const std::optional<Index> n = declared ? declared : nodes;
  if (q < 1) {
    throw FormatError("delay model q must be at least 1");
  }
  const std::string_view kind = tok.word();
  try {
    if (kind == "uniform" || kind == "aggregate") {
      if (!n) {
        throw FormatError("delay model needs a node count");
      }
      const VectorXd pi = tok.vector(q);
      tok.expect("end");
      return kind == "uniform" ? DelayModel::uniform(pi, *n) : DelayModel::from_aggregate(pi, *n);
    }
    if (kind == "node") {
      std::vector<VectorXd> per_node;
      std::string_view key = kind;
      while (key == "node") {
        const Index i = tok.count("node index");
        if (i != static_cast<Index>(per_node.size())) {
          throw FormatError("delay model nodes must be listed in order");
        }
        per_node.push_back(tok.vector(q));
        key = tok.word();
      }
      if (key != "end") {
        throw FormatError("expected 'end' after delay model nodes");
      }
      if (n && static_cast<Index>(per_node.size()) != *n) {
        throw FormatError("delay model lists " + std::to_string(per_node.size()) + " nodes, expected " +
                          std::to_string(*n));
      }
      return DelayModel(q, std::move(per_node));
    }
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid delay model: ") + e.what());
  }
  throw FormatError("unknown delay model kind '" + std::string(kind) + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw FormatError("cannot format number");
  }
  return std::string(buf, ptr);
}

std::string write_problem(const ProblemFile& file) {
  const SeparableQP& qp = file.qp;
  std::ostringstream os;
  os << "dualqp-problem 1\n";
  os << "N " << qp.num_blocks() << " m " << qp.num_constraints() << " q " << file.q << '\n';
  os << "alpha " << format_double(qp.alpha()) << " seed " << file.seed << '\n';
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    const QpBlock& blk = qp.block(i);
    os << "block " << i << " n " << blk.c.size() << '\n';
    write_matrix(os, "Q", blk.Q);
    os << "c ";
    write_row(os, blk.c);
    os << '\n';
    write_matrix(os, "A", blk.A);
  }
  os << "b ";
  write_row(os, qp.b());
  os << '\n';
  if (file.delay) {
    os << "delay\n";
    write_delay_body(os, *file.delay);
    os << "end\n";
  }
  os << "end\n";
  return os.str();
}

ProblemFile read_problem(std::string_view text) {
  Tokenizer tok(text);
  tok.expect("dualqp-problem");
  if (tok.unsigned_int() != 1) {
    throw FormatError("unsupported problem format version");
  }
  tok.expect("N");
  const Index n_blocks = tok.count("N");
  tok.expect("m");
  const Index m = tok.count("m");
  tok.expect("q");
  const Index q = tok.count("q");
  tok.expect("alpha");
  const double alpha = tok.real();
  tok.expect("seed");
  const std::uint64_t seed = tok.unsigned_int();
  if (n_blocks < 1 || m < 1 || q < 1) {
    throw FormatError("N, m and q must be at least 1");
  }

  std::vector<QpBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(n_blocks));
  for (Index i = 0; i < n_blocks; ++i) {
    tok.expect("block");
    if (tok.count("block index") != i) {
      throw FormatError("blocks must be listed in order");
    }
    tok.expect("n");
    const Index n = tok.count("n");
    if (n < 1) {
      throw FormatError("block size must be at least 1");
    }
    QpBlock blk;
    tok.expect("Q");
    blk.Q = tok.matrix(n, n);
    tok.expect("c");
    blk.c = tok.vector(n);
    tok.expect("A");
    blk.A = tok.matrix(m, n);
    blocks.push_back(std::move(blk));
  }
  tok.expect("b");
  VectorXd b = tok.vector(m);

  std::optional<DelayModel> delay;
  std::string_view key = tok.word();
  if (key == "delay") {
    delay = read_delay_body(tok, n_blocks);
    key = tok.word();
  }
  if (key != "end") {
    throw FormatError("expected 'end', got '" + std::string(key) + "'");
  }
  if (tok.next()) {
    throw FormatError("trailing content after 'end'");
  }
  try {
    return ProblemFile{SeparableQP(std::move(blocks), std::move(b), alpha), q, seed, std::move(delay)};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid problem: ") + e.what());
  }
}

std::string write_delay(const DelayModel& dm) {
  std::ostringstream os;
  os << "dualqp-delay 1\n";
  write_delay_body(os, dm);
  os << "end\n";
  return os.str();
}

DelayModel read_delay(std::string_view text, std::optional<Index> nodes) {
  Tokenizer tok(text);
  tok.expect("dualqp-delay");
  if (tok.unsigned_int() != 1) {
    throw FormatError("unsupported delay format version");
  }
  DelayModel dm = read_delay_body(tok, nodes);
  if (tok.next()) {
    throw FormatError("trailing content after 'end'");
  }
  return dm;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string csv_metadata(std::string_view command, std::uint64_t seed, std::string_view problem_hash) {
  std::ostringstream os;
  os << "# dualqp " << kToolVersion << '\n';
  os << "# command=" << command << " seed=" << seed << " problem_hash=" << problem_hash << '\n';
  return os.str();
}

}  // namespace dualqp
