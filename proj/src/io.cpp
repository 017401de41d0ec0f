#include "lfbm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace lfbm {

using nlohmann::json;

namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == '\t' || line[pos] == ' ' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != '\t' && line[end] != ' ' && line[end] != '\r') ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

template <class T>
T parse_number(std::string_view text, std::size_t line_no, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    fail_line(line_no, "malformed " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view text, std::size_t line_no) {
  const auto v = parse_number<double>(text, line_no, "real");
  if (!std::isfinite(v)) fail_line(line_no, "non-finite real '" + std::string(text) + "'");
  return v;
}

std::uint64_t pair_key(Index i, Index j) { return (static_cast<std::uint64_t>(i) << 32) | j; }

json flat(const auto& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

template <class M>
M unflat(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols)) {
    throw DataError(std::string("dimension-inconsistency: '") + name + "' should hold " +
                    std::to_string(rows * cols) + " numbers");
  }
  M m(rows, cols);
  std::size_t t = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr.at(t++).get<double>();
  }
  return m;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, ptr);
}

RelationData parse_edge_list(std::istream& in) {
  struct Slot {
    std::uint8_t s;
    bool explicit_line;
    std::size_t line_no;
  };
  std::unordered_map<std::uint64_t, Slot> slots;
  std::vector<std::uint64_t> order;
  std::optional<std::size_t> n_header;
  bool undirected = false;
  std::size_t max_index = 0;
  bool any = false;

  auto put = [&](Index i, Index j, std::uint8_t s, bool explicit_line, std::size_t line_no) {
    const auto key = pair_key(i, j);
    auto it = slots.find(key);
    if (it == slots.end()) {
      slots.emplace(key, Slot{s, explicit_line, line_no});
      order.push_back(key);
      return;
    }
    Slot& slot = it->second;
    if ((explicit_line && slot.explicit_line) || slot.s != s) {
      fail_line(line_no, "duplicate-pair (" + std::to_string(i) + ", " + std::to_string(j) +
                             "), first seen at line " + std::to_string(slot.line_no));
    }
    slot.explicit_line = slot.explicit_line || explicit_line;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (!view.empty() && view.front() == '#') {
      if (view.starts_with("#n=")) {
        n_header = parse_number<std::size_t>(view.substr(3), line_no, "object count");
      } else if (view == "#undirected") {
        undirected = true;
      }
      continue;
    }
    const auto cols = fields(view);
    if (cols.empty()) continue;
    if (cols.size() != 3) fail_line(line_no, "expected 3 fields, found " + std::to_string(cols.size()));
    const auto i = parse_number<Index>(cols[0], line_no, "index");
    const auto j = parse_number<Index>(cols[1], line_no, "index");
    const auto s = parse_number<long>(cols[2], line_no, "value");
    if (s != 0 && s != 1) fail_line(line_no, "non-binary-value " + std::to_string(s));
    put(i, j, static_cast<std::uint8_t>(s), true, line_no);
    max_index = std::max<std::size_t>(max_index, std::max(i, j));
    any = true;
  }
  if (undirected) {
    const std::vector<std::uint64_t> originals = order;
    for (auto key : originals) {
      const Slot slot = slots.at(key);
      const auto i = static_cast<Index>(key >> 32);
      const auto j = static_cast<Index>(key & 0xffffffffu);
      if (i != j) put(j, i, slot.s, false, slot.line_no);
    }
  }

  const std::size_t n = n_header ? *n_header : (any ? max_index + 1 : 0);
  if (any && max_index >= n) {
    throw DataError("index-out-of-range: index " + std::to_string(max_index) +
                    " exceeds header n = " + std::to_string(n));
  }
  std::vector<Entry> entries;
  entries.reserve(order.size());
  for (auto key : order) {
    entries.push_back({static_cast<Index>(key >> 32), static_cast<Index>(key & 0xffffffffu),
                       slots.at(key).s});
  }
  return RelationData(n, std::move(entries), !undirected);
}

void write_edge_list(std::ostream& out, const RelationData& data) {
  out << "#n=" << data.n() << '\n';
  if (!data.directed()) out << "#undirected\n";
  for (const Entry& e : data.entries()) {
    if (!data.directed() && e.j < e.i) continue;
    out << e.i << '\t' << e.j << '\t' << int(e.s) << '\n';
  }
}

std::vector<std::pair<Index, Index>> parse_pairs(std::istream& in) {
  std::vector<std::pair<Index, Index>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto cols = fields(line);
    if (cols.empty()) continue;
    if (cols.size() < 2) fail_line(line_no, "expected at least 2 fields");
    pairs.emplace_back(parse_number<Index>(cols[0], line_no, "index"),
                       parse_number<Index>(cols[1], line_no, "index"));
  }
  return pairs;
}

std::vector<int> parse_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto cols = fields(line);
    if (cols.empty()) continue;
    if (cols.size() != 1) fail_line(line_no, "expected a single label");
    labels.push_back(parse_number<int>(cols[0], line_no, "label"));
  }
  return labels;
}

void write_labels(std::ostream& out, std::span<const int> labels) {
  for (int l : labels) out << l << '\n';
}

SideInfo parse_side_info(std::istream& in) {
  std::optional<SideInfo> side;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto cols = fields(line);
    if (cols.empty()) continue;
    if (cols.size() != 3) fail_line(line_no, "expected 'i j f1,...,fm'");
    const auto i = parse_number<Index>(cols[0], line_no, "index");
    const auto j = parse_number<Index>(cols[1], line_no, "index");
    std::vector<double> values;
    std::string_view rest = cols[2];
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_real(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!side) side.emplace(values.size());
    if (values.size() != side->dim()) {
      fail_line(line_no, "expected " + std::to_string(side->dim()) + " covariates, found " +
                             std::to_string(values.size()));
    }
    side->set(i, j, Eigen::Map<const Eigen::VectorXd>(values.data(), Eigen::Index(values.size())));
  }
  return side ? std::move(*side) : SideInfo(0);
}

void write_scores(std::ostream& out, std::span<const std::pair<Index, Index>> pairs,
                  std::span<const double> scores) {
  if (pairs.size() != scores.size()) throw DataError("pairs and scores differ in length");
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    out << pairs[t].first << '\t' << pairs[t].second << '\t' << format_double(scores[t]) << '\n';
  }
}

std::vector<ScoredPair> parse_scores(std::istream& in) {
  std::vector<ScoredPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto cols = fields(line);
    if (cols.empty()) continue;
    if (cols.size() != 3) fail_line(line_no, "expected 'i j score'");
    out.push_back({parse_number<Index>(cols[0], line_no, "index"),
                   parse_number<Index>(cols[1], line_no, "index"), parse_real(cols[2], line_no)});
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

json checkpoint_to_json(const LatentState& state, const FitTrace& trace) {
  state.check();
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["n"] = state.n();
  doc["d"] = state.d();
  doc["K"] = state.K();
  doc["m"] = state.side_dim();
  doc["U"] = flat(state.U);
  doc["V"] = flat(state.V);
  doc["C"] = flat(state.C);
  doc["beta"] = std::vector<double>(state.beta.data(), state.beta.data() + state.beta.size());
  doc["z"] = state.z;
  doc["bias"] = state.bias;
  doc["objective_per_sweep"] = trace.objective_per_sweep;
  doc["eta_per_update"] = trace.eta_per_update;
  doc["reassignment_counts"] = trace.reassignment_counts;
  doc["warnings"] = trace.warnings;
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (!doc.is_object()) throw DataError("malformed checkpoint: not a JSON object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kFormatVersion) {
    throw DataError("version-mismatch: checkpoint format_version must be " +
                    std::to_string(kFormatVersion));
  }
  try {
    const auto n = doc.at("n").get<std::size_t>();
    const auto d = doc.at("d").get<int>();
    const auto K = doc.at("K").get<int>();
    const auto m = doc.at("m").get<std::size_t>();
    if (d < 1 || K < 1) throw DataError("dimension-inconsistency: d and K must be >= 1");
    const auto rows = static_cast<Eigen::Index>(n);
    Checkpoint cp;
    cp.state.U = unflat<RowMatrix>(doc.at("U"), rows, d, "U");
    cp.state.V = unflat<RowMatrix>(doc.at("V"), rows, d, "V");
    cp.state.C = unflat<Eigen::MatrixXd>(doc.at("C"), K, K, "C");
    cp.state.beta = unflat<Eigen::MatrixXd>(doc.at("beta"), static_cast<Eigen::Index>(m), 1, "beta").col(0);
    cp.state.z = doc.at("z").get<std::vector<int>>();
    if (cp.state.z.size() != n) {
      throw DataError("dimension-inconsistency: 'z' has length " +
                      std::to_string(cp.state.z.size()) + ", expected " + std::to_string(n));
    }
    cp.state.bias = doc.at("bias").get<double>();
    cp.state.check();
    cp.trace.objective_per_sweep = doc.at("objective_per_sweep").get<std::vector<double>>();
    cp.trace.eta_per_update = doc.value("eta_per_update", std::vector<double>{});
    cp.trace.reassignment_counts = doc.value("reassignment_counts", std::vector<int>{});
    cp.trace.warnings = doc.value("warnings", std::vector<std::string>{});
    return cp;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const LatentState& state, const FitTrace& trace,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << checkpoint_to_json(state, trace).dump() << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace lfbm
