#include "dcmg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dcmg {

std::vector<std::string> trace_header(std::size_t n_sources) {
  std::vector<std::string> h{"t"};
  for (const auto& s : state_labels(n_sources)) h.push_back(s);
  const std::size_t k = n_sources + 1;
  for (std::size_t i = 1; i <= k; ++i) h.push_back("u" + std::to_string(i));
  for (std::size_t i = 1; i <= k; ++i) h.push_back("delta" + std::to_string(i));
  for (std::size_t i = 1; i <= k; ++i) h.push_back("V" + std::to_string(i));
  h.push_back("H");
  for (std::size_t i = 1; i <= k; ++i) h.push_back("rho" + std::to_string(i));
  h.push_back("qp_feasible_mask");
  return h;
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
  const auto header = trace_header(trace.n_sources);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.12g", v);
    os << buf;
  };
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%.12g", r.t);
    os << buf;
    for (Eigen::Index i = 0; i < r.state.vec().size(); ++i) put(r.state.vec()[i]);
    for (double v : r.command) put(v);
    for (double v : r.attack) put(v);
    for (double v : r.clf) put(v);
    put(r.hamiltonian);
    for (double v : r.rho) put(v);
    os << ',' << r.qp_feasible_mask << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_trace_csv(out, trace);
  if (!out) throw IoError("write failed for " + path.string());
}

int TraceTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  const std::string s = cell;
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw IoError("line " + std::to_string(line_no) + ": column '" + column +
                  "' is not a number: '" + cell + "'");
  }
  return v;
}

}  // namespace

TraceTable read_trace_csv(std::istream& is) {
  TraceTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("trace is empty (no header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  if (t.header.empty() || t.header.front() != "t") {
    throw IoError("line 1: trace header must start with 't'");
  }
  for (const char* required : {"vb", "if", "vl", "H"}) {
    if (t.find(required) < 0) throw IoError(std::string("line 1: missing column '") + required + "'");
  }
  t.columns.assign(t.header.size(), {});
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw IoError("line " + std::to_string(line_no) + ": expected " +
                    std::to_string(t.header.size()) + " fields, got " +
                    std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      t.columns[c].push_back(parse_cell(cells[c], line_no, t.header[c]));
    }
  }
  return t;
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_trace_csv(in);
}

}  // namespace dcmg
