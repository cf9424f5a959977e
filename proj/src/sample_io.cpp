#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "ndiff/core.hpp"
#include "ndiff/error.hpp"

namespace ndiff {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Splits on any of `seps`, skipping empty fields.
std::vector<long> parse_ints(std::string_view line, std::string_view seps, std::size_t line_no) {
  std::vector<long> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto end = line.find_first_of(seps, pos);
    const auto field = trim(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (!field.empty()) {
      long v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size())
        throw IoError("line " + std::to_string(line_no) + ": not an integer: '" + std::string(field) + "'");
      out.push_back(v);
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

bool parse_header(std::string_view line, int& q, int& p) {
  line = trim(line);
  if (line.rfind("q=", 0) != 0) return false;
  std::istringstream ss{std::string(line)};
  std::string qs, ps;
  ss >> qs >> ps;
  if (ps.rfind("p=", 0) != 0) throw IoError("malformed sample header: '" + std::string(line) + "'");
  try {
    q = std::stoi(qs.substr(2));
    p = std::stoi(ps.substr(2));
  } catch (const std::exception&) {
    throw IoError("malformed sample header: '" + std::string(line) + "'");
  }
  if (q < 1 || p < 2) throw IoError("invalid q/p in sample header");
  return true;
}

}  // namespace

void write_samples(std::ostream& out, const SampleSet& samples) {
  out << "q=" << samples.q() << " p=" << samples.p() << '\n';
  if (!samples.provenance().empty()) {
    std::istringstream prov(samples.provenance());
    for (std::string line; std::getline(prov, line);) out << "# " << line << '\n';
  }
  std::string buf;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    buf.clear();
    for (Symbol s : samples.row(i)) {
      if (!buf.empty()) buf.push_back(' ');
      buf += std::to_string(s);
    }
    buf.push_back('\n');
    out << buf;
  }
}

void write_samples(const std::filesystem::path& path, const SampleSet& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_samples(out, samples);
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

SampleSet read_samples(std::istream& in, std::optional<int> p_hint) {
  std::string line;
  std::size_t line_no = 0;
  int q = 0;
  int p = 0;
  bool native = false;
  std::string provenance;
  std::vector<long> values;
  std::size_t rows = 0;

  auto take_row = [&](const std::vector<long>& row) {
    if (q == 0) q = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != q)
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(q) + " columns, got " +
                    std::to_string(row.size()));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (native) {
        auto body = trim(t.substr(1));
        if (!provenance.empty()) provenance.push_back('\n');
        provenance.append(body);
      }
      continue;
    }
    if (rows == 0 && !native && q == 0 && parse_header(t, q, p)) {
      native = true;
      continue;
    }
    take_row(parse_ints(t, native ? " \t" : ", \t", line_no));
  }
  if (in.bad()) throw IoError("read error");
  if (rows == 0) throw IoError("sample file contains no rows");

  long max_symbol = 0;
  for (long v : values) {
    if (v < 0) throw IoError("negative symbol in sample file");
    max_symbol = std::max(max_symbol, v);
  }
  if (!native) p = p_hint ? *p_hint : std::max(2, static_cast<int>(max_symbol) + 1);
  if (native && p_hint && *p_hint != p) throw IoError("alphabet size in header disagrees with the requested p");
  if (max_symbol >= p)
    throw IoError("symbol " + std::to_string(max_symbol) + " outside alphabet of size " + std::to_string(p));

  std::vector<Symbol> flat(values.begin(), values.end());
  return SampleSet(q, p, std::move(flat), std::move(provenance));
}

SampleSet read_samples(const std::filesystem::path& path, std::optional<int> p) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_samples(in, p);
}

}  // namespace ndiff
