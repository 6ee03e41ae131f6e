#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/grid.hpp"

namespace hflow {

inline constexpr int kFieldFormatVersion = 1;

/// %.17g rendering: 17 significant digits, enough to round-trip any double.
/// Non-finite values print as nan / inf / -inf.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  std::string s(text);
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  if (first == std::string::npos) fail(ErrorCode::Io, "empty number for " + std::string(what));
  s = s.substr(first, last - first + 1);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    fail(ErrorCode::Io, "cannot parse '" + s + "' as number for " + std::string(what));
  return v;
}

inline void write_field(std::ostream& out, const ScalarField& f) {
  const Grid& g = f.grid;
  out << "hflow-scalar-field\n";
  out << "format_version=" << kFieldFormatVersion << "\n";
  out << "dim=" << g.dim() << "\n";
  out << "origin=" << format_double(g.origin()[0]);
  if (g.dim() == 2) out << " " << format_double(g.origin()[1]);
  out << "\nspacing=" << format_double(g.spacing()) << "\n";
  out << "extents=" << g.extents()[0];
  if (g.dim() == 2) out << " " << g.extents()[1];
  out << "\nvalues\n";
  for (double v : f.values) out << format_double(v) << "\n";
}

inline void write_field(const std::filesystem::path& path, const ScalarField& f) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_field(out, f);
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

inline ScalarField read_field(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  auto next = [&](std::string_view expect_key) -> std::string {
    if (!std::getline(in, line)) fail(ErrorCode::Io, source + ": truncated header");
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != expect_key)
      fail(ErrorCode::Io, source + ": expected '" + std::string(expect_key) + "=' got '" + line + "'");
    return line.substr(eq + 1);
  };
  if (!std::getline(in, line) || line != "hflow-scalar-field")
    fail(ErrorCode::Io, source + ": not a scalar field file");
  const int version = std::stoi(next("format_version"));
  if (version != kFieldFormatVersion)
    fail(ErrorCode::Io, source + ": unsupported format_version " + std::to_string(version));
  const int dim = std::stoi(next("dim"));
  std::array<double, 2> origin{0.0, 0.0};
  {
    std::istringstream s(next("origin"));
    std::string tok;
    for (int d = 0; d < dim && s >> tok; ++d) origin[d] = parse_double(tok, "origin");
  }
  const double spacing = parse_double(next("spacing"), "spacing");
  std::array<int, 2> extents{1, 1};
  {
    std::istringstream s(next("extents"));
    for (int d = 0; d < dim; ++d)
      if (!(s >> extents[d])) fail(ErrorCode::Io, source + ": bad extents");
  }
  if (!std::getline(in, line) || line != "values") fail(ErrorCode::Io, source + ": missing 'values'");
  Grid grid(dim, origin, spacing, extents);
  ScalarField f(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (!std::getline(in, line))
      fail(ErrorCode::Io, source + ": expected " + std::to_string(grid.size()) + " values");
    f[n] = parse_double(line, "value");
  }
  return f;
}

inline ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_field(in, path.string());
}

/// Ordered list of key=value pairs; the flat text format shared by manifests
/// and run configs. Blank lines and lines starting with '#' are ignored.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return kv.second;
    return std::nullopt;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) fail(ErrorCode::Io, "missing key '" + key + "'");
    return *v;
  }
  double require_double(const std::string& key) const { return parse_double(require(key), key); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    write(out);
  }

  static KeyValues parse(std::istream& in, const std::string& source = "<stream>") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::Config, source + ":" + std::to_string(lineno) + ": expected key=value");
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
  }
  static KeyValues read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    return parse(in, path.string());
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace hflow
