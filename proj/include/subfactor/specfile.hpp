#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subfactor/inclusion.hpp"

namespace subfactor {

/// Parsed inclusion spec file: a line-oriented key/value document.
///
///   name c2
///   dims_N 1 1
///   dims_M 2
///   G 1
///   G 1
///   depth 2          (optional)
///   sigma 0          (optional, one entry per M block, 0-based images)
///   u 0,0 1,0        (optional, rows of the blocks of u in order,
///   u 1,0 0,0         complex entries as "re,im")
///
/// '#' starts a comment line; blank lines are skipped; unknown keys are
/// rejected with their line number.
struct InclusionSpec {
  std::string name;
  std::vector<int> dims_n;
  std::vector<int> dims_m;
  std::vector<std::vector<int>> g_rows;
  std::optional<int> depth;
  std::optional<std::vector<int>> sigma;
  std::optional<std::vector<std::vector<Complex>>> u_rows;

  bool operator==(const InclusionSpec& o) const {
    return name == o.name && dims_n == o.dims_n && dims_m == o.dims_m &&
           g_rows == o.g_rows && depth == o.depth && sigma == o.sigma &&
           u_rows == o.u_rows;
  }

  InclusionMatrix matrix() const {
    InclusionMatrix g(static_cast<int>(g_rows.size()),
                      static_cast<int>(dims_m.size()));
    for (std::size_t i = 0; i < g_rows.size(); ++i)
      for (std::size_t j = 0; j < g_rows[i].size(); ++j)
        g(static_cast<int>(i), static_cast<int>(j)) = g_rows[i][j];
    return g;
  }

  Inclusion to_inclusion() const {
    return Inclusion::validate(dims_n, dims_m, matrix());
  }

  bool has_automorphism() const { return sigma.has_value(); }

  /// unitary u as an element of M, assembled from the stored rows
  AlgebraElement unitary(const AlgebraPtr& big) const {
    if (!u_rows)
      throw StructuralError("spec: no automorphism unitary present");
    std::vector<CMatrix> blocks;
    std::size_t r = 0;
    for (int n : dims_m) {
      CMatrix b(n, n);
      for (int p = 0; p < n; ++p, ++r) {
        if (r >= u_rows->size() ||
            static_cast<int>((*u_rows)[r].size()) != n)
          throw StructuralError("spec: u rows do not match dims_M");
        for (int q = 0; q < n; ++q) b(p, q) = (*u_rows)[r][q];
      }
      blocks.push_back(std::move(b));
    }
    if (r != u_rows->size())
      throw StructuralError("spec: u rows do not match dims_M");
    return {big, std::move(blocks)};
  }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
  std::ostringstream os;
  os << "parse error at line " << line << ": " << msg;
  throw StructuralError(os.str());
}

inline int parse_int(const std::string& tok, int line, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) parse_fail(line, std::string("bad ") + what);
    return v;
  } catch (const StructuralError&) {
    throw;
  } catch (...) {
    parse_fail(line, std::string("bad ") + what);
  }
}

inline Complex parse_complex(const std::string& tok, int line) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos)
    parse_fail(line, "complex entry must be re,im");
  try {
    std::size_t u1 = 0, u2 = 0;
    const double re = std::stod(tok.substr(0, comma), &u1);
    const double im = std::stod(tok.substr(comma + 1), &u2);
    if (u1 != comma || u2 != tok.size() - comma - 1)
      parse_fail(line, "bad complex entry");
    return {re, im};
  } catch (const StructuralError&) {
    throw;
  } catch (...) {
    parse_fail(line, "bad complex entry");
  }
}

}  // namespace detail

inline InclusionSpec parse_spec(const std::string& text) {
  InclusionSpec spec;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_name = false, saw_n = false, saw_m = false;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    if (key == "name") {
      if (toks.size() != 2) detail::parse_fail(lineno, "name takes one token");
      spec.name = toks[1];
      saw_name = true;
    } else if (key == "dims_N") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        spec.dims_n.push_back(detail::parse_int(toks[i], lineno, "dimension"));
      if (spec.dims_n.empty()) detail::parse_fail(lineno, "dims_N is empty");
      saw_n = true;
    } else if (key == "dims_M") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        spec.dims_m.push_back(detail::parse_int(toks[i], lineno, "dimension"));
      if (spec.dims_m.empty()) detail::parse_fail(lineno, "dims_M is empty");
      saw_m = true;
    } else if (key == "G") {
      if (!saw_n || !saw_m)
        detail::parse_fail(lineno, "G before dims_N/dims_M");
      std::vector<int> row;
      for (std::size_t i = 1; i < toks.size(); ++i)
        row.push_back(detail::parse_int(toks[i], lineno, "G entry"));
      if (row.size() != spec.dims_m.size()) {
        std::ostringstream os;
        os << "G row " << (spec.g_rows.size() + 1) << " has "
           << row.size() << " entries, expected " << spec.dims_m.size();
        detail::parse_fail(lineno, os.str());
      }
      spec.g_rows.push_back(std::move(row));
    } else if (key == "depth") {
      if (toks.size() != 2) detail::parse_fail(lineno, "depth takes one int");
      spec.depth = detail::parse_int(toks[1], lineno, "depth");
    } else if (key == "sigma") {
      std::vector<int> s;
      for (std::size_t i = 1; i < toks.size(); ++i)
        s.push_back(detail::parse_int(toks[i], lineno, "sigma entry"));
      if (saw_m && s.size() != spec.dims_m.size())
        detail::parse_fail(lineno, "sigma length must match dims_M");
      spec.sigma = std::move(s);
    } else if (key == "u") {
      std::vector<Complex> row;
      for (std::size_t i = 1; i < toks.size(); ++i)
        row.push_back(detail::parse_complex(toks[i], lineno));
      if (!spec.u_rows) spec.u_rows.emplace();
      spec.u_rows->push_back(std::move(row));
    } else {
      detail::parse_fail(lineno, "unknown key '" + key + "'");
    }
  }
  if (!saw_name) throw StructuralError("parse error: missing name");
  if (!saw_n || !saw_m)
    throw StructuralError("parse error: missing dims_N or dims_M");
  if (spec.g_rows.size() != spec.dims_n.size()) {
    std::ostringstream os;
    os << "parse error: G has " << spec.g_rows.size()
       << " rows, expected " << spec.dims_n.size();
    throw StructuralError(os.str());
  }
  if (spec.sigma && !spec.u_rows)
    throw StructuralError("parse error: sigma without u");
  if (spec.u_rows && !spec.sigma)
    throw StructuralError("parse error: u without sigma");
  return spec;
}

inline InclusionSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open spec file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_spec(os.str());
}

inline std::string print_spec(const InclusionSpec& spec) {
  std::ostringstream os;
  os << "name " << spec.name << "\n";
  os << "dims_N";
  for (int d : spec.dims_n) os << ' ' << d;
  os << "\ndims_M";
  for (int d : spec.dims_m) os << ' ' << d;
  os << "\n";
  for (const auto& row : spec.g_rows) {
    os << "G";
    for (int v : row) os << ' ' << v;
    os << "\n";
  }
  if (spec.depth) os << "depth " << *spec.depth << "\n";
  if (spec.sigma) {
    os << "sigma";
    for (int s : *spec.sigma) os << ' ' << s;
    os << "\n";
  }
  if (spec.u_rows) {
    char buf[96];
    for (const auto& row : *spec.u_rows) {
      os << "u";
      for (const Complex& c : row) {
        std::snprintf(buf, sizeof buf, " %.17g,%.17g", c.real(), c.imag());
        os << buf;
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace subfactor
