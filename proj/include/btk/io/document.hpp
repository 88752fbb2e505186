#pragma once

// JSON bundle documents: paths plus named matrix families keyed to a path.
//
// Serialization is canonical: fixed key order, row-major nested arrays and
// 17-significant-digit floats, so parse -> serialize -> parse is the
// identity and serialize is byte-stable.

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "btk/error.hpp"
#include "btk/hermitian.hpp"
#include "btk/linalg.hpp"
#include "btk/morphism.hpp"
#include "btk/structure.hpp"
#include "btk/transport.hpp"

namespace btk::io {

using json = nlohmann::json;

inline constexpr std::string_view kFormatVersion = "1";

/// Exact equality that tolerates differing shapes.
inline bool same_values(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

inline bool same_values(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!same_values(a[k], b[k])) return false;
  return true;
}

inline bool same_values(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].size() != b[k].size() || a[k] != b[k]) return false;
  return true;
}

struct PathEntry {
  std::string name;
  std::vector<double> params;
  std::vector<std::string> labels;
  bool operator==(const PathEntry&) const = default;
};

/// Frame factors, almost complex fields: one n x n matrix per sample.
struct FamilyEntry {
  std::string name;
  std::string path;
  std::vector<Matrix> matrices;
  bool operator==(const FamilyEntry& o) const {
    return name == o.name && path == o.path && same_values(matrices, o.matrices);
  }
};

struct MorphismEntry {
  std::string name;
  std::string path;
  std::string target_path;
  std::vector<Index> base_map;
  std::vector<Matrix> matrices;
  bool operator==(const MorphismEntry& o) const {
    return name == o.name && path == o.path && target_path == o.target_path &&
           base_map == o.base_map && same_values(matrices, o.matrices);
  }
};

struct MetricEntry {
  std::string name;
  std::string path;
  BilinearKind kind = BilinearKind::Symmetric;
  std::vector<Matrix> matrices;
  bool operator==(const MetricEntry& o) const {
    return name == o.name && path == o.path && kind == o.kind && same_values(matrices, o.matrices);
  }
};

struct SectionEntry {
  std::string name;
  std::string path;
  std::vector<Vector> vectors;
  bool operator==(const SectionEntry& o) const {
    return name == o.name && path == o.path && same_values(vectors, o.vectors);
  }
};

/// A Hermitian structure pairs an almost complex field with a symmetric metric.
struct HermitianEntry {
  std::string name;
  std::string almost_complex;
  std::string metric;
  bool operator==(const HermitianEntry&) const = default;
};

struct BundleDocument {
  std::string version{kFormatVersion};
  int dim = 1;
  std::vector<PathEntry> paths;
  std::vector<FamilyEntry> factors;
  std::vector<MorphismEntry> morphisms;
  std::vector<MetricEntry> metrics;
  std::vector<FamilyEntry> almost_complex;
  std::vector<SectionEntry> sections;
  std::vector<HermitianEntry> hermitian;
  std::map<std::string, double> tolerances;

  bool operator==(const BundleDocument&) const = default;

  const PathEntry& path(const std::string& name) const { return find(paths, name, "path"); }
  const FamilyEntry& factor(const std::string& name) const { return find(factors, name, "factor"); }
  const MorphismEntry& morphism(const std::string& name) const {
    return find(morphisms, name, "morphism");
  }
  const MetricEntry& metric(const std::string& name) const { return find(metrics, name, "metric"); }
  const FamilyEntry& complex_field(const std::string& name) const {
    return find(almost_complex, name, "almost_complex");
  }
  const SectionEntry& section(const std::string& name) const { return find(sections, name, "section"); }
  const HermitianEntry& structure(const std::string& name) const {
    return find(hermitian, name, "hermitian");
  }

  PathGrid grid(const std::string& name) const {
    const auto& p = path(name);
    return PathGrid(p.params, p.labels);
  }

  /// Names already used by any entry kind.
  bool has_name(const std::string& name) const {
    auto in = [&](const auto& list) {
      for (const auto& e : list)
        if (e.name == name) return true;
      return false;
    };
    return in(paths) || in(factors) || in(morphisms) || in(metrics) || in(almost_complex) ||
           in(sections) || in(hermitian);
  }

 private:
  template <class T>
  static const T& find(const std::vector<T>& list, const std::string& name, const char* kind) {
    for (const auto& e : list)
      if (e.name == name) return e;
    fail(ErrorCode::MissingEntity, std::string("no ") + kind + " named '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Reader {
 public:
  [[noreturn]] static void schema(const std::string& where, const std::string& what) {
    fail(ErrorCode::SchemaError, where + ": " + what);
  }

  static const json& member(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object()) schema(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema(where, "missing field '" + key + "'");
    return *it;
  }

  static std::string string(const json& v, const std::string& where) {
    if (!v.is_string()) schema(where, "expected a string");
    return v.get<std::string>();
  }

  static double number(const json& v, const std::string& where) {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "NaN" || s == "nan" || s == "Infinity" || s == "-Infinity" || s == "inf" || s == "-inf")
        fail(ErrorCode::NonFiniteEntry, where + ": non-finite entry \"" + s + "\"");
    }
    if (!v.is_number()) schema(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ErrorCode::NonFiniteEntry, where + ": non-finite entry");
    return x;
  }

  static const json& array(const json& v, const std::string& where) {
    if (!v.is_array()) schema(where, "expected an array");
    return v;
  }

  static Index index(const json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0) schema(where, "expected a non-negative integer");
    return static_cast<Index>(v.get<long long>());
  }

  /// rows x cols matrix from nested row-major arrays.
  static Matrix matrix(const json& v, int rows, int cols, const std::string& where,
                       const std::string& entry) {
    array(v, where);
    if (static_cast<int>(v.size()) != rows)
      fail(ErrorCode::DimensionMismatch, entry + ": " + where + " has " + std::to_string(v.size()) +
                                             " rows, expected " + std::to_string(rows));
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      const auto rw = where + "[" + std::to_string(i) + "]";
      const json& row = array(v[static_cast<std::size_t>(i)], rw);
      if (static_cast<int>(row.size()) != cols)
        fail(ErrorCode::DimensionMismatch, entry + ": " + rw + " has " + std::to_string(row.size()) +
                                               " columns, expected " + std::to_string(cols));
      for (int j = 0; j < cols; ++j)
        m(i, j) = number(row[static_cast<std::size_t>(j)], rw + "[" + std::to_string(j) + "]");
    }
    return m;
  }

  static std::vector<Matrix> matrices(const json& v, int n, Index samples, const std::string& where,
                                      const std::string& entry) {
    array(v, where);
    if (v.size() != samples)
      fail(ErrorCode::DimensionMismatch, entry + ": " + std::to_string(v.size()) +
                                             " matrices for a path of " + std::to_string(samples) +
                                             " samples");
    std::vector<Matrix> out;
    out.reserve(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
      out.push_back(matrix(v[k], n, n, where + "[" + std::to_string(k) + "]", entry));
    return out;
  }
};

inline bool looks_non_finite(std::string_view text, std::size_t pos) {
  const std::size_t lo = pos > 12 ? pos - 12 : 0;
  const auto window = text.substr(lo, 24);
  return window.find("NaN") != std::string_view::npos || window.find("Infinity") != std::string_view::npos ||
         window.find("nan") != std::string_view::npos || window.find("inf") != std::string_view::npos;
}

}  // namespace detail

inline BundleDocument parse_document(std::string_view text) {
  using R = detail::Reader;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    if (detail::looks_non_finite(text, e.byte)) fail(ErrorCode::NonFiniteEntry, "bare non-finite literal");
    fail(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) R::schema("$", "document must be an object");

  BundleDocument doc;
  doc.version = R::string(R::member(root, "version", "$"), "$.version");
  if (doc.version != kFormatVersion) R::schema("$.version", "unsupported version '" + doc.version + "'");
  const json& fiber = R::member(root, "fiber", "$");
  const json& dim = R::member(fiber, "dim", "$.fiber");
  if (!dim.is_number_integer() || dim.get<long long>() < 1) R::schema("$.fiber.dim", "expected a positive integer");
  doc.dim = static_cast<int>(dim.get<long long>());

  std::map<std::string, Index> sizes;
  auto check_name = [&](const std::string& name, const std::string& where) {
    if (name.empty()) R::schema(where, "empty name");
    if (doc.has_name(name)) R::schema(where, "duplicate name '" + name + "'");
  };
  auto samples_of = [&](const std::string& path, const std::string& where) {
    auto it = sizes.find(path);
    if (it == sizes.end()) fail(ErrorCode::SchemaError, where + ": unknown path '" + path + "'");
    return it->second;
  };
  auto list = [&](const char* key) -> const json* {
    auto it = root.find(key);
    if (it == root.end()) return nullptr;
    return &R::array(*it, std::string("$.") + key);
  };

  if (const json* paths = list("paths")) {
    for (std::size_t k = 0; k < paths->size(); ++k) {
      const auto where = "$.paths[" + std::to_string(k) + "]";
      const json& e = (*paths)[k];
      PathEntry p;
      p.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(p.name, where);
      const json& params = R::array(R::member(e, "params", where), where + ".params");
      for (std::size_t i = 0; i < params.size(); ++i)
        p.params.push_back(R::number(params[i], where + ".params[" + std::to_string(i) + "]"));
      if (auto it = e.find("labels"); it != e.end()) {
        R::array(*it, where + ".labels");
        for (std::size_t i = 0; i < it->size(); ++i)
          p.labels.push_back(R::string((*it)[i], where + ".labels[" + std::to_string(i) + "]"));
      }
      try {
        const PathGrid grid(p.params, p.labels);
        p.labels = grid.labels();
      } catch (const Error& err) {
        R::schema(where, err.what());
      }
      sizes[p.name] = p.params.size();
      doc.paths.push_back(std::move(p));
    }
  }
  if (doc.paths.empty()) R::schema("$.paths", "document needs at least one path");

  auto read_family = [&](const char* key, std::vector<FamilyEntry>& out) {
    const json* arr = list(key);
    if (!arr) return;
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const auto where = std::string("$.") + key + "[" + std::to_string(k) + "]";
      const json& e = (*arr)[k];
      FamilyEntry f;
      f.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(f.name, where);
      f.path = R::string(R::member(e, "path", where), where + ".path");
      f.matrices = R::matrices(R::member(e, "matrices", where), doc.dim, samples_of(f.path, where),
                               where + ".matrices", f.name);
      out.push_back(std::move(f));
    }
  };
  read_family("factors", doc.factors);

  if (const json* arr = list("morphisms")) {
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const auto where = "$.morphisms[" + std::to_string(k) + "]";
      const json& e = (*arr)[k];
      MorphismEntry m;
      m.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(m.name, where);
      m.path = R::string(R::member(e, "path", where), where + ".path");
      const Index n = samples_of(m.path, where);
      m.target_path = m.path;
      if (auto it = e.find("target_path"); it != e.end()) m.target_path = R::string(*it, where + ".target_path");
      const Index target_n = samples_of(m.target_path, where);
      if (auto it = e.find("base_map"); it != e.end()) {
        R::array(*it, where + ".base_map");
        for (std::size_t i = 0; i < it->size(); ++i)
          m.base_map.push_back(R::index((*it)[i], where + ".base_map[" + std::to_string(i) + "]"));
      } else {
        if (m.target_path != m.path) R::schema(where, "base_map is required when target_path differs");
        for (Index i = 0; i < n; ++i) m.base_map.push_back(i);
      }
      if (m.base_map.size() != n)
        fail(ErrorCode::DimensionMismatch, m.name + ": base_map length differs from the path");
      for (Index v : m.base_map)
        if (v >= target_n) fail(ErrorCode::SchemaError, where + ".base_map: index outside the target path");
      m.matrices = R::matrices(R::member(e, "matrices", where), doc.dim, n, where + ".matrices", m.name);
      doc.morphisms.push_back(std::move(m));
    }
  }

  if (const json* arr = list("metrics")) {
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const auto where = "$.metrics[" + std::to_string(k) + "]";
      const json& e = (*arr)[k];
      MetricEntry m;
      m.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(m.name, where);
      m.path = R::string(R::member(e, "path", where), where + ".path");
      if (auto it = e.find("kind"); it != e.end()) {
        const auto kind = R::string(*it, where + ".kind");
        if (kind == "symmetric") m.kind = BilinearKind::Symmetric;
        else if (kind == "antisymmetric") m.kind = BilinearKind::Antisymmetric;
        else R::schema(where + ".kind", "expected 'symmetric' or 'antisymmetric'");
      }
      m.matrices = R::matrices(R::member(e, "matrices", where), doc.dim, samples_of(m.path, where),
                               where + ".matrices", m.name);
      doc.metrics.push_back(std::move(m));
    }
  }

  read_family("almost_complex", doc.almost_complex);

  if (const json* arr = list("sections")) {
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const auto where = "$.sections[" + std::to_string(k) + "]";
      const json& e = (*arr)[k];
      SectionEntry s;
      s.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(s.name, where);
      s.path = R::string(R::member(e, "path", where), where + ".path");
      const json& vs = R::array(R::member(e, "vectors", where), where + ".vectors");
      if (vs.size() != samples_of(s.path, where))
        fail(ErrorCode::DimensionMismatch, s.name + ": vector count differs from the path");
      for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto vw = where + ".vectors[" + std::to_string(i) + "]";
        const json& v = R::array(vs[i], vw);
        if (static_cast<int>(v.size()) != doc.dim)
          fail(ErrorCode::DimensionMismatch, s.name + ": " + vw + " has " + std::to_string(v.size()) +
                                                 " entries, fibre dim " + std::to_string(doc.dim));
        Vector x(doc.dim);
        for (int j = 0; j < doc.dim; ++j)
          x(j) = R::number(v[static_cast<std::size_t>(j)], vw + "[" + std::to_string(j) + "]");
        s.vectors.push_back(std::move(x));
      }
      doc.sections.push_back(std::move(s));
    }
  }

  if (const json* arr = list("hermitian")) {
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const auto where = "$.hermitian[" + std::to_string(k) + "]";
      const json& e = (*arr)[k];
      HermitianEntry h;
      h.name = R::string(R::member(e, "name", where), where + ".name");
      check_name(h.name, where);
      h.almost_complex = R::string(R::member(e, "almost_complex", where), where + ".almost_complex");
      h.metric = R::string(R::member(e, "metric", where), where + ".metric");
      try {
        const auto& j = doc.complex_field(h.almost_complex);
        const auto& g = doc.metric(h.metric);
        if (j.path != g.path) R::schema(where, "almost_complex and metric use different paths");
      } catch (const Error& err) {
        if (err.code() == ErrorCode::MissingEntity) R::schema(where, err.what());
        throw;
      }
      doc.hermitian.push_back(std::move(h));
    }
  }

  if (auto it = root.find("tolerances"); it != root.end()) {
    if (!it->is_object()) R::schema("$.tolerances", "expected an object");
    for (const auto& [key, value] : it->items()) {
      const double tol = R::number(value, "$.tolerances." + key);
      if (!(tol > 0.0)) R::schema("$.tolerances." + key, "tolerance must be positive");
      doc.tolerances[key] = tol;
    }
  }

  for (const auto& [key, value] : root.items()) {
    static const char* known[] = {"version", "fiber", "paths", "factors", "morphisms", "metrics",
                                  "almost_complex", "sections", "hermitian", "tolerances"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) R::schema("$." + key, "unknown field");
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Serialization

/// Shortest-safe decimal: 17 significant digits, always with a '.' or
/// exponent so that it reads back as a float.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline std::string quote(const std::string& s) { return json(s).dump(); }

inline std::string row_string(const Matrix& m, Eigen::Index i) {
  std::string out = "[";
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out += ", ";
    out += format_double(m(i, j));
  }
  return out + "]";
}

inline std::string matrix_string(const Matrix& m) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += ", ";
    out += row_string(m, i);
  }
  return out + "]";
}

inline std::string vector_string(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v(i));
  }
  return out + "]";
}

template <class T, class Body>
void write_list(std::ostringstream& os, const char* key, const std::vector<T>& items, Body&& body,
                bool last = false) {
  os << "  " << quote(key) << ": [";
  for (std::size_t k = 0; k < items.size(); ++k) {
    os << (k ? ",\n" : "\n") << "    {";
    body(items[k]);
    os << "}";
  }
  os << (items.empty() ? "]" : "\n  ]") << (last ? "\n" : ",\n");
}

template <class Seq, class Fmt>
std::string join(const Seq& seq, Fmt&& fmt) {
  std::string out = "[";
  bool first = true;
  for (const auto& x : seq) {
    if (!first) out += ", ";
    out += fmt(x);
    first = false;
  }
  return out + "]";
}

inline std::string matrices_block(const std::vector<Matrix>& ms) {
  std::string out = "[";
  for (std::size_t k = 0; k < ms.size(); ++k) {
    out += (k ? ",\n      " : "\n      ") + matrix_string(ms[k]);
  }
  return out + (ms.empty() ? "]" : "\n    ]");
}

}  // namespace detail

inline std::string serialize_document(const BundleDocument& doc) {
  using detail::quote;
  std::ostringstream os;
  os << "{\n";
  os << "  \"version\": " << quote(doc.version) << ",\n";
  os << "  \"fiber\": {\"dim\": " << doc.dim << "},\n";
  detail::write_list(os, "paths", doc.paths, [&](const PathEntry& p) {
    os << "\"name\": " << quote(p.name)
       << ", \"params\": " << detail::join(p.params, format_double)
       << ", \"labels\": " << detail::join(p.labels, quote);
  });
  auto family = [&](const FamilyEntry& f) {
    os << "\"name\": " << quote(f.name) << ", \"path\": " << quote(f.path)
       << ", \"matrices\": " << detail::matrices_block(f.matrices);
  };
  detail::write_list(os, "factors", doc.factors, family);
  detail::write_list(os, "morphisms", doc.morphisms, [&](const MorphismEntry& m) {
    os << "\"name\": " << quote(m.name) << ", \"path\": " << quote(m.path)
       << ", \"target_path\": " << quote(m.target_path)
       << ", \"base_map\": " << detail::join(m.base_map, [](Index i) { return std::to_string(i); })
       << ", \"matrices\": " << detail::matrices_block(m.matrices);
  });
  detail::write_list(os, "metrics", doc.metrics, [&](const MetricEntry& m) {
    os << "\"name\": " << quote(m.name) << ", \"path\": " << quote(m.path) << ", \"kind\": "
       << quote(m.kind == BilinearKind::Symmetric ? "symmetric" : "antisymmetric")
       << ", \"matrices\": " << detail::matrices_block(m.matrices);
  });
  detail::write_list(os, "almost_complex", doc.almost_complex, family);
  detail::write_list(os, "sections", doc.sections, [&](const SectionEntry& s) {
    os << "\"name\": " << quote(s.name) << ", \"path\": " << quote(s.path)
       << ", \"vectors\": " << detail::join(s.vectors, detail::vector_string);
  });
  detail::write_list(os, "hermitian", doc.hermitian, [&](const HermitianEntry& h) {
    os << "\"name\": " << quote(h.name) << ", \"almost_complex\": " << quote(h.almost_complex)
       << ", \"metric\": " << quote(h.metric);
  });
  os << "  \"tolerances\": {";
  bool first = true;
  for (const auto& [key, value] : doc.tolerances) {
    os << (first ? "" : ", ") << quote(key) << ": " << format_double(value);
    first = false;
  }
  os << "}\n}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Typed views

inline LinearTransport transport_of(const BundleDocument& doc, const std::string& factor) {
  const auto& f = doc.factor(factor);
  return LinearTransport(FrameFactor(doc.grid(f.path), FiberSpec(doc.dim), f.matrices));
}

inline PathMorphism morphism_of(const BundleDocument& doc, const std::string& name) {
  const auto& m = doc.morphism(name);
  return PathMorphism(BaseMap(doc.grid(m.path), doc.grid(m.target_path), m.base_map), m.matrices);
}

inline BilinearField metric_of(const BundleDocument& doc, const std::string& name, double tol) {
  const auto& m = doc.metric(name);
  return BilinearField(doc.grid(m.path), m.matrices, m.kind, tol);
}

inline AlmostComplexField complex_field_of(const BundleDocument& doc, const std::string& name) {
  const auto& j = doc.complex_field(name);
  return AlmostComplexField(doc.grid(j.path), j.matrices);
}

inline SectionField section_of(const BundleDocument& doc, const std::string& name) {
  const auto& s = doc.section(name);
  return SectionField(doc.grid(s.path), s.vectors);
}

inline HermitianStructure structure_of(const BundleDocument& doc, const std::string& name, double tol) {
  const auto& h = doc.structure(name);
  return HermitianStructure(complex_field_of(doc, h.almost_complex), metric_of(doc, h.metric, tol));
}

/// Parses "[[a, b], [c, d]]" (JSON nested arrays) into a matrix.
inline Matrix parse_matrix(std::string_view text) {
  json v;
  try {
    v = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, std::string("matrix literal is not valid JSON: ") + e.what());
  }
  if (!v.is_array() || v.empty() || !v[0].is_array())
    fail(ErrorCode::SchemaError, "matrix literal must be a nested array");
  return detail::Reader::matrix(v, static_cast<int>(v.size()), static_cast<int>(v[0].size()), "matrix",
                                "matrix literal");
}

}  // namespace btk::io
