#pragma once

// Check / solve / synthesize commands over bundle documents. The CLI is a
// thin wrapper around these.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btk/error.hpp"
#include "btk/hermitian.hpp"
#include "btk/io/document.hpp"
#include "btk/morphism.hpp"
#include "btk/structure.hpp"
#include "btk/transport.hpp"

namespace btk::io {

/// Stable process exit codes.
enum class ExitCode : int { Pass = 0, CheckFailed = 1, Infeasible = 2, InputError = 3 };

struct Location {
  std::string path;
  Index from = 0;
  Index to = 0;
};

struct Verdict {
  std::string check;
  std::string subject;
  bool pass = true;
  /// Relative residual compared against the tolerance.
  double residual = 0.0;
  double abs_residual = 0.0;
  double tolerance = 0.0;
  /// Present iff the check failed.
  std::optional<Location> worst;
  double elapsed_ms = 0.0;
  std::string note;
};

inline json to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["check"] = v.check;
  j["subject"] = v.subject;
  j["pass"] = v.pass;
  j["residual"] = v.residual;
  j["abs_residual"] = v.abs_residual;
  j["tolerance"] = v.tolerance;
  if (v.worst) j["worst"] = {{"path", v.worst->path}, {"from", v.worst->from}, {"to", v.worst->to}};
  else j["worst"] = nullptr;
  j["elapsed_ms"] = v.elapsed_ms;
  if (!v.note.empty()) j["note"] = v.note;
  return json::parse(j.dump());
}

inline std::string to_text(const Verdict& v) {
  std::string s = std::string(v.pass ? "PASS" : "FAIL") + "  " + v.check + "  " + v.subject +
                  "  residual=" + format_double(v.residual) + " (abs " + format_double(v.abs_residual) +
                  ", tol " + format_double(v.tolerance) + ")";
  if (v.worst)
    s += "  worst=" + v.worst->path + "[" + std::to_string(v.worst->from) + "->" +
         std::to_string(v.worst->to) + "]";
  if (!v.note.empty()) s += "  " + v.note;
  return s;
}

/// Tolerance precedence: explicit flag, document entry for the check, the
/// document default, the BTK_TOL environment variable, then 1e-9.
inline double resolve_tolerance(const BundleDocument* doc, const std::string& check,
                                std::optional<double> flag) {
  if (flag) {
    if (!(*flag > 0.0)) fail(ErrorCode::InvalidArgument, "--tol must be positive");
    return *flag;
  }
  if (doc) {
    if (auto it = doc->tolerances.find(check); it != doc->tolerances.end()) return it->second;
    if (auto it = doc->tolerances.find("default"); it != doc->tolerances.end()) return it->second;
  }
  if (const char* env = std::getenv("BTK_TOL")) {
    char* end = nullptr;
    const double t = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(t > 0.0) || !std::isfinite(t))
      fail(ErrorCode::InvalidArgument, std::string("BTK_TOL is not a positive number: ") + env);
    return t;
  }
  return kDefaultTol;
}

struct CheckArgs {
  std::optional<std::string> factor;
  std::optional<std::string> t1;
  std::optional<std::string> t2;
  std::optional<std::string> morphism;
  std::optional<std::string> field;
  std::optional<std::string> metric;
  std::optional<std::string> section;
  std::optional<std::string> structure;
  /// Affine shift c for a black-box transport v -> H v + (s_j - s_i) c.
  std::optional<std::vector<double>> shift;
  std::optional<double> tol;
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"groupoid",    "consistency", "section",   "almost-complex",
                                              "homogeneity", "additivity",  "finsler",   "bilinear",
                                              "hermitian"};
  return names;
}

namespace detail {

inline const std::string& need(const std::optional<std::string>& v, const char* flag) {
  if (!v) fail(ErrorCode::MissingEntity, std::string("missing required flag --") + flag);
  return *v;
}

inline Verdict from_pair_report(std::string check, std::string subject, const PairReport& r, double tol,
                                const std::string& path) {
  Verdict v{std::move(check), std::move(subject), r.pass, r.max_relative, r.max_residual, tol,
            std::nullopt, 0.0, {}};
  if (r.worst_pair) v.worst = Location{path, r.worst_pair->first, r.worst_pair->second};
  return v;
}

inline GeneralTransport general_of(const BundleDocument& doc, const CheckArgs& args) {
  const auto& name = need(args.factor, "factor");
  const LinearTransport t = transport_of(doc, name);
  auto g = as_general(t);
  if (args.shift) {
    if (static_cast<int>(args.shift->size()) != doc.dim)
      fail(ErrorCode::DimensionMismatch, "--shift needs " + std::to_string(doc.dim) + " components");
    const Vector c = Eigen::Map<const Vector>(args.shift->data(), doc.dim);
    const PathGrid grid = t.grid();
    g.map = [t, c, grid](Index i, Index j, const Vector& v) -> Vector {
      return t.apply(i, j, v) + (grid.param(j) - grid.param(i)) * c;
    };
  }
  return g;
}

}  // namespace detail

/// Runs one named check. Each verdict's `pass` reflects the check; input
/// problems surface as btk::Error.
inline std::vector<Verdict> run_check(const BundleDocument& doc, const std::string& check,
                                      const CheckArgs& args) {
  using detail::need;
  const auto start = std::chrono::steady_clock::now();
  const double tol = resolve_tolerance(&doc, check, args.tol);
  std::vector<Verdict> out;

  if (check == "groupoid") {
    std::vector<std::string> names;
    if (args.factor) names.push_back(*args.factor);
    else
      for (const auto& f : doc.factors) names.push_back(f.name);
    if (names.empty()) fail(ErrorCode::MissingEntity, "document has no factors");
    for (const auto& name : names) {
      const auto r = verify_groupoid(transport_of(doc, name), tol);
      Verdict v{"groupoid", name, r.pass, r.max_relative, r.max_residual, tol, std::nullopt, 0.0, {}};
      if (r.worst) {
        v.worst = Location{doc.factor(name).path, (*r.worst)[0], (*r.worst)[2]};
        v.note = std::string(r.worst_law == GroupoidLaw::Identity ? "identity law" : "composition law") +
                 " via sample " + std::to_string((*r.worst)[1]);
      }
      out.push_back(std::move(v));
    }
  } else if (check == "consistency" || check == "section") {
    const auto& mname = need(args.morphism, "morphism");
    const auto m = morphism_of(doc, mname);
    const auto t1 = transport_of(doc, need(args.t1, "t1"));
    const auto t2 = transport_of(doc, need(args.t2, "t2"));
    const auto r = check == "consistency" ? check_consistency(m, t1, t2, tol)
                                          : check_section_transported(m, t1, t2, tol);
    out.push_back(detail::from_pair_report(check, mname, r, tol, doc.morphism(mname).path));
    if (check == "consistency") out.back().note = "consistent on the tested path family only";
  } else if (check == "almost-complex") {
    const auto& jname = need(args.field, "field");
    const auto j = complex_field_of(doc, jname);
    const auto& path = doc.complex_field(jname).path;
    if (!args.factor) {
      out.push_back(detail::from_pair_report(check, jname, check_almost_complex(j.matrices, tol), tol, path));
    } else {
      const auto r = check_ac_consistency(j, transport_of(doc, *args.factor), tol);
      auto v = detail::from_pair_report(check, jname + " vs " + *args.factor, r.commutation, tol, path);
      v.pass = r.pass;
      v.residual = std::max(r.commutation.max_relative, r.c0_square_residual);
      v.note = "C0^2+I residual " + format_double(r.c0_square_residual) +
               (r.cross_validated ? "" : "; conjugator cross-check disagrees");
      if (!v.pass && !v.worst) v.worst = Location{path, r.anchor, r.anchor};
      out.push_back(std::move(v));
    }
  } else if (check == "homogeneity") {
    const auto g = detail::general_of(doc, args);
    const auto r = check_homogeneity(g, tol);
    out.push_back(detail::from_pair_report(check, *args.factor, r, tol, doc.factor(*args.factor).path));
  } else if (check == "additivity") {
    const auto g = detail::general_of(doc, args);
    const auto& path = doc.factor(*args.factor).path;
    out.push_back(detail::from_pair_report(check, *args.factor, check_additivity(g, tol), tol, path));
    if (args.section) {
      const auto a = section_of(doc, *args.section);
      const auto moved = check_section_vectors_transported(g, a, tol);
      const auto r = check_addition_consistency(g, a, default_probes(doc.dim), tol);
      auto v = detail::from_pair_report("addition", *args.factor + " + " + *args.section, r, tol, path);
      v.note = moved.pass ? "section is transported" : "section is not transported";
      out.push_back(std::move(v));
    }
  } else if (check == "finsler") {
    const auto t = transport_of(doc, need(args.factor, "factor"));
    FinslerSampler fm{t.grid(), nullptr};
    std::string subject = "euclidean";
    if (args.metric) {
      const auto g = metric_of(doc, *args.metric, tol);
      fm.func = [g](Index i, const Vector& v) { return std::sqrt(std::abs(v.dot(g.matrices[i] * v))); };
      subject = *args.metric;
    } else {
      fm.func = [](Index, const Vector& v) { return v.norm(); };
    }
    const auto r = check_finsler_consistency(fm, t, tol);
    out.push_back(detail::from_pair_report(check, subject + " vs " + *args.factor, r, tol,
                                           doc.factor(*args.factor).path));
  } else if (check == "bilinear") {
    const auto& gname = need(args.metric, "metric");
    const auto g = metric_of(doc, gname, tol);
    const auto r = check_bilinear_consistency(g, transport_of(doc, need(args.factor, "factor")), tol);
    out.push_back(detail::from_pair_report(check, gname + " vs " + *args.factor, r, tol, doc.metric(gname).path));
  } else if (check == "hermitian") {
    const auto& hname = need(args.structure, "structure");
    const auto h = structure_of(doc, hname, tol);
    const auto validity = validate(h, tol);
    const auto& path = doc.complex_field(doc.structure(hname).almost_complex).path;
    Verdict valid{"hermitian-structure", hname, validity.valid,
                  std::max(validity.almost_complex_residual, validity.compatibility_residual),
                  std::max(validity.almost_complex_residual, validity.compatibility_residual), tol,
                  std::nullopt, 0.0, "J^2=-I and J^T G J = G"};
    if (!valid.pass) valid.worst = Location{path, 0, 0};
    out.push_back(std::move(valid));
    if (args.factor) {
      const auto r = check_hermitian_consistency(h, transport_of(doc, *args.factor), tol);
      auto vj = detail::from_pair_report("hermitian-J", hname + " vs " + *args.factor, r.complex_part.commutation,
                                         tol, path);
      vj.pass = r.complex_part.pass;
      out.push_back(std::move(vj));
      out.push_back(detail::from_pair_report("hermitian-G", hname + " vs " + *args.factor, r.metric_part, tol, path));
    }
  } else {
    fail(ErrorCode::UnknownCheck, "unknown check '" + check + "'");
  }

  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  for (auto& v : out) v.elapsed_ms = ms / static_cast<double>(out.size());
  return out;
}

inline ExitCode exit_code_of(const std::vector<Verdict>& verdicts) {
  for (const auto& v : verdicts)
    if (!v.pass) return ExitCode::CheckFailed;
  return ExitCode::Pass;
}

// ---------------------------------------------------------------------------
// Synthesis

struct SynthesisResult {
  /// Input document plus the new entries; absent when infeasible.
  std::optional<BundleDocument> document;
  std::vector<Verdict> self_check;
  std::optional<Infeasible> infeasible;
};

namespace detail {

inline void require_fresh(const BundleDocument& doc, const std::string& name) {
  if (doc.has_name(name)) fail(ErrorCode::InvalidArgument, "an entry named '" + name + "' already exists");
}

inline ExitCode verdict_failure(const std::vector<Verdict>& vs) { return exit_code_of(vs); }

}  // namespace detail

struct MorphismSynthesisArgs {
  Matrix c0;
  std::string f1;
  std::string f2;
  std::optional<std::vector<Index>> base_map;
  std::string name = "M";
  std::optional<double> tol;
};

inline SynthesisResult synthesize_morphism(const BundleDocument& doc, const MorphismSynthesisArgs& a) {
  detail::require_fresh(doc, a.name);
  const auto& f1e = doc.factor(a.f1);
  const auto& f2e = doc.factor(a.f2);
  const auto t1 = transport_of(doc, a.f1);
  const auto t2 = transport_of(doc, a.f2);
  std::vector<Index> map;
  if (a.base_map) map = *a.base_map;
  else {
    if (f1e.path != f2e.path) fail(ErrorCode::InvalidArgument, "--base-map is required across different paths");
    for (Index i = 0; i < t1.size(); ++i) map.push_back(i);
  }
  const BaseMap base(t1.grid(), t2.grid(), map);
  const auto m = synthesize_consistent(a.c0, t1.factor(), t2.factor(), base);

  SynthesisResult out;
  BundleDocument next = doc;
  next.morphisms.push_back(MorphismEntry{a.name, f1e.path, f2e.path, map, m.fibre_maps()});
  CheckArgs args;
  args.morphism = a.name;
  args.t1 = a.f1;
  args.t2 = a.f2;
  args.tol = a.tol;
  out.self_check = run_check(next, "consistency", args);
  out.document = std::move(next);
  return out;
}

struct HermitianSynthesisArgs {
  std::string factor;
  Matrix c0;
  Matrix c;
  std::string name = "H";
  std::optional<double> tol;
};

/// Adds almost_complex "<name>.J", metric "<name>.G" and hermitian "<name>".
inline SynthesisResult synthesize_hermitian(const BundleDocument& doc, const HermitianSynthesisArgs& a) {
  const std::string jname = a.name + ".J";
  const std::string gname = a.name + ".G";
  detail::require_fresh(doc, a.name);
  detail::require_fresh(doc, jname);
  detail::require_fresh(doc, gname);
  const double tol = resolve_tolerance(&doc, "hermitian", a.tol);
  const auto t = transport_of(doc, a.factor);
  const auto h = hermitian_from_transport(t.factor(), ConjugatorPair{a.c0, a.c}, tol);
  const auto& path = doc.factor(a.factor).path;

  SynthesisResult out;
  BundleDocument next = doc;
  next.almost_complex.push_back(FamilyEntry{jname, path, h.j.matrices});
  next.metrics.push_back(MetricEntry{gname, path, BilinearKind::Symmetric, h.g.matrices});
  next.hermitian.push_back(HermitianEntry{a.name, jname, gname});
  CheckArgs args;
  args.structure = a.name;
  args.factor = a.factor;
  args.tol = a.tol;
  out.self_check = run_check(next, "hermitian", args);
  out.document = std::move(next);
  return out;
}

struct TransportSynthesisArgs {
  std::string structure;
  std::optional<Matrix> y;
  std::string name = "F";
  std::optional<double> tol;
  HermitianSolveOptions solve{};
};

inline SynthesisResult synthesize_transport(const BundleDocument& doc, const TransportSynthesisArgs& a) {
  detail::require_fresh(doc, a.name);
  const double tol = resolve_tolerance(&doc, "hermitian", a.tol);
  const auto h = structure_of(doc, a.structure, tol);
  auto opts = a.solve;
  opts.tol = std::max(opts.tol, tol);
  const auto solved = transport_from_hermitian(h, a.y, opts);
  SynthesisResult out;
  if (!solved) {
    out.infeasible = solved.infeasible();
    return out;
  }
  BundleDocument next = doc;
  next.factors.push_back(
      FamilyEntry{a.name, doc.complex_field(doc.structure(a.structure).almost_complex).path,
                  solved->factor.matrices()});
  CheckArgs args;
  args.structure = a.structure;
  args.factor = a.name;
  args.tol = opts.tol;
  out.self_check = run_check(next, "hermitian", args);
  out.document = std::move(next);
  return out;
}

// ---------------------------------------------------------------------------
// Solving

struct SolveReport {
  ExitCode code = ExitCode::Pass;
  std::vector<std::string> lines;
  nlohmann::ordered_json data;
};

inline std::string matrix_line(const Matrix& m) { return detail::matrix_string(m); }

inline SolveReport report_p(const Signature& sig, const SearchOptions& opts) {
  SolveReport r;
  const auto p = solve_P(sig, opts);
  r.data["signature"] = {sig.p, sig.q};
  if (p) {
    const double res = p_residual(p->matrix, sig);
    r.lines.push_back("P" + sig.str() + " = " + matrix_line(p->matrix));
    r.lines.push_back("residual " + format_double(res));
    r.data["feasible"] = true;
    r.data["P"] = nlohmann::ordered_json::parse(matrix_line(p->matrix));
    r.data["residual"] = res;
  } else {
    r.code = ExitCode::Infeasible;
    const auto& inf = p.infeasible();
    r.lines.push_back("INFEASIBLE  " + inf.reason);
    r.lines.push_back("certificate residual " + format_double(inf.certificate_residual) + " over " +
                      std::to_string(inf.starts) + " seeded starts");
    r.data["feasible"] = false;
    r.data["reason"] = inf.reason;
    r.data["certificate_residual"] = inf.certificate_residual;
    r.data["starts"] = inf.starts;
  }
  return r;
}

inline SolveReport report_hermitian(const BundleDocument& doc, const std::string& structure,
                                    std::optional<Matrix> y, std::optional<double> tol_flag,
                                    HermitianSolveOptions opts = {}) {
  SolveReport r;
  const double tol = resolve_tolerance(&doc, "hermitian", tol_flag);
  opts.tol = std::max(opts.tol, tol);
  const auto h = structure_of(doc, structure, tol);
  const auto solved = transport_from_hermitian(h, std::move(y), opts);
  r.data["structure"] = structure;
  if (!solved) {
    r.code = ExitCode::Infeasible;
    const auto& inf = solved.infeasible();
    r.lines.push_back("INFEASIBLE  " + inf.reason);
    r.lines.push_back("certificate residual " + format_double(inf.certificate_residual) + " over " +
                      std::to_string(inf.starts) + " seeded starts" +
                      (inf.sample ? " at sample " + std::to_string(*inf.sample) : ""));
    r.data["feasible"] = false;
    r.data["reason"] = inf.reason;
    r.data["certificate_residual"] = inf.certificate_residual;
    return r;
  }
  const auto& s = *solved;
  r.lines.push_back("signature " + s.parts.sig.str());
  r.lines.push_back("P = " + matrix_line(s.p.matrix));
  for (Index i = 0; i < s.factor.size(); ++i) r.lines.push_back("F[" + std::to_string(i) + "] = " + matrix_line(s.factor.at(i)));
  r.lines.push_back(std::string(s.check.pass ? "consistent" : "NOT consistent") + " (J residual " +
                    format_double(s.check.complex_part.commutation.max_relative) + ", G residual " +
                    format_double(s.check.metric_part.max_relative) + ")");
  r.code = s.check.pass ? ExitCode::Pass : ExitCode::CheckFailed;
  r.data["feasible"] = true;
  r.data["signature"] = {s.parts.sig.p, s.parts.sig.q};
  r.data["P"] = nlohmann::ordered_json::parse(matrix_line(s.p.matrix));
  auto fs = nlohmann::ordered_json::array();
  for (const auto& m : s.factor.matrices()) fs.push_back(nlohmann::ordered_json::parse(matrix_line(m)));
  r.data["factor"] = fs;
  r.data["consistent"] = s.check.pass;
  return r;
}

}  // namespace btk::io
