// btk: check, synthesize and solve bundle documents; seeded property fuzzing.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "btk/io/commands.hpp"
#include "btk/io/document.hpp"
#include "btk/io/fuzz.hpp"

namespace {

using namespace btk;
using namespace btk::io;

struct Globals {
  std::optional<double> tol;
  bool json = false;
  bool parallel = false;
  std::uint64_t seed = 42;
};

std::string read_input(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidArgument, "cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  out << text;
}

int print_verdicts(const std::vector<Verdict>& vs, bool as_json, std::ostream& os = std::cout) {
  if (as_json) {
    json arr = json::array();
    for (const auto& v : vs) arr.push_back(to_json(v));
    os << arr.dump(2) << "\n";
  } else {
    for (const auto& v : vs) os << to_text(v) << "\n";
  }
  return static_cast<int>(exit_code_of(vs));
}

std::optional<std::vector<Index>> parse_index_list(const std::string& text) {
  if (text.empty()) return std::nullopt;
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    fail(ErrorCode::SchemaError, "--base-map must be a JSON array of sample indices");
  }
  if (!v.is_array()) fail(ErrorCode::SchemaError, "--base-map must be a JSON array of sample indices");
  std::vector<Index> out;
  for (const auto& x : v) {
    if (!x.is_number_unsigned()) fail(ErrorCode::SchemaError, "--base-map entries must be non-negative integers");
    out.push_back(x.get<Index>());
  }
  return out;
}

int report_synthesis(const SynthesisResult& r, const std::string& out, bool as_json) {
  if (r.infeasible) {
    std::cerr << "INFEASIBLE  " << r.infeasible->reason << "  certificate residual "
              << format_double(r.infeasible->certificate_residual) << "\n";
    return static_cast<int>(ExitCode::Infeasible);
  }
  const int code = print_verdicts(r.self_check, as_json, std::cerr);
  if (code != 0) {
    std::cerr << "self-check failed; nothing written\n";
    return code;
  }
  write_output(out, serialize_document(*r.document));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport, morphism and Hermitian-structure checks over sampled paths"};
  app.require_subcommand(1);
  Globals g;
  double tol_value = 0.0;
  auto* tol_opt = app.add_option("--tol", tol_value, "tolerance (overrides BTK_TOL and document values)");
  app.add_flag("--json", g.json, "machine-readable output");
  app.add_flag("--parallel", g.parallel, "parallel fuzz trials / Z solves");
  app.add_option("--seed", g.seed, "seed for randomized searches and fuzzing");

  // check
  auto* check = app.add_subcommand("check", "run a named check on a document");
  std::string check_name;
  std::string check_doc;
  CheckArgs cargs;
  std::string f_factor, f_t1, f_t2, f_morphism, f_field, f_metric, f_section, f_structure;
  std::vector<double> f_shift;
  check->add_option("name", check_name, "check name")->required();
  check->add_option("document", check_doc, "document path or '-'")->required();
  auto* o_factor = check->add_option("--factor", f_factor);
  auto* o_t1 = check->add_option("--t1", f_t1);
  auto* o_t2 = check->add_option("--t2", f_t2);
  auto* o_morphism = check->add_option("--morphism", f_morphism);
  auto* o_field = check->add_option("--field", f_field);
  auto* o_metric = check->add_option("--metric", f_metric);
  auto* o_section = check->add_option("--section", f_section);
  auto* o_structure = check->add_option("--structure", f_structure);
  auto* o_shift = check->add_option("--shift", f_shift, "affine shift vector for homogeneity/additivity")
                      ->delimiter(',');

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "add entries that pass their checks by construction");
  std::string s_kind, s_doc, s_out, s_c0, s_c, s_f1, s_f2, s_base, s_name, s_factor, s_structure, s_y;
  synth->add_option("kind", s_kind, "morphism | hermitian | transport")->required();
  synth->add_option("document", s_doc, "document path or '-'")->required();
  synth->add_option("--out", s_out, "output document (default stdout)");
  synth->add_option("--c0", s_c0, "matrix literal");
  synth->add_option("--c", s_c, "matrix literal");
  synth->add_option("--f1", s_f1);
  synth->add_option("--f2", s_f2);
  synth->add_option("--base-map", s_base, "JSON array of target sample indices");
  synth->add_option("--name", s_name, "name of the new entry");
  synth->add_option("--factor", s_factor);
  synth->add_option("--structure", s_structure);
  synth->add_option("--y", s_y, "matrix literal");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve for P or for a transport from a Hermitian structure");
  std::string v_kind, v_doc, v_structure, v_y;
  int v_p = 0;
  int v_q = 0;
  int v_starts = 64;
  solve_cmd->add_option("kind", v_kind, "hermitian | p")->required();
  solve_cmd->add_option("document", v_doc, "document path (hermitian only)");
  solve_cmd->add_option("--structure", v_structure);
  solve_cmd->add_option("--y", v_y, "matrix literal");
  solve_cmd->add_option("--p", v_p, "positive index (solve p)");
  solve_cmd->add_option("--q", v_q, "negative index (solve p)");
  solve_cmd->add_option("--starts", v_starts, "seeded starts for the P search");

  // format
  auto* format_cmd = app.add_subcommand("format", "validate a document and print it in canonical form");
  std::string fmt_doc, fmt_out;
  format_cmd->add_option("document", fmt_doc, "document path or '-'")->required();
  format_cmd->add_option("--out", fmt_out, "output path (default stdout)");

  // fuzz
  auto* fuzz_cmd = app.add_subcommand("fuzz", "seeded randomized property checks");
  FuzzOptions fo;
  std::string f_corrupt;
  fuzz_cmd->add_option("--seed", fo.seed);
  fuzz_cmd->add_option("--dim", fo.dim, "fibre dimension (default: random in [1,4])");
  fuzz_cmd->add_option("--samples", fo.samples);
  fuzz_cmd->add_option("--trials", fo.trials);
  auto* o_corrupt = fuzz_cmd->add_option("--corrupt", f_corrupt, "break the named property (harness test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::InputError);
  }
  if (*tol_opt) g.tol = tol_value;

  try {
    if (*check) {
      const auto doc = parse_document(read_input(check_doc));
      auto opt = [](CLI::Option* o, const std::string& v) { return *o ? std::optional<std::string>(v) : std::nullopt; };
      cargs.factor = opt(o_factor, f_factor);
      cargs.t1 = opt(o_t1, f_t1);
      cargs.t2 = opt(o_t2, f_t2);
      cargs.morphism = opt(o_morphism, f_morphism);
      cargs.field = opt(o_field, f_field);
      cargs.metric = opt(o_metric, f_metric);
      cargs.section = opt(o_section, f_section);
      cargs.structure = opt(o_structure, f_structure);
      if (*o_shift) cargs.shift = f_shift;
      cargs.tol = g.tol;
      return print_verdicts(run_check(doc, check_name, cargs), g.json);
    }

    if (*synth) {
      const auto doc = parse_document(read_input(s_doc));
      auto need_matrix = [](const std::string& v, const char* flag) {
        if (v.empty()) fail(ErrorCode::MissingEntity, std::string("missing required flag --") + flag);
        return parse_matrix(v);
      };
      auto need = [](const std::string& v, const char* flag) {
        if (v.empty()) fail(ErrorCode::MissingEntity, std::string("missing required flag --") + flag);
        return v;
      };
      if (s_kind == "morphism") {
        MorphismSynthesisArgs a{need_matrix(s_c0, "c0"), need(s_f1, "f1"), s_f2.empty() ? s_f1 : s_f2,
                                parse_index_list(s_base), s_name.empty() ? "M" : s_name, g.tol};
        return report_synthesis(synthesize_morphism(doc, a), s_out, g.json);
      }
      if (s_kind == "hermitian") {
        HermitianSynthesisArgs a{need(s_factor, "factor"), need_matrix(s_c0, "c0"), need_matrix(s_c, "c"),
                                 s_name.empty() ? "H" : s_name, g.tol};
        return report_synthesis(synthesize_hermitian(doc, a), s_out, g.json);
      }
      if (s_kind == "transport") {
        TransportSynthesisArgs a;
        a.structure = need(s_structure, "structure");
        if (!s_y.empty()) a.y = parse_matrix(s_y);
        a.name = s_name.empty() ? "F" : s_name;
        a.tol = g.tol;
        a.solve.p_search.seed = g.seed;
        a.solve.z_solve.seed = derive_seed(g.seed, 1);
        a.solve.z_solve.parallel = g.parallel;
        return report_synthesis(synthesize_transport(doc, a), s_out, g.json);
      }
      fail(ErrorCode::InvalidArgument, "unknown synthesis kind '" + s_kind + "'");
    }

    if (*solve_cmd) {
      SolveReport r;
      SearchOptions ps;
      ps.starts = v_starts;
      ps.seed = g.seed;
      if (v_kind == "p") {
        if (v_p < 0 || v_q < 0 || v_p + v_q == 0) fail(ErrorCode::InvalidArgument, "--p/--q must give a nonempty signature");
        r = report_p(Signature{v_p, v_q}, ps);
      } else if (v_kind == "hermitian") {
        if (v_doc.empty()) fail(ErrorCode::MissingEntity, "solve hermitian needs a document");
        if (v_structure.empty()) fail(ErrorCode::MissingEntity, "missing required flag --structure");
        const auto doc = parse_document(read_input(v_doc));
        HermitianSolveOptions hs;
        hs.p_search = ps;
        hs.z_solve.seed = derive_seed(g.seed, 1);
        hs.z_solve.parallel = g.parallel;
        std::optional<Matrix> y;
        if (!v_y.empty()) y = parse_matrix(v_y);
        r = report_hermitian(doc, v_structure, y, g.tol, hs);
      } else {
        fail(ErrorCode::InvalidArgument, "unknown solve kind '" + v_kind + "'");
      }
      if (g.json) std::cout << r.data.dump(2) << "\n";
      else
        for (const auto& l : r.lines) std::cout << l << "\n";
      return static_cast<int>(r.code);
    }

    if (*format_cmd) {
      write_output(fmt_out, serialize_document(parse_document(read_input(fmt_doc))));
      return 0;
    }

    if (*fuzz_cmd) {
      fo.parallel = g.parallel;
      if (*o_corrupt) fo.corrupt = f_corrupt;
      const auto report = fuzz(fo);
      std::cout << render(report);
      return report.pass() ? 0 : static_cast<int>(ExitCode::CheckFailed);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::InputError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::InputError);
  }
  return static_cast<int>(ExitCode::InputError);
}
