#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "btk/io/commands.hpp"
#include "btk/io/document.hpp"
#include "btk/io/fuzz.hpp"

using namespace btk;
using namespace btk::io;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fixture(const char* name) { return slurp(std::string(BTK_FIXTURE_DIR) + "/" + name); }

const char* kMinimal = R"({"version": "1", "fiber": {"dim": 2},
  "paths": [{"name": "p", "params": [0.0, 1.0]}],
  "factors": [{"name": "F", "path": "p", "matrices": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}]})";

ErrorCode code_of(const std::string& text) {
  try {
    parse_document(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

struct RunResult {
  int code;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(BTK_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string fixture_path(const char* name) { return std::string(BTK_FIXTURE_DIR) + "/" + name; }

}  // namespace

TEST(Document, MinimalParsesAndGroupoidPasses) {
  const auto doc = parse_document(kMinimal);
  EXPECT_EQ(doc.dim, 2);
  const auto vs = run_check(doc, "groupoid", {});
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_TRUE(vs[0].pass);
  EXPECT_EQ(vs[0].residual, 0.0);
  EXPECT_FALSE(vs[0].worst.has_value());
}

TEST(Document, WrongShapeNamesEntry) {
  const std::string bad = replace(kMinimal, "[[1, 0], [0, 1]]]", "[[1, 0, 0], [0, 1, 0]]]");
  try {
    parse_document(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    EXPECT_NE(std::string(e.what()).find("F"), std::string::npos);
  }
}

TEST(Document, NonFiniteEntries) {
  EXPECT_EQ(code_of(replace(kMinimal, "[[1, 0], [0, 1]]]", "[[\"NaN\", 0], [0, 1]]]")), ErrorCode::NonFiniteEntry);
  EXPECT_EQ(code_of(replace(kMinimal, "[[1, 0], [0, 1]]]", "[[NaN, 0], [0, 1]]]")), ErrorCode::NonFiniteEntry);
  EXPECT_EQ(code_of(replace(kMinimal, "[[1, 0], [0, 1]]]", "[[1, Infinity], [0, 1]]]")), ErrorCode::NonFiniteEntry);
}

TEST(Document, SchemaErrors) {
  EXPECT_EQ(code_of("{"), ErrorCode::SchemaError);
  EXPECT_EQ(code_of(replace(kMinimal, "\"version\": \"1\"", "\"version\": \"7\"")), ErrorCode::SchemaError);
  EXPECT_EQ(code_of(replace(kMinimal, "\"fiber\"", "\"fibre\"")), ErrorCode::SchemaError);
  EXPECT_EQ(code_of(replace(kMinimal, "\"path\": \"p\"", "\"path\": \"q\"")), ErrorCode::SchemaError);
  EXPECT_EQ(code_of(replace(kMinimal, "[0.0, 1.0]", "[0.0, 1.0, 2.0]")), ErrorCode::DimensionMismatch);
}

TEST(Document, RoundTripIsIdentityOnFixtures) {
  for (const char* name : {"minimal.json", "rotation_diag.json", "affine.json", "finsler_scaling.json",
                           "hermitian_standard.json", "hermitian_split.json"}) {
    const std::string text = fixture(name);
    const auto doc = parse_document(text);
    EXPECT_EQ(serialize_document(doc), text) << name;
    EXPECT_TRUE(parse_document(serialize_document(doc)) == doc) << name;
  }
}

TEST(Document, SeventeenDigitFloats) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2.0");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Tolerance, Precedence) {
  auto doc = parse_document(kMinimal);
  ::unsetenv("BTK_TOL");
  EXPECT_EQ(resolve_tolerance(&doc, "groupoid", std::nullopt), 1e-9);
  ::setenv("BTK_TOL", "1e-6", 1);
  EXPECT_EQ(resolve_tolerance(&doc, "groupoid", std::nullopt), 1e-6);
  doc.tolerances["default"] = 1e-5;
  EXPECT_EQ(resolve_tolerance(&doc, "groupoid", std::nullopt), 1e-5);
  doc.tolerances["groupoid"] = 1e-4;
  EXPECT_EQ(resolve_tolerance(&doc, "groupoid", std::nullopt), 1e-4);
  EXPECT_EQ(resolve_tolerance(&doc, "groupoid", 1e-3), 1e-3);
  ::unsetenv("BTK_TOL");
}

TEST(Commands, UnknownCheckAndMissingEntity) {
  const auto doc = parse_document(kMinimal);
  try {
    run_check(doc, "frobnicate", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownCheck);
  }
  CheckArgs a;
  a.factor = "nope";
  try {
    run_check(doc, "groupoid", a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingEntity);
  }
}

TEST(Commands, SynthesizedMorphismChecksConsistent) {
  const auto doc = parse_document(fixture("rotation_diag.json"));
  Matrix c0(2, 2);
  c0 << 1, 0.5, 0, 2;
  const auto r = synthesize_morphism(doc, MorphismSynthesisArgs{c0, "R", "R", std::nullopt, "N", std::nullopt});
  ASSERT_TRUE(r.document.has_value());
  CheckArgs a;
  a.morphism = "N";
  a.t1 = "R";
  a.t2 = "R";
  EXPECT_TRUE(run_check(*r.document, "consistency", a).front().pass);
  EXPECT_TRUE(run_check(*r.document, "section", a).front().pass);
  const auto reparsed = parse_document(serialize_document(*r.document));
  EXPECT_TRUE(run_check(reparsed, "consistency", a).front().pass);
}

TEST(Commands, FailureVerdictCarriesLocation) {
  const auto doc = parse_document(fixture("rotation_diag.json"));
  CheckArgs a;
  a.morphism = "M";
  a.t1 = "R";
  a.t2 = "R";
  const auto v = run_check(doc, "consistency", a).front();
  EXPECT_FALSE(v.pass);
  ASSERT_TRUE(v.worst.has_value());
  EXPECT_EQ(v.worst->path, "gamma");
  EXPECT_GE(v.residual, 0.0);
  EXPECT_EQ(exit_code_of({v}), ExitCode::CheckFailed);
}

TEST(Fuzz, DeterministicAndParallelInvariant) {
  FuzzOptions o;
  o.trials = 30;
  const auto a = render(fuzz(o));
  const auto b = render(fuzz(o));
  o.parallel = true;
  const auto c = render(fuzz(o));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Fuzz, DimensionTwoAllPropertiesHold) {
  FuzzOptions o;
  o.dim = 2;
  o.trials = 100;
  const auto r = fuzz(o);
  EXPECT_TRUE(r.pass()) << render(r);
}

TEST(Fuzz, CorruptedPropertyIsNamed) {
  for (const auto& name : fuzz_properties()) {
    FuzzOptions o;
    o.dim = 2;
    o.trials = 5;
    o.corrupt = name;
    const auto r = fuzz(o);
    EXPECT_FALSE(r.pass()) << name;
    const auto v = r.violated();
    EXPECT_NE(std::find(v.begin(), v.end(), name), v.end()) << name;
  }
}

TEST(Fuzz, LimitsEnforced) {
  FuzzOptions o;
  o.dim = 9;
  EXPECT_THROW(fuzz(o), Error);
  o.dim = 2;
  o.samples = 65;
  EXPECT_THROW(fuzz(o), Error);
  o.samples = 8;
  o.trials = 10001;
  EXPECT_THROW(fuzz(o), Error);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("check groupoid " + fixture_path("minimal.json")).code, 0);
  EXPECT_EQ(run_cli("check consistency " + fixture_path("rotation_diag.json") + " --morphism M --t1 R --t2 R").code, 1);
  const auto inf = run_cli("solve hermitian " + fixture_path("hermitian_split.json") + " --structure H");
  EXPECT_EQ(inf.code, 2);
  EXPECT_NE(inf.out.find("certificate residual"), std::string::npos);
  EXPECT_EQ(run_cli("check bogus " + fixture_path("minimal.json")).code, 3);
  EXPECT_EQ(run_cli("check groupoid /nonexistent.json").code, 3);
  EXPECT_EQ(run_cli("--tol -1 check groupoid " + fixture_path("minimal.json")).code, 3);
}

TEST(Cli, JsonVerdicts) {
  const auto r = run_cli("--json check bilinear " + fixture_path("finsler_scaling.json") + " --metric E --factor S");
  EXPECT_EQ(r.code, 1);
  const auto j = json::parse(r.out);
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j[0]["check"], "bilinear");
  EXPECT_FALSE(j[0]["pass"].get<bool>());
  EXPECT_DOUBLE_EQ(j[0]["abs_residual"].get<double>(), 3.0);
  EXPECT_EQ(j[0]["worst"]["path"], "gamma");
}

TEST(Cli, SynthesizeThenCheck) {
  const std::string out = ::testing::TempDir() + "btk_synth.json";
  EXPECT_EQ(run_cli("synthesize hermitian " + fixture_path("hermitian_standard.json") +
                    " --factor R --c0 '[[0,1],[-1,0]]' --c '[[1,0],[0,1]]' --name K --out " + out)
                .code,
            0);
  EXPECT_EQ(run_cli("check hermitian " + out + " --structure K --factor R").code, 0);
  const std::string out2 = ::testing::TempDir() + "btk_synth2.json";
  EXPECT_EQ(run_cli("synthesize transport " + out + " --structure K --y '[[1,0],[0,1]]' --name T --out " + out2).code, 0);
  EXPECT_EQ(run_cli("check groupoid " + out2 + " --factor T").code, 0);
  EXPECT_EQ(run_cli("synthesize transport " + fixture_path("hermitian_split.json") + " --structure H").code, 2);
}

TEST(Cli, FuzzReproducibleAndCorruptHook) {
  const auto a = run_cli("fuzz --seed 42");
  const auto b = run_cli("fuzz --seed 42");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto c = run_cli("fuzz --seed 42 --trials 5 --corrupt gauge.invariance");
  EXPECT_EQ(c.code, 1);
  EXPECT_NE(c.out.find("violated: gauge.invariance"), std::string::npos);
}
