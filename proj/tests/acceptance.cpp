// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "btk/hermitian.hpp"
#include "btk/io/commands.hpp"
#include "btk/io/document.hpp"
#include "btk/morphism.hpp"
#include "btk/structure.hpp"
#include "btk/transport.hpp"
#include "oracles.hpp"

using namespace btk;

namespace {

struct Result {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

PathGrid random_grid(Rng& rng, int lo, int hi) {
  return PathGrid::uniform(static_cast<Index>(rng.integer(lo, hi)), 0.0, 1.0);
}

FrameFactor random_factor(Rng& rng, const PathGrid& g, int n, double max_cond) {
  return FrameFactor(g, FiberSpec(n), oracle::random_factor(rng, n, static_cast<int>(g.size()), max_cond));
}

// 1. Groupoid laws over 1000 random factors.
Result groupoid_suite() {
  Rng rng(1001);
  const int dims[] = {1, 2, 4, 8};
  const auto t0 = Clock::now();
  int failures = 0;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = dims[k % 4];
    const auto g = random_grid(rng, 2, 32);
    const LinearTransport t(random_factor(rng, g, n, 1e6));
    const auto r = verify_groupoid(t, 1e-10);
    worst = std::max(worst, r.max_relative);
    if (!r.pass) ++failures;
  }
  const double secs = seconds_since(t0);

  // Same families, residual measured against |H(i->k)| alone. Not gated: with
  // factor conditions up to 1e6 this is dominated by rounding in the product.
  Rng again(1001);
  double against_result = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = dims[k % 4];
    const auto g = random_grid(again, 2, 32);
    const auto tab = tabulate(LinearTransport(random_factor(again, g, n, 1e6)));
    for (Index i = 0; i < g.size(); ++i)
      for (Index j = 0; j < g.size(); ++j)
        for (Index l = 0; l < g.size(); ++l)
          against_result = std::max(against_result, (tab.at(j, l) * tab.at(i, j) - tab.at(i, l)).norm() /
                                                        std::max(1.0, tab.at(i, l).norm()));
  }
  return {failures == 0 && secs < 10.0,
          std::to_string(failures) + "/1000 failed, worst residual / max(1,|H2||H1|) " + fmt("%.3g", worst) + ", " +
              fmt("%.2f", secs) + " s (residual / |H(i->k)| alone: " + fmt("%.3g", against_result) + ")"};
}

// 2. Synthesized morphisms are consistent; conjugators at two anchors are related by re-anchoring.
Result synthesis_soundness() {
  Rng rng(1002);
  int consistency_failures = 0;
  int anchor_failures = 0;
  double worst_anchor = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto g = random_grid(rng, 2, 16);
    const int n1 = rng.integer(1, 6);
    const int n2 = rng.integer(1, 6);
    const LinearTransport t1(random_factor(rng, g, n1, 1e3));
    const LinearTransport t2(random_factor(rng, g, n2, 1e3));
    const auto base = BaseMap::identity_on(g);
    const auto m = synthesize_consistent(rng.gaussian(n2, n1), t1.factor(), t2.factor(), base);
    if (!check_consistency(m, t1, t2, 1e-9).pass) {
      ++consistency_failures;
      continue;
    }
    const Index a = static_cast<Index>(rng.integer(0, static_cast<int>(g.size()) - 1));
    const Index b = static_cast<Index>(rng.integer(0, static_cast<int>(g.size()) - 1));
    const auto ca = derive_conjugator(m, t1, t2, a, 1e-9);
    const auto cb = derive_conjugator(m, t1, t2, b, 1e-9);
    // Oracle re-anchoring through explicit inverses.
    const Matrix moved = oracle::transport(t2.factor().matrices(), a, b) * ca.matrix *
                         oracle::transport(t1.factor().matrices(), b, a);
    const double r = oracle::rel(moved, cb.matrix);
    worst_anchor = std::max(worst_anchor, r);
    if (r > 1e-9) ++anchor_failures;
  }
  return {consistency_failures == 0 && anchor_failures == 0,
          std::to_string(consistency_failures) + " inconsistent, " + std::to_string(anchor_failures) +
              " re-anchoring mismatches (worst " + fmt("%.3g", worst_anchor) + ")"};
}

// 3. Consistency and section verdicts agree on clean and perturbed triples.
Result metamorphic_law() {
  Rng rng(1003);
  int disagreements = 0;
  int clean_pass = 0;
  int noisy_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto g = random_grid(rng, 2, 16);
    const int n = rng.integer(1, 6);
    const LinearTransport t1(random_factor(rng, g, n, 1e3));
    const LinearTransport t2(random_factor(rng, g, n, 1e3));
    const auto base = BaseMap::identity_on(g);
    auto maps = synthesize_consistent(rng.gaussian(n, n), t1.factor(), t2.factor(), base).fibre_maps();
    const bool perturb = k % 2 == 1;
    if (perturb) {
      const auto at = static_cast<std::size_t>(rng.integer(0, static_cast<int>(g.size()) - 1));
      Matrix e = rng.gaussian(n, n);
      e *= rng.log_uniform(1e-3, 1e-1) * std::max(1.0, maps[at].norm()) / e.norm();
      maps[at] += e;
    }
    const PathMorphism m(base, maps);
    const bool a = check_consistency(m, t1, t2, 1e-9).pass;
    const bool b = check_section_transported(m, t1, t2, 1e-9).pass;
    if (a != b) ++disagreements;
    if (!perturb && a) ++clean_pass;
    if (perturb && !a) ++noisy_fail;
  }
  return {disagreements == 0, std::to_string(1000 - disagreements) + "/1000 agree (" + std::to_string(clean_pass) +
                                  "/500 clean pass, " + std::to_string(noisy_fail) + "/500 perturbed fail)"};
}

// 4. Gauge changes leave transports and co-transformed synthesized morphisms unchanged.
Result gauge_invariance() {
  Rng rng(1004);
  double worst_t = 0.0;
  double worst_m = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto g = random_grid(rng, 2, 16);
    const int n = rng.integer(1, 6);
    const FrameFactor f1 = random_factor(rng, g, n, 1e3);
    const FrameFactor f2 = random_factor(rng, g, n, 1e3);
    const Matrix d1 = rng.with_condition(n, rng.log_uniform(1.0, 1e3));
    const Matrix d2 = rng.with_condition(n, rng.log_uniform(1.0, 1e3));
    const FrameFactor g1 = apply_gauge(f1, GaugeMap(d1));
    const FrameFactor g2 = apply_gauge(f2, GaugeMap(d2));
    const LinearTransport a(f1);
    const LinearTransport b(g1);
    for (Index i = 0; i < g.size(); ++i)
      for (Index j = 0; j < g.size(); ++j) worst_t = std::max(worst_t, oracle::rel(a.matrix(i, j), b.matrix(i, j)));
    const auto base = BaseMap::identity_on(g);
    const Matrix c0 = rng.gaussian(n, n);
    const auto m = synthesize_consistent(c0, f1, f2, base);
    const auto mg = synthesize_consistent(d2 * c0 * oracle::full_inverse(d1), g1, g2, base);
    for (Index i = 0; i < g.size(); ++i) worst_m = std::max(worst_m, oracle::rel(m.at(i), mg.at(i)));
  }
  return {worst_t <= 1e-10 && worst_m <= 1e-9,
          "worst transport change " + fmt("%.3g", worst_t) + ", worst morphism change " + fmt("%.3g", worst_m)};
}

// Oracle for (1,1): every real 2x2 P with P^2 = -I is [[a, b], [c, -a]] with bc = -1 - a^2.
// Grid-minimize |P^T G P - G| over that surface.
double split_pair_oracle_floor() {
  const Matrix g = Signature{1, 1}.matrix();
  double best = std::numeric_limits<double>::infinity();
  for (int ia = -200; ia <= 200; ++ia)
    for (int ib = -200; ib <= 200; ++ib) {
      if (ib == 0) continue;
      const double a = ia * 0.05;
      const double b = std::copysign(std::exp(std::abs(ib) * 0.04 - 4.0), ib);
      const double c = (-1.0 - a * a) / b;
      Matrix p(2, 2);
      p << a, b, c, -a;
      best = std::min(best, (p.transpose() * g * p - g).norm());
    }
  return best;
}

// 5. P solutions.
Result p_exactness() {
  const Matrix j = oracle::standard_j(2);
  const auto p20 = solve_P(Signature{2, 0});
  const bool ok20 = p20.feasible() && (p20->matrix == j || p20->matrix == -j) &&
                    p_residual(p20->matrix, Signature{2, 0}) == 0.0;
  const auto p40 = solve_P(Signature{4, 0});
  const double r40 = p40.feasible() ? p_residual(p40->matrix, Signature{4, 0}) : INFINITY;
  SearchOptions opts;
  opts.starts = 1000;
  const auto p11 = solve_P(Signature{1, 1}, opts);
  const double cert = p11.feasible() ? 0.0 : p11.infeasible().certificate_residual;
  const double floor = split_pair_oracle_floor();
  const bool pass = ok20 && r40 <= 1e-12 && !p11.feasible() && cert >= 0.5 && floor > 0.0;
  return {pass, std::string("P(2,0) ") + (ok20 ? "exact" : "WRONG") + ", P(4,0) residual " + fmt("%.3g", r40) +
                    ", P(1,1) " + (p11.feasible() ? "FEASIBLE" : "infeasible") + " certificate " + fmt("%.4g", cert) +
                    " over 1000 starts, oracle floor " + fmt("%.4g", floor)};
}

// 6. Hermitian round trip from orthogonal factors.
Result hermitian_round_trip() {
  Rng rng(1006);
  const auto t0 = Clock::now();
  int forward_failures = 0;
  int backward_failures = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = k % 2 ? 4 : 2;
    const auto g = random_grid(rng, 2, 16);
    std::vector<Matrix> os;
    for (Index i = 0; i < g.size(); ++i) os.push_back(rng.orthogonal(n));
    const FrameFactor f(g, FiberSpec(n), os);
    // Valid pair: C = W^T W, C0 = W^{-1} J W.
    const Matrix w = rng.with_condition(n, rng.log_uniform(1.0, 10.0));
    const ConjugatorPair cc{oracle::full_inverse(w) * oracle::standard_j(n) * w, w.transpose() * w};
    const auto h = hermitian_from_transport(f, cc, 1e-9);
    if (!check_hermitian_consistency(h, LinearTransport(f), 1e-9).pass) ++forward_failures;
    HermitianSolveOptions opts;
    opts.z_solve.seed = derive_seed(1006, static_cast<std::uint64_t>(k));
    const auto solved = transport_from_hermitian(h, std::nullopt, opts);
    if (!solved || !check_hermitian_consistency(h, LinearTransport(solved->factor), 1e-8).pass) ++backward_failures;
  }
  const double secs = seconds_since(t0);
  return {forward_failures == 0 && backward_failures == 0 && secs < 60.0,
          std::to_string(forward_failures) + " forward and " + std::to_string(backward_failures) +
              " reverse failures over 100, " + fmt("%.2f", secs) + " s"};
}

// Inertia from a pivoted LDL^T, independent of the eigen solver the library uses.
std::pair<int, int> ldlt_inertia(const Matrix& g) {
  Eigen::LDLT<Matrix> ldlt(g);
  int p = 0;
  int q = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) (ldlt.vectorD()(i) > 0 ? p : q)++;
  return {p, q};
}

// 7. Signature constancy vs independent sign counts.
Result signature_law() {
  Rng rng(1007);
  int disagreements = 0;
  int varying = 0;
  for (int k = 0; k < 1000; ++k) {
    const int n = rng.integer(1, 6);
    const int p = rng.integer(0, n);
    const auto g = random_grid(rng, 2, 12);
    std::vector<Matrix> gs;
    const bool vary = k % 2 == 1;
    const auto flip_at = static_cast<Index>(rng.integer(0, static_cast<int>(g.size()) - 1));
    for (Index i = 0; i < g.size(); ++i) {
      int pi = p;
      if (vary && i == flip_at) pi = p == n ? n - 1 : p + 1;
      const Matrix t = rng.with_condition(n, rng.log_uniform(1.0, 100.0));
      const Matrix m = t.transpose() * Signature{pi, n - pi}.matrix() * t;
      gs.push_back(0.5 * (m + m.transpose()));
    }
    std::pair<int, int> first = ldlt_inertia(gs.front());
    bool oracle_constant = true;
    for (const auto& m : gs) oracle_constant = oracle_constant && ldlt_inertia(m) == first;
    if (!oracle_constant) ++varying;
    const bool verdict = check_signature_constancy(BilinearField(g, gs)).pass;
    if (verdict != oracle_constant) ++disagreements;
  }
  return {disagreements == 0,
          std::to_string(1000 - disagreements) + "/1000 agree (" + std::to_string(varying) + " varying families)"};
}

io::BundleDocument load(const std::string& name, std::string* text = nullptr) {
  std::ifstream in(std::string(BTK_FIXTURE_DIR) + "/" + name, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  if (text) *text = os.str();
  return io::parse_document(os.str());
}

// 8. Seeded counterexamples fail with a visible residual.
Result counterexamples() {
  std::string detail;
  bool pass = true;
  auto expect_fail = [&](const std::string& label, const std::vector<io::Verdict>& vs) {
    for (const auto& v : vs) {
      const bool ok = !v.pass && v.residual >= 1e-3;
      pass = pass && ok;
      detail += (detail.empty() ? "" : ", ") + label + "/" + v.check + " " + fmt("%.3g", v.residual) + (ok ? "" : " (!)");
    }
  };
  {
    io::CheckArgs a;
    a.morphism = "M";
    a.t1 = "R";
    a.t2 = "R";
    expect_fail("rotation-vs-diag", io::run_check(load("rotation_diag.json"), "consistency", a));
  }
  {
    io::CheckArgs a;
    a.factor = "I";
    a.shift = std::vector<double>{1.0, 0.5};
    const auto doc = load("affine.json");
    expect_fail("affine", io::run_check(doc, "homogeneity", a));
    expect_fail("affine", io::run_check(doc, "additivity", a));
  }
  {
    io::CheckArgs a;
    a.factor = "S";
    expect_fail("scaling-vs-euclidean", io::run_check(load("finsler_scaling.json"), "finsler", a));
  }
  return {pass, detail};
}

std::string capture(const std::string& cmd) {
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  pclose(pipe);
  return out;
}

// 9. Determinism of fuzz output and document round trips.
Result determinism() {
  const std::string cmd = std::string(BTK_CLI) + " fuzz --seed 42";
  const std::string a = capture(cmd);
  const std::string b = capture(cmd);
  const bool fuzz_ok = !a.empty() && a == b;
  int mismatches = 0;
  const char* fixtures[] = {"minimal.json", "rotation_diag.json", "affine.json", "finsler_scaling.json",
                            "hermitian_standard.json", "hermitian_split.json"};
  for (const char* f : fixtures) {
    std::string text;
    const auto doc = load(f, &text);
    if (io::serialize_document(doc) != text || !(io::parse_document(io::serialize_document(doc)) == doc)) ++mismatches;
  }
  return {fuzz_ok && mismatches == 0, std::string("fuzz reruns ") + (fuzz_ok ? "identical" : "DIFFER") + " (" +
                                          std::to_string(a.size()) + " bytes), " + std::to_string(mismatches) +
                                          "/6 fixture round-trip mismatches"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Result()>> criteria[] = {
      {"AC1 groupoid suite", groupoid_suite},
      {"AC2 synthesis soundness", synthesis_soundness},
      {"AC3 consistency/section agreement", metamorphic_law},
      {"AC4 gauge invariance", gauge_invariance},
      {"AC5 P-matrix exactness", p_exactness},
      {"AC6 Hermitian round trip", hermitian_round_trip},
      {"AC7 signature constancy", signature_law},
      {"AC8 counterexample detection", counterexamples},
      {"AC9 CLI determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Result o{false, ""};
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-36s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
