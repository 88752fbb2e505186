#pragma once

// Seeded property fuzzer. Every trial draws from its own derived seed and
// outcomes are merged in trial order, so reports are byte-identical across
// runs and across serial/parallel execution.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "btk/error.hpp"
#include "btk/hermitian.hpp"
#include "btk/io/document.hpp"
#include "btk/morphism.hpp"
#include "btk/random.hpp"
#include "btk/structure.hpp"
#include "btk/transport.hpp"

namespace btk::io {

struct FuzzOptions {
  std::uint64_t seed = 42;
  /// Fibre dimension; 0 draws one per trial from [1, 4].
  int dim = 0;
  int samples = 8;
  int trials = 100;
  bool parallel = false;
  /// Property whose inputs are deliberately broken (harness self-test).
  std::optional<std::string> corrupt;
};

struct PropertyStats {
  std::string name;
  int checked = 0;
  int failures = 0;
  double worst = 0.0;
  std::optional<int> first_failure;
};

struct FuzzReport {
  FuzzOptions options;
  std::vector<PropertyStats> properties;

  bool pass() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.failures == 0; });
  }
  std::vector<std::string> violated() const {
    std::vector<std::string> out;
    for (const auto& p : properties)
      if (p.failures) out.push_back(p.name);
    return out;
  }
};

inline const std::vector<std::string>& fuzz_properties() {
  static const std::vector<std::string> names{
      "groupoid.composition", "groupoid.identity",     "groupoid.roundtrip",  "gauge.invariance",
      "morphism.synthesized", "morphism.anchor",       "morphism.c0",         "morphism.inverse",
      "induced.identity",     "induced.composition",   "section.metamorphic", "gauge.morphism",
      "linear.homogeneity",   "linear.additivity",     "metric.synthesized",  "hermitian.roundtrip"};
  return names;
}

namespace detail {

struct Outcome1 {
  bool checked = false;
  bool pass = true;
  double residual = 0.0;
};

using TrialOutcome = std::vector<Outcome1>;

inline Index property_index(const std::string& name) {
  const auto& names = fuzz_properties();
  return static_cast<Index>(std::find(names.begin(), names.end(), name) - names.begin());
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return relative(frobenius(a - b), std::max(frobenius(a), frobenius(b)));
}

inline TrialOutcome run_trial(const FuzzOptions& o, int trial) {
  Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(trial)));
  const int n = o.dim > 0 ? o.dim : rng.integer(1, 4);
  const auto samples = static_cast<Index>(o.samples);
  const PathGrid grid = PathGrid::uniform(samples, 0.0, 1.0);
  const FiberSpec fiber(n);
  TrialOutcome out(fuzz_properties().size());

  auto bad = [&](const char* name) { return o.corrupt && *o.corrupt == name; };
  // Corruption pushes an input well outside the property's tolerance.
  auto damage = [&](Matrix m) {
    m(0, 0) += 0.5 * std::max(1.0, frobenius(m));
    return m;
  };
  auto set = [&](const char* name, bool pass, double residual) {
    auto& slot = out[property_index(name)];
    slot.checked = true;
    slot.pass = pass;
    slot.residual = residual;
  };
  auto set_report = [&](const char* name, const PairReport& r) { set(name, r.pass, r.max_relative); };

  auto random_factor = [&](double max_cond) {
    std::vector<Matrix> ms;
    for (Index i = 0; i < samples; ++i) ms.push_back(rng.with_condition(n, rng.log_uniform(1.0, max_cond)));
    return FrameFactor(grid, fiber, std::move(ms));
  };

  const FrameFactor f1 = random_factor(1e3);
  const FrameFactor f2 = random_factor(1e3);
  const LinearTransport t1(f1);
  const LinearTransport t2(f2);
  const double tol = 1e-9;

  // Groupoid laws on a tabulated family, corrupting one entry on request.
  {
    auto table = tabulate(t1);
    std::vector<Matrix> entries;
    for (Index i = 0; i < samples; ++i)
      for (Index j = 0; j < samples; ++j) entries.push_back(table.at(i, j));
    if (bad("groupoid.composition") && samples > 2) entries[0 * samples + 1] = damage(entries[1]);
    if (bad("groupoid.identity")) entries[0] = damage(entries[0]);
    const TransportTable h(grid, entries);
    const auto r = verify_groupoid(h, 1e-10);
    const bool comp_ok = r.pass || r.worst_law != GroupoidLaw::Composition;
    const bool id_ok = r.pass || r.worst_law != GroupoidLaw::Identity;
    set("groupoid.composition", comp_ok, r.worst_law == GroupoidLaw::Composition ? r.max_relative : 0.0);
    set("groupoid.identity", id_ok, r.worst_law == GroupoidLaw::Identity ? r.max_relative : 0.0);

    const Index anchor = static_cast<Index>(rng.integer(0, static_cast<int>(samples) - 1));
    const LinearTransport back(factor_from_transport(table, anchor));
    double worst = 0.0;
    for (Index i = 0; i < samples; ++i)
      for (Index j = 0; j < samples; ++j) {
        Matrix m = back.matrix(i, j);
        if (bad("groupoid.roundtrip") && i == 0 && j + 1 == samples) m = damage(m);
        worst = std::max(worst, rel_diff(m, t1.matrix(i, j)));
      }
    set("groupoid.roundtrip", worst <= 1e-9, worst);
  }

  // Gauge invariance of the transport.
  {
    Matrix d = rng.with_condition(n, rng.log_uniform(1.0, 1e3));
    const LinearTransport gauged(apply_gauge(f1, GaugeMap(d)));
    double worst = 0.0;
    for (Index i = 0; i < samples; ++i)
      for (Index j = 0; j < samples; ++j) {
        Matrix m = gauged.matrix(i, j);
        if (bad("gauge.invariance") && i != j) m = damage(m);
        worst = std::max(worst, rel_diff(m, t1.matrix(i, j)));
      }
    set("gauge.invariance", worst <= 1e-9, worst);
  }

  // Morphisms synthesized from a random C0.
  const BaseMap base = BaseMap::identity_on(grid);
  const Matrix c0 = rng.with_condition(n, rng.log_uniform(1.0, 1e2));
  const PathMorphism m = synthesize_consistent(c0, f1, f2, base);
  {
    std::vector<Matrix> maps = m.fibre_maps();
    if (bad("morphism.synthesized")) maps.back() = damage(maps.back());
    set_report("morphism.synthesized", check_consistency(PathMorphism(base, maps), t1, t2, tol));
  }
  {
    const Index a = static_cast<Index>(rng.integer(0, static_cast<int>(samples) - 1));
    const Index b = static_cast<Index>(rng.integer(0, static_cast<int>(samples) - 1));
    const ConjugatorC ca = derive_conjugator(m, t1, t2, a, tol);
    ConjugatorC cb = reanchor_conjugator(ca, t1, t2, base, b);
    if (bad("morphism.anchor")) cb.matrix = damage(cb.matrix);
    const double r = rel_diff(cb.matrix, m.at(b));
    set("morphism.anchor", r <= 1e-9, r);

    ConjugatorC from_c0 = conjugator_from_c0(c0, f1, f2, base, a);
    if (bad("morphism.c0")) from_c0.matrix = damage(from_c0.matrix);
    const double r0 = rel_diff(from_c0.matrix, ca.matrix);
    set("morphism.c0", r0 <= 1e-9, r0);
  }
  {
    const LinearTransport pulled = invert_to_transport(m, t2);
    double worst = 0.0;
    for (Index i = 0; i < samples; ++i)
      for (Index j = 0; j < samples; ++j) {
        Matrix h = pulled.matrix(i, j);
        if (bad("morphism.inverse") && i != j) h = damage(h);
        worst = std::max(worst, rel_diff(h, t1.matrix(i, j)));
      }
    set("morphism.inverse", worst <= 1e-8, worst);
  }

  // Induced transport on fibre maps: identity and composition laws.
  {
    const Matrix x = rng.gaussian(n, n);
    double id_worst = 0.0;
    double comp_worst = 0.0;
    for (Index i = 0; i < samples; ++i) {
      Matrix same = induced_transport_apply(t1, t2, base, x, i, i);
      if (bad("induced.identity")) same = damage(same);
      id_worst = std::max(id_worst, rel_diff(same, x));
      const Index j = (i + 1) % samples;
      const Index k = (i + 3) % samples;
      Matrix two = induced_transport_apply(t1, t2, base, induced_transport_apply(t1, t2, base, x, i, j), j, k);
      if (bad("induced.composition")) two = damage(two);
      comp_worst = std::max(comp_worst, rel_diff(two, induced_transport_apply(t1, t2, base, x, i, k)));
    }
    set("induced.identity", id_worst <= 1e-12, id_worst);
    set("induced.composition", comp_worst <= 1e-8, comp_worst);
  }

  // Consistent morphisms are exactly the induced-transport sections, so the
  // two checks agree on clean and on clearly perturbed inputs.
  {
    std::vector<Matrix> noisy = m.fibre_maps();
    const Index at = static_cast<Index>(rng.integer(0, static_cast<int>(samples) - 1));
    noisy[at] += 1e-2 * std::max(1.0, frobenius(noisy[at])) * rng.orthogonal(n);
    const PathMorphism pm(base, noisy);
    bool agree = true;
    double worst = 0.0;
    for (const PathMorphism* cand : {&m, &pm}) {
      const auto a = check_consistency(*cand, t1, t2, tol);
      auto b = check_section_transported(*cand, t1, t2, tol);
      if (bad("section.metamorphic")) b.pass = !b.pass;
      agree = agree && a.pass == b.pass;
      if (cand == &m) worst = std::max(a.max_relative, b.max_relative);
    }
    set("section.metamorphic", agree, worst);
  }

  // Gauging both transports with D1, D2 and the morphism as D2 M D1^{-1}.
  {
    const Matrix d1 = rng.with_condition(n, rng.log_uniform(1.0, 1e2));
    const Matrix d2 = rng.with_condition(n, rng.log_uniform(1.0, 1e2));
    const LinearTransport g1(apply_gauge(f1, GaugeMap(d1)));
    const LinearTransport g2(apply_gauge(f2, GaugeMap(d2)));
    const Matrix d1_inv = inverse(d1);
    std::vector<Matrix> maps;
    for (Index i = 0; i < samples; ++i) maps.push_back(m.at(i));
    if (bad("gauge.morphism")) maps.front() = damage(maps.front());
    // The fibre maps are gauge independent; C0 changes to D2 C0 D1^{-1}.
    const PathMorphism same(base, maps);
    const auto r = check_consistency(same, g1, g2, tol);
    const PathMorphism resynth = synthesize_consistent(d2 * c0 * d1_inv, g1.factor(), g2.factor(), base);
    double diff = 0.0;
    for (Index i = 0; i < samples; ++i) diff = std::max(diff, rel_diff(resynth.at(i), maps[i]));
    set("gauge.morphism", r.pass && diff <= 1e-8, std::max(r.max_relative, diff));
  }

  // Linear transports are homogeneous and additive.
  {
    GeneralTransport g = as_general(t1);
    if (bad("linear.homogeneity") || bad("linear.additivity")) {
      const bool hom = bad("linear.homogeneity");
      g.map = [t1, hom](Index i, Index j, const Vector& v) -> Vector {
        Vector w = t1.apply(i, j, v);
        if (i == j) return w;
        if (hom) return w * (1.0 + 0.5 * std::tanh(v.norm()));
        return w + Vector::Ones(w.size());
      };
    }
    set_report("linear.homogeneity", check_homogeneity(g, tol));
    set_report("linear.additivity", check_additivity(g, tol));
  }

  // G(s) = F(s)^T G0 F(s) is carried by the transport.
  {
    Matrix q = rng.gaussian(n, n);
    const Matrix g0 = q * q.transpose() + identity(n);
    std::vector<Matrix> gs;
    for (Index i = 0; i < samples; ++i) {
      const Matrix gm = f1.at(i).transpose() * g0 * f1.at(i);
      gs.push_back(0.5 * (gm + gm.transpose()));
    }
    if (bad("metric.synthesized")) gs.back() = damage(gs.back());
    set_report("metric.synthesized",
               check_bilinear_consistency(BilinearField(grid, gs, BilinearKind::Symmetric, tol), t1, tol));
  }

  // Hermitian round trip for even fibres: orthogonal factor -> (J, G) -> factor.
  if (n % 2 == 0) {
    std::vector<Matrix> os;
    for (Index i = 0; i < samples; ++i) os.push_back(rng.orthogonal(n));
    const FrameFactor fo(grid, fiber, std::move(os));
    Matrix jstd = Matrix::Zero(n, n);
    for (int k = 0; k + 1 < n; k += 2) {
      jstd(k, k + 1) = -1.0;
      jstd(k + 1, k) = 1.0;
    }
    const auto h = hermitian_from_transport(fo, ConjugatorPair{jstd, identity(n)}, tol);
    HermitianSolveOptions hopts;
    hopts.z_solve.seed = derive_seed(o.seed ^ 0x4e5a, static_cast<std::uint64_t>(trial));
    const auto solved = transport_from_hermitian(h, std::nullopt, hopts);
    if (!solved) {
      set("hermitian.roundtrip", false, solved.infeasible().certificate_residual);
    } else {
      auto c = solved->check;
      if (bad("hermitian.roundtrip")) {
        auto fs = solved->factor.matrices();
        fs.back() = damage(fs.back());
        c = check_hermitian_consistency(h, LinearTransport(FrameFactor(grid, fiber, std::move(fs))), hopts.tol);
      }
      set("hermitian.roundtrip", c.pass,
          std::max({c.complex_part.commutation.max_relative, c.metric_part.max_relative, c.compatibility_residual}));
    }
  }
  return out;
}

}  // namespace detail

inline FuzzReport fuzz(const FuzzOptions& o) {
  if (o.dim < 0 || o.dim > 8) fail(ErrorCode::InvalidArgument, "fuzz dim must be in [1, 8] (0 = random)");
  if (o.samples < 2 || o.samples > 64) fail(ErrorCode::InvalidArgument, "fuzz samples must be in [2, 64]");
  if (o.trials < 1 || o.trials > 10000) fail(ErrorCode::InvalidArgument, "fuzz trials must be in [1, 10000]");
  if (o.corrupt && detail::property_index(*o.corrupt) >= fuzz_properties().size())
    fail(ErrorCode::InvalidArgument, "unknown property '" + *o.corrupt + "'");

  std::vector<detail::TrialOutcome> results(static_cast<std::size_t>(o.trials));
  if (o.parallel) {
    const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, o.trials);
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (int t = w; t < o.trials; t += workers) results[static_cast<std::size_t>(t)] = detail::run_trial(o, t);
      }));
    for (auto& j : jobs) j.get();
  } else {
    for (int t = 0; t < o.trials; ++t) results[static_cast<std::size_t>(t)] = detail::run_trial(o, t);
  }

  FuzzReport report{o, {}};
  for (const auto& name : fuzz_properties()) report.properties.push_back(PropertyStats{name, 0, 0, 0.0, std::nullopt});
  for (int t = 0; t < o.trials; ++t) {
    const auto& r = results[static_cast<std::size_t>(t)];
    for (Index k = 0; k < r.size(); ++k) {
      if (!r[k].checked) continue;
      auto& s = report.properties[k];
      ++s.checked;
      s.worst = std::max(s.worst, r[k].residual);
      if (!r[k].pass) {
        ++s.failures;
        if (!s.first_failure) s.first_failure = t;
      }
    }
  }
  return report;
}

/// Deterministic text rendering (no timings).
inline std::string render(const FuzzReport& r) {
  const auto& o = r.options;
  std::string s = "fuzz seed=" + std::to_string(o.seed) + " dim=" + (o.dim ? std::to_string(o.dim) : "random") +
                  " samples=" + std::to_string(o.samples) + " trials=" + std::to_string(o.trials) + "\n";
  for (const auto& p : r.properties) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-22s checked=%d failures=%d worst=%s", p.failures ? "FAIL" : "ok",
                  p.name.c_str(), p.checked, p.failures, format_double(p.worst).c_str());
    s += line;
    if (p.first_failure) s += " first_trial=" + std::to_string(*p.first_failure);
    s += "\n";
  }
  if (r.pass()) s += "all properties hold\n";
  else {
    s += "violated:";
    for (const auto& v : r.violated()) s += " " + v;
    s += "\n";
  }
  return s;
}

}  // namespace btk::io
