#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "fls/lyons_sullivan.hpp"

using namespace fls;

namespace {

constexpr double kPi = std::numbers::pi;

double combined_se(const TransitionEntry* a, const TransitionEntry* b, double n1, double n2) {
  double p1 = a ? a->frequency : 0.0;
  double p2 = b ? b->frequency : 0.0;
  // Pooled frequency keeps the bound positive when one side saw no hits.
  double p = 0.5 * (p1 + p2);
  return std::sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2));
}

double freq(const TransitionEntry* e) { return e ? e->frequency : 0.0; }

}  // namespace

TEST_CASE("base Harnack bound from the Poisson kernel") {
  auto flat = ModelSpace::flat();
  // rho_V = 1, rho_E = 0.5: (1 + 0.5) / (1 - 0.5).
  CHECK(base_harnack_bound(flat, 0.5, 1.0) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(base_harnack_bound(flat, 1e-6, 1.0) == doctest::Approx(1.0).epsilon(1e-5));
  // Hyperbolic radii go through tanh(r/2).
  auto hyp = ModelSpace::hyperbolic();
  double e = std::tanh(0.1);
  double v = std::tanh(0.25);
  CHECK(base_harnack_bound(hyp, 0.2, 0.5) == doctest::Approx((v + e) / (v - e)).epsilon(1e-12));
  CHECK(base_harnack_bound(hyp, 0.2, 0.5) == doctest::Approx(2.3724).epsilon(1e-4));
  CHECK_THROWS_AS(base_harnack_bound(flat, 0.5, 0.5), ContractError);
}

TEST_CASE("base density ratio at the boundary of the unit ball") {
  auto flat = ModelSpace::flat();
  Ball v{ChartPoint{}, 1.0};
  CHECK(base_density_ratio(flat, v, {0.5, 0.0}, {1.0, 0.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(base_density_ratio(flat, v, {0.5, 0.0}, {-1.0, 0.0}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(base_density_ratio(flat, v, {0.0, 0.0}, std::polar(1.0, 0.7)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(base_density_ratio(flat, v, {0.5, 0.0}, {0.9, 0.0}), ContractError);

  // Off-centre ball in the disk: the ratio is invariant under moving the centre.
  auto hyp = ModelSpace::hyperbolic();
  MobiusMap g = MobiusMap::disk_transvection({0.3, -0.2});
  Ball at0{ChartPoint{}, 0.5};
  Ball moved{g(0.0), 0.5};
  ChartPoint y = std::polar(std::tanh(0.1), 0.4);
  ChartPoint z = std::polar(std::tanh(0.25), 2.0);
  CHECK(base_density_ratio(hyp, moved, g(y.z), g(z.z)) ==
        doctest::Approx(base_density_ratio(hyp, at0, y, z)).epsilon(1e-9));
}

TEST_CASE("star-recurrent family validation") {
  auto group = DeckGroup::for_model(ModelSpace::hyperbolic());
  auto validate = [&](double re, double rv, double c, Level level) {
    StarRecurrentFamily{re, rv, c, level}.validate(group);
  };
  CHECK_NOTHROW(StarRecurrentFamily{0.2, 0.5, 3.0, Level::Base}.validate(group));
  CHECK_THROWS_AS(validate(0.8, 0.9, 3.0, Level::Base), ContractError);
  CHECK_THROWS_AS(validate(0.2, 1.0, 3.0, Level::Base), ContractError);
  CHECK_NOTHROW(StarRecurrentFamily{0.2, 4.5, 30.0, Level::Bundle}.validate(group));
  CHECK_THROWS_AS(validate(0.2, 0.5, 0.5, Level::Base), ContractError);
  CHECK_THROWS_AS(validate(0.5, 0.2, 3.0, Level::Base), ContractError);
}

TEST_CASE("chain stages respect the stopping-time structure") {
  auto group = DeckGroup::for_model(ModelSpace::hyperbolic());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.2, 0.5, base_harnack_bound(m, 0.2, 0.5), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.diffusion.step = 1e-2;
  cfg.truncation_radius = 12.0;
  cfg.acceptances = 3;
  const HorizontalState start = chain.representative(group.basepoint());
  int finished = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    ChainRecord rec = chain.run(start, cfg, 11, i);
    CHECK(rec.tau0 > 0.0);
    double last = rec.tau0;
    for (const auto& st : rec.stages) {
      CHECK(st.T >= last);
      CHECK(st.tau > st.T);
      last = st.tau;
      CHECK(m.dist(st.X.coords, st.Y.frame.base) <= fam.r_E + 1e-6);
      CHECK(m.dist(st.X.coords, st.Z.frame.base) == doctest::Approx(fam.r_V).epsilon(1e-5));
      CHECK(st.threshold <= 1.0 + 1e-12);
      CHECK(st.threshold >= 1.0 / (fam.C * fam.C) - 1e-12);
      CHECK(st.accepted == (st.U <= st.threshold));
    }
    if (!rec.escaped) {
      ++finished;
      CHECK(rec.accepted.size() == 3);
      CHECK(rec.stages.back().accepted);
    }
  }
  CHECK(finished > 0);
}

TEST_CASE("transition estimate: normalisation and acceptance rate") {
  auto group = DeckGroup::for_model(ModelSpace::flat());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.1, 0.2, base_harnack_bound(m, 0.1, 0.2), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.sampler = Sampler::Exact;
  cfg.truncation_radius = 10.0;
  OrbitDictionary dict(group);
  const std::int64_t n = 20000;
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), n, cfg, 5, 1, dict);
  double total = est.escaped_mass;
  for (const auto& e : est.entries) total += e.frequency;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.threshold_violations == 0);
  // Each stage accepts with probability E[ratio] / C = 1 / C.
  double rate = est.acceptance_rate();
  double se = std::sqrt(rate * (1.0 - rate) / static_cast<double>(est.stages));
  CHECK(std::abs(rate - 1.0 / fam.C) < 4.0 * se + est.escaped_mass);
  CHECK(rate >= 1.0 / (fam.C * fam.C));
  CHECK(rate <= 1.0);

  // The lattice law is invariant under the rotation by pi/2 and reflections.
  std::map<std::pair<long, long>, double> law;
  for (const auto& e : est.entries) law[e.point.deck.lattice()] = e.frequency;
  auto at = [&](long a, long b) {
    auto it = law.find({a, b});
    return it == law.end() ? 0.0 : it->second;
  };
  const double nn = static_cast<double>(n);
  for (auto [a, b] : {std::pair<long, long>{1, 0}, {1, 1}, {2, 1}}) {
    double p = at(a, b);
    double tol = 4.0 * std::sqrt(std::max(p, 1e-3) * 2.0 / nn);
    CHECK(std::abs(at(-b, a) - p) < tol);
    CHECK(std::abs(at(-a, -b) - p) < tol);
    CHECK(std::abs(at(b, a) - p) < tol);
  }
}

TEST_CASE("transition law is deck equivariant") {
  auto group = DeckGroup::for_model(ModelSpace::hyperbolic());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.2, 0.5, base_harnack_bound(m, 0.2, 0.5), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.sampler = Sampler::Exact;
  OrbitDictionary dict(group);
  const std::int64_t n = 20000;
  DeckElement g = group.element({1, 2});
  FiberPoint gx = group.fiber_point(g);
  TransitionEstimate e0 = estimate_transitions(chain, group.basepoint(), n, cfg, 21, 1, dict);
  TransitionEstimate eg = estimate_transitions(chain, gx, n, cfg, 22, 1, dict);
  CHECK(std::abs(e0.escaped_mass - eg.escaped_mass) < 4.0 * std::sqrt(2.0 * 0.3 / n));
  int compared = 0;
  for (const auto& e : e0.entries) {
    if (e.frequency < 0.01) continue;
    FiberPoint moved = group.fiber_point(g.compose(e.point.deck));
    auto label = dict.find(moved);
    const TransitionEntry* other = label ? eg.find(*label) : nullptr;
    CHECK(std::abs(e.frequency - freq(other)) < 4.0 * combined_se(&e, other, n, n));
    ++compared;
  }
  CHECK(compared >= 3);
}

TEST_CASE("stepped and exact samplers agree in law") {
  auto group = DeckGroup::for_model(ModelSpace::flat());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.1, 0.2, base_harnack_bound(m, 0.1, 0.2), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig stepped;
  stepped.diffusion.step = 2e-4;
  stepped.truncation_radius = 6.0;
  ChainConfig exact = stepped;
  exact.sampler = Sampler::Exact;
  OrbitDictionary dict(group);
  const std::int64_t ns = 3000;
  const std::int64_t ne = 20000;
  TransitionEstimate a = estimate_transitions(chain, group.basepoint(), ns, stepped, 31, 1, dict);
  TransitionEstimate b = estimate_transitions(chain, group.basepoint(), ne, exact, 32, 1, dict);
  for (const auto& e : b.entries) {
    if (e.frequency < 0.02) continue;
    const TransitionEntry* s = a.find(e.label);
    CHECK(std::abs(freq(s) - e.frequency) < 4.0 * combined_se(s, &e, ns, ne));
  }
}

TEST_CASE("accepted points form a Markov chain") {
  auto group = DeckGroup::for_model(ModelSpace::hyperbolic());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.2, 0.5, base_harnack_bound(m, 0.2, 0.5), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.sampler = Sampler::Exact;
  cfg.acceptances = 2;
  const HorizontalState start = chain.representative(group.basepoint());
  OrbitDictionary dict(group);

  // Law of X_{N_2} given X_{N_1} = basepoint against the one-step law.
  std::map<int, double> cond;
  double given = 0.0;
  for (std::uint64_t i = 0; i < 30000; ++i) {
    ChainRecord rec = chain.run(start, cfg, 41, i);
    if (rec.stages.empty() || rec.accepted.empty()) continue;
    if (!rec.accepted_point(0).deck.is_identity_word()) continue;
    given += 1.0;
    if (!rec.escaped) cond[dict.label_of(rec.accepted_point(1))] += 1.0;
  }
  REQUIRE(given > 1000.0);
  ChainConfig one = cfg;
  one.acceptances = 1;
  const std::int64_t n = 20000;
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), n, one, 42, 1, dict);
  for (const auto& e : est.entries) {
    if (e.frequency < 0.02) continue;
    double p = cond[e.label] / given;
    double se = std::sqrt(e.frequency * (1.0 - e.frequency) * (1.0 / given + 1.0 / n));
    CHECK(std::abs(p - e.frequency) < 4.0 * se);
  }
}

TEST_CASE("escaped mass does not grow with the truncation radius") {
  for (auto model : {ModelSpace::flat(), ModelSpace::hyperbolic()}) {
    auto group = DeckGroup::for_model(model);
    double re = model.is_hyperbolic() ? 0.2 : 0.1;
    double rv = model.is_hyperbolic() ? 0.5 : 0.2;
    StarRecurrentFamily fam{re, rv, base_harnack_bound(model, re, rv), Level::Base};
    LyonsSullivanChain chain(group, fam);
    ChainConfig cfg;
    cfg.sampler = Sampler::Exact;
    double previous = 1.0;
    for (double radius : {3.0, 5.0, 8.0}) {
      cfg.truncation_radius = radius;
      OrbitDictionary dict(group);
      TransitionEstimate est = estimate_transitions(chain, group.basepoint(), 4000, cfg, 51, 1, dict);
      // Same seeds: a path escaping the larger ball escaped the smaller one too.
      CHECK(est.escaped_mass <= previous);
      previous = est.escaped_mass;
    }
  }
}

TEST_CASE("discretization residual of harmonic functions") {
  auto group = DeckGroup::for_model(ModelSpace::flat());
  const auto& m = group.model();
  StarRecurrentFamily fam{0.1, 0.2, base_harnack_bound(m, 0.1, 0.2), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.sampler = Sampler::Exact;
  cfg.truncation_radius = 10.0;
  OrbitDictionary dict(group);
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), 20000, cfg, 61, 1, dict);

  ResidualResult one = discretization_residual([](ChartPoint) { return 1.0; }, 1.0, est);
  CHECK(one.residual == doctest::Approx(est.escaped_mass).epsilon(1e-12));
  CHECK(one.residual <= one.error_budget + 1e-15);

  for (auto h : {std::function<double(ChartPoint)>([](ChartPoint p) { return p.x(); }),
                 std::function<double(ChartPoint)>([](ChartPoint p) { return p.x() * p.x() - p.y() * p.y(); })}) {
    double sup = 100.0;
    ResidualResult r = discretization_residual(h, sup, est);
    CHECK(r.residual <= r.error_budget);
  }
}

TEST_CASE("flat bundle density fit reproduces the Poisson bound") {
  auto m = ModelSpace::flat();
  ExitDensityTable::Options opt;
  opt.harmonics = 8;
  opt.samples = 20000;
  opt.diffusion.step = 1e-4;
  opt.seed = 71;
  ExitDensityTable t = ExitDensityTable::fit(m, 0.1, 0.2, opt);
  CHECK_FALSE(t.frame_resolved());
  // Poisson kernel truncated at 8 harmonics: min relative error 2 * 0.5^9 / 0.5.
  CHECK(t.raw_bound() == doctest::Approx(base_harnack_bound(m, 0.1, 0.2)).epsilon(0.1));
  // Fitted density from y = 0.05 against the Poisson kernel.
  double w = 0.25;
  for (double phi : {0.0, 1.0, kPi}) {
    double poisson = (1.0 - w * w) / (1.0 - 2.0 * w * std::cos(phi) + w * w) / (2.0 * kPi);
    CHECK(t.density(0.05, phi, 0.0) == doctest::Approx(poisson).epsilon(0.1));
  }
  auto group = DeckGroup::for_model(m);
  StarRecurrentFamily fam{0.1, 0.2, harnack_bound(m, {0.1, 0.2, 1.0, Level::Bundle}, &t), Level::Bundle};
  LyonsSullivanChain chain(group, fam, &t);
  ChainConfig cfg;
  cfg.diffusion.step = 1e-3;
  cfg.truncation_radius = 6.0;
  OrbitDictionary dict(group);
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), 300, cfg, 72, 1, dict);
  CHECK(est.threshold_violations == 0);
  CHECK(est.escaped_mass < 0.2);
}

TEST_CASE("hyperbolic bundle fit is invariant under rotating the start frame") {
  auto m = ModelSpace::hyperbolic();
  ExitDensityTable::Options opt;
  opt.harmonics = 2;
  opt.samples = 6000;
  opt.radial_points = 2;
  opt.diffusion.step = 1e-2;
  opt.seed = 81;
  opt.negative_tolerance = 1.0;
  ExitDensityTable a = ExitDensityTable::fit(m, 0.2, 1.0, opt);
  opt.start_angle = 1.3;
  opt.seed = 82;
  ExitDensityTable b = ExitDensityTable::fit(m, 0.2, 1.0, opt);
  CHECK(a.frame_resolved());
  // Each of the 25 coefficients carries sampling error at most 1 / (4 pi^2 sqrt(n)).
  const double se = std::sqrt(2.0 * 25.0 / static_cast<double>(a.samples_per_point())) / (4.0 * kPi * kPi);
  for (double s : {0.0, 0.2}) {
    for (double phi : {-2.0, 0.5, 2.5}) {
      for (double psi : {-0.4, 1.0, 3.0}) CHECK(std::abs(a.density(s, phi, psi) - b.density(s, phi, psi)) < 4.0 * se);
    }
  }
}

TEST_CASE("chain contract violations") {
  auto group = DeckGroup::for_model(ModelSpace::hyperbolic());
  StarRecurrentFamily bundle{0.2, 4.5, 20.0, Level::Bundle};
  CHECK_THROWS_AS(LyonsSullivanChain(group, bundle), ContractError);
  StarRecurrentFamily fam{0.2, 0.5, 3.0, Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cfg;
  cfg.acceptances = 0;
  CHECK_THROWS_AS(chain.run(chain.representative(group.basepoint()), cfg, 1, 0), ContractError);
  OrbitDictionary dict(group);
  CHECK_THROWS_AS(estimate_transitions(chain, group.basepoint(), 0, ChainConfig{}, 1, 1, dict), ContractError);
}
