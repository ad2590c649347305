#include <doctest.h>

#include <cmath>

#include "decodecal/calibration.hpp"
#include "oracle.hpp"

using namespace decodecal;

namespace {

World answer_world(std::vector<double> p, std::vector<double> q) {
  std::vector<CanonicalAnswer> answers;
  for (std::size_t i = 0; i < p.size(); ++i) answers.push_back(CanonicalAnswer::text("ans" + std::to_string(i)));
  World w;
  w.instances.push_back(make_answer_instance("i0", answers, std::move(p), std::move(q)));
  return w;
}

const StrategySpec kFull = StrategySpec::temperature(1.0);

}  // namespace

TEST_CASE("objective_j examples") {
  const World w = answer_world({0.6, 0.4}, {0.7, 0.3});
  CHECK(objective_j(w, StrategySpec::greedy()).value == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(objective_j(w, kFull).value == doctest::Approx(0.54).epsilon(1e-15));
  const World u = answer_world({0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25});
  for (const auto& spec : oracle::default_grid_with_temperatures())
    CHECK(objective_j(u, spec).value == doctest::Approx(0.25).epsilon(1e-12));
  const Estimate e = objective_j(w, kFull);
  CHECK(e.mode == Mode::exact);
  CHECK_FALSE(e.n_samples.has_value());
  CHECK_FALSE(e.std_error.has_value());
}

TEST_CASE("ece and brier examples") {
  const World w = answer_world({0.6, 0.4}, {0.7, 0.3});
  CHECK(ece(w, StrategySpec::greedy()).value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(ece(w, kFull).value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(brier(w, StrategySpec::greedy()).value == doctest::Approx(0.01 / 0.7).epsilon(1e-12));
  CHECK(PreparedWorld(w).ece1() == doctest::Approx(0.1).epsilon(1e-12));

  const World cal = answer_world({0.5, 0.3, 0.2}, {0.5, 0.3, 0.2});
  for (const auto& spec : oracle::default_grid_with_temperatures()) {
    CHECK(ece(cal, spec).value == 0.0);
    CHECK(brier(cal, spec).value == 0.0);
  }
}

TEST_CASE("gap functional examples") {
  const World headheavy = answer_world({0.9, 0.1}, {0.9, 0.1});
  CHECK(gap_g1(headheavy, kFull) == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(gap_g2(headheavy, kFull) == doctest::Approx(-0.51).epsilon(1e-12));
  CHECK(objective_j(headheavy, StrategySpec::greedy()).value >= objective_j(headheavy, kFull).value);

  const World adv = answer_world({0.3, 0.7}, {0.6, 0.4});
  CHECK(gap_g1(adv, kFull) == doctest::Approx(-0.52).epsilon(1e-12));
  CHECK(gap_g2(adv, kFull) == doctest::Approx(-0.87).epsilon(1e-12));

  const World w = answer_world({0.6, 0.4}, {0.7, 0.3});
  const PreparedWorld pw(w);
  CHECK(gap_g1(w, StrategySpec::top_k(1)) == doctest::Approx(-2.0 * pw.ece1()).epsilon(1e-12));
  CHECK(gap_g1(headheavy, StrategySpec::top_k(1)) == 0.0);

  const World point = answer_world({1.0, 0.0}, {1.0, 0.0});
  CHECK(gap_g2(point, kFull) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("top_k(1) reproduces the greedy metrics exactly") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<double> p(n), q(n);
    double zp = 0, zq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      zp += (p[i] = rng.uniform());
      zq += (q[i] = rng.uniform() + 1e-3);
    }
    for (auto& x : p) x /= zp;
    for (auto& x : q) x /= zq;
    const World w = answer_world(p, q);
    const PreparedWorld pw(w);
    const MetricSet k1 = evaluate(pw, StrategySpec::top_k(1));
    const MetricSet g = evaluate(pw, StrategySpec::greedy());
    CHECK(k1.ECE.value == pw.ece1());
    CHECK(k1.ECE.value == g.ECE.value);
    CHECK(k1.BS.value == g.BS.value);
    CHECK(k1.J.value == pw.j_greedy());
  }
}

TEST_CASE("metrics match a direct summation oracle on random worlds") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    World w;
    std::vector<std::vector<double>> ps, qs;
    const std::size_t m = 1 + rng.below(4);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t n = 2 + rng.below(6);
      std::vector<double> p(n), q(n);
      double zp = 0, zq = 0;
      for (std::size_t j = 0; j < n; ++j) {
        zp += (p[j] = rng.uniform());
        zq += (q[j] = rng.uniform() + 1e-2);
      }
      for (auto& x : p) x /= zp;
      for (auto& x : q) x /= zq;
      std::vector<CanonicalAnswer> answers;
      for (std::size_t j = 0; j < n; ++j) answers.push_back(CanonicalAnswer::numeric(static_cast<double>(j * 100)));
      w.instances.push_back(make_answer_instance("i" + std::to_string(i), answers, p, q));
      ps.push_back(p);
      qs.push_back(q);
    }
    for (const auto& spec : {StrategySpec::top_k(2), StrategySpec::top_p(0.7), StrategySpec::temperature(2.0)}) {
      // Oracle: q^alpha per answer-level instance is the truncated root row.
      double J = 0, E = 0, B = 0, G1 = 0, G2 = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const auto& p = ps[i];
        const auto& q = qs[i];
        std::vector<double> qq = q;
        qq.push_back(0.0);
        const ProbVector trunc = truncated_distribution(ProbVector(qq), spec);
        const std::size_t a1 = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
        const double e1 = std::abs(q[a1] - p[a1]);
        double j = 0, e = 0, b = 0, t1 = 0, t2 = 0;
        for (std::size_t a = 0; a < q.size(); ++a) {
          const double w8 = trunc.values()[a];
          j += w8 * p[a];
          e += w8 * std::abs(q[a] - p[a]);
          b += w8 * (q[a] - p[a]) * (q[a] - p[a]) / q[a];
          t1 += w8 * (q[a1] - q[a]);
          t2 += w8 * (q[a1] - (1 + q[a] * q[a]) / (2 * q[a]));
        }
        J += j;
        E += e;
        B += b;
        G1 += t1 - e1 - e;
        G2 += t2 - e1 + b / 2;
      }
      const MetricSet got = evaluate(PreparedWorld(w), spec);
      const double n = static_cast<double>(m);
      CHECK(got.J.value == doctest::Approx(J / n).epsilon(1e-12));
      CHECK(got.ECE.value == doctest::Approx(E / n).epsilon(1e-12));
      CHECK(got.BS.value == doctest::Approx(B / n).epsilon(1e-12));
      CHECK(got.G1.value == doctest::Approx(G1 / n).epsilon(1e-12));
      CHECK(got.G2.value == doctest::Approx(G2 / n).epsilon(1e-12));
    }
  }
}

TEST_CASE("verify_greedy_optimality verdicts") {
  const World cal = answer_world({0.5, 0.3, 0.2}, {0.5, 0.3, 0.2});
  std::vector<StrategySpec> grid = {StrategySpec::greedy(), kFull, StrategySpec::top_k(2),
                                    StrategySpec::top_p(0.9), StrategySpec::min_p(0.1), StrategySpec::beam(2)};
  CHECK(verify_greedy_optimality(cal, grid).verdict == Verdict::theorem_applies_and_confirmed);

  const World adv = answer_world({0.3, 0.7}, {0.6, 0.4});
  const TheoremReport rep = verify_greedy_optimality(adv, {kFull});
  CHECK(rep.verdict == Verdict::theorem_silent);
  REQUIRE(rep.records.size() == 1);
  CHECK(rep.records[0].J == doctest::Approx(0.46).epsilon(1e-12));
  CHECK(rep.J_greedy == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_FALSE(rep.records[0].cond1_holds);
  CHECK_FALSE(rep.records[0].cond2_holds);
  CHECK(rep.to_json().find("theorem_silent") != std::string::npos);

  CHECK_THROWS_AS(verify_greedy_optimality(cal, {}), Error);
}

TEST_CASE("greedy-equivalent strategies are flagged") {
  const World w = answer_world({0.6, 0.4}, {0.7, 0.3});
  const TheoremReport rep = verify_greedy_optimality(w, {StrategySpec::greedy(), StrategySpec::top_k(1),
                                                         StrategySpec::beam(3), kFull});
  CHECK(rep.records[0].greedy_equivalent);
  CHECK(rep.records[1].greedy_equivalent);
  CHECK(rep.records[2].greedy_equivalent);
  CHECK_FALSE(rep.records[3].greedy_equivalent);
}

TEST_CASE("monte carlo estimates") {
  WorldSpec s = world_presets("uniform-tail");
  s.num_instances = 40;
  const World w = generate_world(s, 3);
  const PreparedWorld pw(w);
  EvalOptions mc;
  mc.mode = Mode::monte_carlo;
  mc.n_samples = 40000;
  const StrategySpec spec = StrategySpec::top_p(0.9, 0.7);
  const MetricSet a = evaluate(pw, spec, mc);
  const MetricSet b = evaluate(pw, spec, mc);
  CHECK(a.J.value == b.J.value);
  CHECK(a.J.mode == Mode::monte_carlo);
  REQUIRE(a.J.std_error.has_value());
  CHECK(*a.J.std_error > 0.0);
  CHECK(*a.J.n_samples == 40000u * 4u);
  const MetricSet ex = evaluate(pw, spec);
  CHECK(std::abs(a.J.value - ex.J.value) <= 5 * *a.J.std_error);
  CHECK(std::abs(a.ECE.value - ex.ECE.value) <= 5 * *a.ECE.std_error);

  const MetricSet g = evaluate(pw, StrategySpec::greedy(), mc);
  CHECK(g.J.value == doctest::Approx(pw.j_greedy()).epsilon(1e-12));
  CHECK(*g.J.std_error == 0.0);
}

TEST_CASE("non-enumerable worlds: exact mode refuses, monte carlo uses joint products") {
  std::vector<std::vector<std::string>> spellings = {{"a", "b", "c", "d", "e", "f", "g"},
                                                     {"h", "i", "j", "k", "l", "m", "n"}};
  AnswerSpace space({CanonicalAnswer::text("abcdefg"), CanonicalAnswer::text("hijklmn")});
  World w;
  w.instances.push_back(Instance{InstanceRef{"big"}, space,
                                 AnswerDist::from_space(space, std::vector<double>{0.5, 0.5}),
                                 make_spelled_model("big", spellings, std::vector<double>{0.8, 0.2})});
  const PreparedWorld pw(w);
  CHECK_FALSE(pw.enumerable());
  CHECK(pw.instances()[0].q_a1 == doctest::Approx(0.8));
  CHECK_THROWS_AS(evaluate(pw, kFull), Error);
  EvalOptions mc;
  mc.mode = Mode::monte_carlo;
  mc.n_samples = 20000;
  const MetricSet m = evaluate(pw, kFull, mc);
  CHECK(m.ECE.value == doctest::Approx(0.8 * 0.3 + 0.2 * 0.3).epsilon(1e-12));
  CHECK(m.J.value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rank curves") {
  const World cal = answer_world({0.5, 0.3, 0.2}, {0.5, 0.3, 0.2});
  for (const auto& pt : rank_curve(PreparedWorld(cal), 3)) CHECK(pt.ECE == 0.0);
  CHECK(max_answer_space(cal) == 3);
}
