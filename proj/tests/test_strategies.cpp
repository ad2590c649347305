#include <doctest.h>

#include <cmath>

#include "decodecal/rollout.hpp"
#include "decodecal/strategies.hpp"
#include "oracle.hpp"

using namespace decodecal;

namespace {

CandidateSet ids(std::initializer_list<std::uint32_t> v) {
  CandidateSet out;
  for (auto x : v) out.push_back(TokenId{x});
  return out;
}

const ProbVector kDist({0.5, 0.3, 0.15, 0.05});

std::shared_ptr<const TabularModel> myopic_trap() {
  // Tokens: A=0 B=1 C=2 D=3 E=4 eos=5.
  const TokenId eos{5};
  auto row = [](std::vector<double> v) { return ProbVector(std::move(v)); };
  TabularModel::Rows rows;
  rows.emplace(TokenSeq{}, row({0.6, 0.4, 0, 0, 0, 0}));
  rows.emplace(TokenSeq{TokenId{0}}, row({0, 0, 0.5, 0.5, 0, 0}));
  rows.emplace(TokenSeq{TokenId{1}}, row({0, 0, 0, 0, 0.9, 0.1}));
  for (std::uint32_t a : {0u, 1u})
    for (std::uint32_t b = 2; b <= 5; ++b)
      if (!(a == 1 && b == 5)) rows.emplace(TokenSeq{TokenId{a}, TokenId{b}}, ProbVector::point_mass(6, eos));
  std::map<std::string, TabularModel::Rows> table;
  table.emplace("toy", rows);
  return std::make_shared<const TabularModel>(Vocabulary(6, eos), 3, table);
}

}  // namespace

TEST_CASE("select_candidates examples") {
  CHECK(select_candidates(kDist, StrategySpec::top_k(2)) == ids({0, 1}));
  CHECK(select_candidates(kDist, StrategySpec::top_p(0.8)) == ids({0, 1}));
  CHECK(select_candidates(kDist, StrategySpec::min_p(0.2)) == ids({0, 1, 2}));
  CHECK(select_candidates(kDist, StrategySpec::epsilon(0.1)) == ids({0, 1, 2}));
  CHECK(select_candidates(kDist, StrategySpec::greedy()) == ids({0}));
  CHECK(select_candidates(kDist, StrategySpec::temperature(1.0)) == ids({0, 1, 2, 3}));
  CHECK(select_candidates(kDist, StrategySpec::top_k(10)) == ids({0, 1, 2, 3}));
}

TEST_CASE("eta threshold lands in (0.05, 0.15]") {
  // Independent arithmetic: H in nats, threshold = min(eta, sqrt(eta) e^-H).
  const double H = -(0.5 * std::log(0.5) + 0.3 * std::log(0.3) + 0.15 * std::log(0.15) +
                     0.05 * std::log(0.05));
  const double th = std::min(0.09, std::sqrt(0.09) * std::exp(-H));
  CHECK(th > 0.05);
  CHECK(th <= 0.15);
  CHECK(select_candidates(kDist, StrategySpec::eta(0.09)) == ids({0, 1, 2}));
}

TEST_CASE("threshold fallbacks and ties") {
  const ProbVector flat({0.25, 0.25, 0.25, 0.25});
  CHECK(select_candidates(flat, StrategySpec::epsilon(0.5)) == ids({0}));
  CHECK(select_candidates(flat, StrategySpec::top_k(2)) == ids({0, 1}));
  CHECK(greedy_token(ProbVector({0.4, 0.4, 0.2})) == TokenId{0});
  CHECK(greedy_token(kDist) == TokenId{0});
}

TEST_CASE("truncate_renormalize examples") {
  const ProbVector r = truncate_renormalize(kDist, ids({0, 1}));
  CHECK(r.values()[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(r.values()[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(r.values()[2] == 0.0);
  CHECK(r.values()[3] == 0.0);
  CHECK(truncate_renormalize(kDist, ids({0, 1, 2, 3})) == kDist);
  CHECK(truncate_renormalize(kDist, ids({2})) == ProbVector({0, 0, 1, 0}));
  CHECK_THROWS_AS(truncate_renormalize(ProbVector({1, 0}), ids({1})), Error);
  // Idempotence on the same set.
  CHECK(truncate_renormalize(r, ids({0, 1})) == r);
}

TEST_CASE("spec validation and encoding") {
  CHECK_THROWS_AS(StrategySpec::top_k(0).validate(), Error);
  CHECK_THROWS_AS(StrategySpec::top_p(1.5).validate(), Error);
  CHECK_THROWS_AS(StrategySpec::epsilon(1.0).validate(), Error);
  CHECK_THROWS_AS(StrategySpec::temperature(0.0).validate(), Error);
  CHECK_THROWS_AS((StrategySpec{Family::top_k, 2.5, 1.0}).validate(), Error);
  CHECK(StrategySpec::top_p(0.9, 0.7).encode() == "top_p:0.9@0.7");
  CHECK(StrategySpec::greedy().encode() == "greedy");
  CHECK(StrategySpec::beam(5).encode() == "beam:5");
  for (const char* s : {"top_p:0.9@0.7", "greedy", "beam:5", "eta:0.0003@2", "min_p:0.1",
                        "temperature_only@0.5", "top_k:50"})
    CHECK(StrategySpec::parse(s).encode() == s);
  CHECK_THROWS_AS(StrategySpec::parse("top_k"), Error);
  CHECK_THROWS_AS(StrategySpec::parse("greedy:3"), Error);
  CHECK_THROWS_AS(StrategySpec::parse("nucleus:0.9"), Error);
  CHECK_THROWS_AS(StrategySpec::parse("greedy@0.5"), Error);
  CHECK(StrategySpec::greedy().at_temperature(2.0) == StrategySpec::greedy());
}

TEST_CASE("sample_token examples") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CHECK(sample_token(ProbVector({1, 0, 0}), rng) == TokenId{0});
  }
  Rng a(7), b(7);
  CHECK(sample_token(kDist, a) == sample_token(kDist, b));
  Rng rng(123);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample_token(ProbVector({0.5, 0.5}), rng) == TokenId{0};
  CHECK(zeros >= 49400);
  CHECK(zeros <= 50600);
}

TEST_CASE("candidate-set invariants on random distributions") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t V = 2 + rng.below(31);
    const ProbVector d(oracle::random_dist(rng, V, trial));
    const TokenId arg = greedy_token(d);
    for (const auto& spec : oracle::default_grid_with_temperatures()) {
      const CandidateSet s = select_candidates(d, spec.without_temperature());
      CHECK(std::binary_search(s.begin(), s.end(), arg));
    }
    // Nesting.
    for (std::size_t k = 1; k < V; ++k) {
      const auto small = select_candidates(d, StrategySpec::top_k(k));
      const auto big = select_candidates(d, StrategySpec::top_k(k + 1));
      CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
    for (double p : {0.3, 0.6, 0.9}) {
      const auto small = select_candidates(d, StrategySpec::top_p(p));
      const auto big = select_candidates(d, StrategySpec::top_p(p + 0.05));
      CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
    for (double e : {0.01, 0.05}) {
      const auto small = select_candidates(d, StrategySpec::epsilon(e * 2));
      const auto big = select_candidates(d, StrategySpec::epsilon(e));
      CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
    // Greedy limits with a unique argmax.
    const auto p = d.values();
    if (std::count(p.begin(), p.end(), p[arg.value]) == 1) {
      CHECK(select_candidates(d, StrategySpec::top_k(1)) == CandidateSet{arg});
      CHECK(select_candidates(d, StrategySpec::top_p(p[arg.value])) == CandidateSet{arg});
      CHECK(select_candidates(d, StrategySpec::min_p(1.0)) == CandidateSet{arg});
    }
  }
}

TEST_CASE("select_candidates agrees with the brute-force oracle") {
  Rng rng(77);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t V = 1 + rng.below(64);
    const ProbVector d(oracle::random_dist(rng, V, trial));
    for (const auto& spec0 : oracle::default_grid_with_temperatures()) {
      const StrategySpec spec = spec0.without_temperature();
      const auto got = select_candidates(d, spec);
      const auto want = oracle::brute_candidates(std::vector<double>(d.values().begin(), d.values().end()), spec);
      std::vector<std::uint32_t> g;
      for (TokenId t : got) g.push_back(t.value);
      mismatches += g != want;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("beam search: width 1 equals greedy, myopic trap") {
  auto model = myopic_trap();
  const InstanceRef inst{"toy"};
  Rng rng(0);
  const TokenSeq greedy = rollout(*model, inst, StrategySpec::greedy(), rng, 3);
  const BeamResult b1 = beam_search(*model, inst, 1, 3);
  CHECK(b1.tokens == greedy);
  CHECK_FALSE(b1.truncated);
  const BeamResult b3 = beam_search(*model, inst, 3, 3);
  CHECK(b3.tokens == TokenSeq{TokenId{1}, TokenId{4}, TokenId{5}});
  CHECK(std::exp(b3.log_prob) == doctest::Approx(0.36).epsilon(1e-12));
  CHECK(greedy[0] == TokenId{0});
}

TEST_CASE("beam search tie-break and truncation") {
  // Two equal-score completions: [0, eos] and [1, eos].
  const TokenId eos{2};
  TabularModel::Rows rows;
  rows.emplace(TokenSeq{}, ProbVector({0.5, 0.5, 0.0}));
  rows.emplace(TokenSeq{TokenId{0}}, ProbVector::point_mass(3, eos));
  rows.emplace(TokenSeq{TokenId{1}}, ProbVector::point_mass(3, eos));
  std::map<std::string, TabularModel::Rows> table{{"t", rows}};
  TabularModel m(Vocabulary(3, eos), 2, table);
  CHECK(beam_search(m, {"t"}, 2, 2).tokens == TokenSeq{TokenId{0}, eos});
  const BeamResult cut = beam_search(m, {"t"}, 2, 1);
  CHECK(cut.truncated);
  CHECK(cut.tokens == TokenSeq{TokenId{0}});
}
