#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nlpn/equalize.hpp"
#include "oracles/oracles.hpp"

using namespace nlpn;

namespace {

// Frame of `ns` subcarriers where s = a·e^{iθ} + AWGN, θ from `phase(j, p, k)`.
template <class Phase>
RxSymbols synthetic(const Constellation& c, std::size_t ns, std::size_t n, double snr_db, std::uint64_t seed,
                    Phase phase) {
  const SymbolFrame f = draw_symbols(c, ns, n, seed);
  RxSymbols rx;
  rx.n_subcarriers = ns;
  rx.n_symbols = n;
  rx.a = f.symbols;
  rx.tx_index = f.indices;
  rx.s.resize(rx.a.size());
  rx.gain_applied.assign(ns * 2, cd{1.0, 0.0});
  std::mt19937_64 rng(derive_seed(seed, 77));
  const double sigma = std::sqrt(0.5 / db_to_lin(snr_db));
  std::normal_distribution<double> g(0.0, sigma);
  for (std::size_t j = 0; j < ns; ++j) {
    for (int p = 0; p < 2; ++p) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = rx.offset(j, p) + k;
        const double re = g(rng);
        const double im = g(rng);
        rx.s[i] = rx.a[i] * std::polar(1.0, phase(j, p, k)) + cd(re, im);
      }
    }
  }
  return rx;
}

std::vector<double> random_walk(std::size_t n, double step, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, step);
  std::vector<double> w(n);
  double acc = 0.0;
  for (auto& v : w) v = (acc += g(rng));
  return w;
}

const std::vector<double> kLambdas{0.8, 0.9, 0.95, 0.98, 0.99, 0.995};

}  // namespace

TEST_CASE("RLS phase estimate") {
  const auto c = build_qam(16);
  const auto f = draw_symbols(c, 1, 2000, 1);
  const auto a = f.stream(0, 0);

  RlsPhaseState cold;
  CHECK(cold.phase() == 0.0);
  CHECK(cold.magnitude() == 1.0);

  const double phi0 = 0.3;
  RlsPhaseState st{.lambda = 0.95};
  double est = 0.0;
  for (std::size_t k = 0; k < 100; ++k) est = rls_phase_step(st, a[k] * std::polar(1.0, phi0), a[k]);
  CHECK(std::abs(est - phi0) < 1e-6);
  CHECK(st.magnitude() == doctest::Approx(1.0).epsilon(1e-12));

  // λ = 1 is the batch least-squares solution over the whole history.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<cd> s(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) s[k] = a[k] * std::polar(1.0, 0.2 + g(rng)) + cd(g(rng), g(rng));
  RlsPhaseState batch{.lambda = 1.0};
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double e = rls_phase_step(batch, s[k], a[k]);
    worst = std::max(worst, std::abs(e - oracle::batch_ls_phase(s, a, k + 1)));
  }
  CHECK(worst < 1e-12);

  // Nearly memoryless: follows an alternating rotation symbol by symbol.
  RlsPhaseState fast{.lambda = 1e-9};
  for (std::size_t k = 0; k < 50; ++k) {
    const double phi = (k % 2 ? -1.0 : 1.0) * 0.2;
    CHECK(rls_phase_step(fast, a[k] * std::polar(1.0, phi), a[k]) == doctest::Approx(phi).epsilon(1e-6));
  }

  RlsPhaseState bad{.lambda = 1.5};
  CHECK_THROWS_AS(rls_phase_step(bad, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("joint combination") {
  const std::vector<double> same(8, 0.123);
  CHECK(joint_combine(same) == doctest::Approx(0.123).epsilon(1e-14));
  const std::vector<double> pm{0.2, -0.2};
  CHECK(std::abs(joint_combine(pm)) < 1e-15);
  const std::vector<double> opposite{0.0, kPi};
  CHECK(joint_combine(opposite, 0.7) == 0.7);
  const std::vector<double> one{2.9};
  CHECK(joint_combine(one) == 2.9);
  const std::vector<double> small{0.01, 0.03, -0.02, 0.05};
  CHECK(joint_combine(small) == doctest::Approx(0.0175).epsilon(1e-3));
  CHECK_THROWS_AS(joint_combine(std::vector<double>{}), InvalidArgument);

  // Averaging N i.i.d. estimates divides the variance by N.
  const int ns = 8;
  const double sigma = 0.05;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> phi(ns);
  double acc = 0.0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    for (auto& p : phi) p = 0.4 + g(rng);
    const double d = joint_combine(phi) - 0.4;
    acc += d * d;
  }
  const double ratio = (acc / trials) / (sigma * sigma / ns);
  MESSAGE("variance ratio " << ratio);
  CHECK(std::abs(ratio - 1.0) < 0.1);
}

TEST_CASE("modes") {
  for (EqMode m : {EqMode::kNone, EqMode::kIndividual, EqMode::kJoint}) CHECK(parse_eq_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_eq_mode("both"), InvalidArgument);
}

TEST_CASE("equalizer is neutral on a clean frame") {
  const auto c = build_qam(64);
  const RxSymbols rx = synthetic(c, 4, 3000, 1000.0, 2, [](std::size_t, int, std::size_t) { return 0.0; });
  for (EqMode m : {EqMode::kNone, EqMode::kIndividual, EqMode::kJoint}) {
    const auto r = equalize_frame(rx, c, {0.99, m, 500});
    double d = 0.0;
    for (std::size_t i = 0; i < rx.s.size(); ++i) d = std::max(d, std::abs(r.corrected.s[i] - rx.s[i]));
    CHECK(d < 1e-9);
    CHECK(r.metrics.bit_errors == 0);
    CHECK(r.metrics.symbols == 4 * 2 * 2500);
    CHECK(r.decided == rx.tx_index);
  }
}

TEST_CASE("the correction uses past symbols only") {
  const auto c = build_qam(16);
  const std::size_t jump = 700;
  const RxSymbols rx = synthetic(c, 1, 1000, 1000.0, 4, [&](std::size_t, int, std::size_t k) { return k < jump ? 0.0 : 0.25; });
  const auto r = equalize_frame(rx, c, {1e-9, EqMode::kIndividual, 500});
  const std::size_t i = rx.offset(0, 0) + jump;
  CHECK(std::abs(std::arg(r.corrected.s[i] / rx.a[i]) - 0.25) < 1e-6);
  CHECK(std::abs(std::arg(r.corrected.s[i + 1] / rx.a[i + 1])) < 1e-6);
}

TEST_CASE("single subcarrier: joint equals individual") {
  const auto c = build_qam(64);
  const auto walk = random_walk(20000, 0.01, 8);
  const RxSymbols rx = synthetic(c, 1, 20000, 22.0, 6, [&](std::size_t, int, std::size_t k) { return walk[k]; });
  const auto a = equalize_frame(rx, c, {0.95, EqMode::kIndividual, 500});
  const auto b = equalize_frame(rx, c, {0.95, EqMode::kJoint, 500});
  CHECK(a.corrected.s == b.corrected.s);
  CHECK(a.metrics.q_db == b.metrics.q_db);
}

TEST_CASE("common phase walk favours joint estimation") {
  const auto c = build_qam(64);
  const std::size_t n = 20000;
  const auto walk = random_walk(n, 0.006, 11);
  const RxSymbols rx = synthetic(c, 8, n, 24.0, 12, [&](std::size_t, int, std::size_t k) { return walk[k]; });
  const auto none = equalize_frame(rx, c, {0.99, EqMode::kNone, 500});
  const auto ind = sweep_forgetting(rx, c, kLambdas, EqMode::kIndividual);
  const auto joint = sweep_forgetting(rx, c, kLambdas, EqMode::kJoint);
  MESSAGE("none " << none.metrics.q_db << ", individual " << ind.best.q_db << " @" << ind.best_lambda << ", joint "
                  << joint.best.q_db << " @" << joint.best_lambda);
  CHECK(ind.best.q_db > none.metrics.q_db);
  CHECK(joint.best.q_db >= ind.best.q_db);
  CHECK(joint.best_lambda >= ind.best_lambda);
}

TEST_CASE("independent phase walks penalize joint estimation") {
  const auto c = build_qam(64);
  const std::size_t n = 20000;
  std::vector<std::vector<double>> walks;
  for (std::uint64_t j = 0; j < 16; ++j) walks.push_back(random_walk(n, 0.006, 100 + j));
  const RxSymbols rx = synthetic(c, 8, n, 24.0, 13, [&](std::size_t j, int p, std::size_t k) {
    return walks[j * 2 + static_cast<std::size_t>(p)][k];
  });
  const auto ind = sweep_forgetting(rx, c, kLambdas, EqMode::kIndividual);
  const auto joint = sweep_forgetting(rx, c, kLambdas, EqMode::kJoint);
  MESSAGE("individual " << ind.best.q_db << ", joint " << joint.best.q_db);
  CHECK(joint.best.q_db <= ind.best.q_db);
}

TEST_CASE("forgetting-factor sweep") {
  const auto c = build_qam(64);
  const RxSymbols awgn = synthetic(c, 4, 20000, 19.0, 21, [](std::size_t, int, std::size_t) { return 0.0; });
  const std::vector<double> single{0.97};
  const auto one = sweep_forgetting(awgn, c, single, EqMode::kIndividual);
  CHECK(one.best_lambda == 0.97);
  CHECK(one.curve.size() == 1);

  const auto all = sweep_forgetting(awgn, c, kLambdas, EqMode::kIndividual);
  CHECK(all.best_lambda == kLambdas.back());
  REQUIRE(all.curve.size() == kLambdas.size());
  for (std::size_t i = 0; i < kLambdas.size(); ++i) CHECK(all.curve[i].lambda == kLambdas[i]);

  // Ties go to the larger λ: equal grid points give identical Q.
  const std::vector<double> dup{0.99, 0.99};
  CHECK(sweep_forgetting(awgn, c, dup, EqMode::kJoint).best_lambda == 0.99);
  CHECK_THROWS_AS(sweep_forgetting(awgn, c, std::vector<double>{}, EqMode::kJoint), InvalidArgument);
}

TEST_CASE("report peak") {
  const auto r = make_report(EqMode::kJoint, {-1, 0, 1, 2}, {7.0, 8.5, 8.1, 6.0}, {0.9, 0.9, 0.95, 0.99});
  CHECK(r.peak_q_db == 8.5);
  CHECK(r.peak_power_dbm == 0.0);
  CHECK_THROWS_AS(make_report(EqMode::kNone, {0}, {1, 2}, {0, 0}), InvalidArgument);
}
