#include <doctest.h>

#include <chrono>
#include <cmath>
#include <vector>

#include "nlpn/analytic.hpp"
#include "oracles/oracles.hpp"

using namespace nlpn;

namespace {

struct Setup {
  ScmPlan plan;
  LinkSpec link;
  TensorOptions opt;
};

// Four 8 GBd subcarriers per channel, adjacent-channel interferer 50 GHz away
// from COI subcarrier 0.
Setup small_setup(int n_spans) {
  Setup s{ScmPlan::make(3, 4), LinkSpec{}, TensorOptions{}};
  s.link.n_spans = n_spans;
  return s;
}

std::vector<InteractionTensor> all_subcarriers(const InteractionModel& m, InterfererId intf) {
  std::vector<InteractionTensor> out;
  const int K = m.default_k(intf, m.link().n_spans);
  for (int j = 0; j < m.plan().n_subcarriers; ++j) {
    if (intf == InterfererId{m.plan().coi_index, j}) continue;
    out.push_back(m.tensors_at_spans(j, intf, std::vector<int>{m.link().n_spans}, K).front());
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("dispersed pulse") {
  const auto taps = rrc_taps(0.1, 64, 4);
  const CVec p0 = dispersed_pulse(taps, 4, 8e9, 1024, 0.0, -21.27e-27);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const long long pos = static_cast<long long>(i) - static_cast<long long>(taps.size() / 2);
    CHECK(std::abs(p0[static_cast<std::size_t>((pos + 1024) % 1024)] - taps[i]) < 1e-12);
  }
  for (double z : {1e3, 1e5, 1e6}) {
    const CVec p = dispersed_pulse(taps, 4, 8e9, 1024, z, -21.27e-27);
    double e = 0.0;
    for (const auto& v : p) e += std::norm(v);
    CHECK(std::abs(e - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(dispersed_pulse(taps, 4, 8e9, 1024, -1.0, -21.27e-27), InvalidArgument);

  // Sampled Gaussian against the closed-form broadening.
  const int sps = 16;
  const double baud = 10e9;
  const double fs = baud * sps;
  const double tau0 = 20e-12;
  std::vector<double> g(16 * sps + 1);
  const int mid = static_cast<int>(g.size() / 2);
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    const double t = (i - mid) / fs;
    g[static_cast<std::size_t>(i)] = std::exp(-t * t / (2 * tau0 * tau0));
  }
  const std::size_t n = 4096;
  for (double z : {2e4, 1e5}) {
    const CVec p = dispersed_pulse(g, sps, baud, n, z, -21.27e-27);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(signed_bin(i, n)) / fs;
      err = std::max(err, std::abs(p[i] - oracle::gaussian_dispersed(t, tau0, -21.27e-27, z)));
    }
    CHECK(err < 1e-6);
  }
}

TEST_CASE("Gauss-Legendre on [0, 1]") {
  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre(12, x, w);
  // Exact for polynomials up to degree 23.
  for (int d = 0; d <= 23; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], d);
    CHECK(s == doctest::Approx(1.0 / (d + 1)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(gauss_legendre(0, x, w), InvalidArgument);
}

TEST_CASE("tensor structure") {
  Setup s = small_setup(2);
  const InteractionModel m(s.plan, s.link, s.opt);
  const InterfererId adj{s.plan.coi_index + 1, 0};
  const auto t = m.tensor(0, adj);
  CHECK(t.omega == doctest::Approx(kTwoPi * 50e9));
  CHECK(t.max_abs() > 0.0);
  CHECK(t.hermitian_error() <= 1e-12 * t.max_abs());
  CHECK(t.boundary_ratio() <= 1e-3);

  CHECK_THROWS_AS(m.tensor(1, {s.plan.coi_index, 1}), InvalidArgument);
  CHECK_THROWS_AS(m.tensor(0, {7, 0}), InvalidArgument);
  try {
    (void)m.tensors_at_spans(0, adj, std::vector<int>{2}, 4);
    FAIL("expected a truncation failure");
  } catch (const NumericFailure& e) {
    CHECK(std::string(e.what()).find("required K") != std::string::npos);
  }

  Setup lin = small_setup(2);
  lin.link.fiber.gamma_per_w_km = 0.0;
  const auto zero = InteractionModel(lin.plan, lin.link, lin.opt).tensor(0, adj);
  CHECK(zero.max_abs() == 0.0);

  // Checkpointed accumulation equals separate runs.
  const std::vector<int> spans{1, 2};
  const int K = m.default_k(adj, 2);
  const auto both = m.tensors_at_spans(0, adj, spans, K);
  Setup one = small_setup(1);
  const auto t1 = InteractionModel(one.plan, one.link, one.opt).tensors_at_spans(0, adj, std::vector<int>{1}, K);
  CHECK(oracle::relative_frobenius(both[0], t1[0]) < 1e-12);
  CHECK(oracle::relative_frobenius(both[1], t) < 1e-12);
}

TEST_CASE("fast tensor against brute-force quadrature") {
  for (int spans : {1, 3}) {
    Setup s = small_setup(spans);
    const InteractionModel m(s.plan, s.link, s.opt);
    const InterfererId adj{s.plan.coi_index + 1, 0};
    const int K = m.default_k(adj, spans);
    const auto fast = m.tensors_at_spans(0, adj, std::vector<int>{spans}, K).front();
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = oracle::brute_force_tensor(s.plan, s.link, 0, adj, K, 10 * s.opt.nodes_per_span, 10 * s.opt.sps);
    const double err = oracle::relative_frobenius(fast, ref);
    MESSAGE(spans << " span(s), K=" << K << ": relative Frobenius " << err << " (oracle " << seconds_since(t0) << " s)");
    CHECK(err < 5e-3);
  }
}

TEST_CASE("K doubling leaves S1 unchanged") {
  Setup s = small_setup(3);
  const InteractionModel m(s.plan, s.link, s.opt);
  // Widen the lag window with K; entries outside it are identically zero.
  TensorOptions wide = s.opt;
  wide.pulse_radius *= 2;
  wide.window_radius *= 2;
  const InteractionModel mw(s.plan, s.link, wide);
  for (InterfererId intf : {InterfererId{s.plan.coi_index + 1, 0}, InterfererId{s.plan.coi_index - 1, 3}}) {
    const int K = m.default_k(intf, 3);
    const auto a = m.tensors_at_spans(1, intf, std::vector<int>{3}, K).front();
    const auto b = mw.tensors_at_spans(1, intf, std::vector<int>{3}, 2 * K).front();
    MESSAGE("S1 change " << std::abs(s1_s2(b, b).s1.real() / s1_s2(a, a).s1.real() - 1.0));
    const double s1a = s1_s2(a, a).s1.real();
    const double s1b = s1_s2(b, b).s1.real();
    CHECK(std::abs(s1b / s1a - 1.0) < 1e-3);
  }
}

TEST_CASE("S1 and S2") {
  Setup s = small_setup(2);
  const InteractionModel m(s.plan, s.link, s.opt);
  const InterfererId intf{s.plan.coi_index + 1, 1};
  const auto xs = all_subcarriers(m, intf);
  const auto& a = xs[0];
  const auto& b = xs[2];

  const S1S2 self = s1_s2(a, a);
  CHECK(self.s1.real() > 0.0);
  CHECK(self.s2.real() > 0.0);
  CHECK(std::abs(self.s1.imag()) <= 1e-12 * self.s1.real());
  CHECK(std::abs(self.s2.imag()) <= 1e-12 * self.s2.real());
  CHECK(std::abs(self.s1) >= std::abs(self.s2));

  auto diag_only = [](InteractionTensor t) {
    for (int k = -t.K; k <= t.K; ++k) {
      for (int mm = -t.K; mm <= t.K; ++mm) {
        if (k != mm) t.at(k, mm) = cd{};
      }
    }
    return t;
  };
  const S1S2 cross = s1_s2(a, b);
  const S1S2 masked = s1_s2(diag_only(a), diag_only(b));
  CHECK(std::abs(cross.s2 - masked.s1) <= 1e-14 * std::abs(cross.s2));
  CHECK(std::abs(cross.s2 - masked.s2) <= 1e-14 * std::abs(cross.s2));

  // Conjugate symmetry in the pair.
  const S1S2 rev = s1_s2(b, a);
  CHECK(std::abs(rev.s1 - std::conj(cross.s1)) <= 1e-14 * std::abs(cross.s1));

  const auto other = m.tensor(0, {s.plan.coi_index - 1, 0});
  CHECK_THROWS_AS(s1_s2(a, other), InvalidArgument);
}

TEST_CASE("covariance from sums") {
  Setup s = small_setup(2);
  const InteractionModel m(s.plan, s.link, s.opt);
  const std::vector<int> spans{1, 2};
  const auto sums = nlpn_sums(m, InterfererSet::kAll, spans);
  REQUIRE(sums.size() == 2);
  CHECK(sums[1].n_spans == 2);
  CHECK(sums[1].max_imag_ratio < 1e-6);

  const double p = 1e-3;
  const auto zero = covariance_from_sums(sums[1], 1.381, 0.0);
  CHECK(zero.cov.isZero(0.0));
  CHECK(zero.mean.isZero(0.0));

  // Gaussian statistics leave only S1: 2 polarizations of (P/2)².
  const auto gauss = covariance_from_sums(sums[1], 2.0, p);
  CHECK((gauss.cov - 2.0 * 0.25 * p * p * sums[1].s1).norm() <= 1e-15 * gauss.cov.norm());

  const auto c64 = covariance_from_sums(sums[1], 1.381, p);
  c64.check_invariants();
  const Eigen::MatrixXd r = c64.correlation();
  for (Eigen::Index i = 0; i < r.rows(); ++i) CHECK(r(i, i) == 1.0);
  CHECK(r.maxCoeff() <= 1.0);
  CHECK(r.minCoeff() >= -1.0);

  // Correlation does not depend on power.
  const auto c64b = covariance_from_sums(sums[1], 1.381, 7 * p);
  CHECK((c64b.correlation() - r).cwiseAbs().maxCoeff() < 1e-12);

  // External-only sums are a subset of all interferers.
  const auto ext = nlpn_sums(m, InterfererSet::kExternalOnly, std::vector<int>{2});
  CHECK((ext[0].s1.diagonal().array() < sums[1].s1.diagonal().array()).all());

  // Thread count does not change the reduction.
  const auto threaded = nlpn_sums(m, InterfererSet::kAll, spans, 3);
  CHECK(threaded[1].s1 == sums[1].s1);
  CHECK(threaded[1].s2 == sums[1].s2);
}

TEST_CASE("interferer enumeration") {
  const ScmPlan plan = ScmPlan::make(3, 4);
  CHECK(interferers(plan, InterfererSet::kAll).size() == 12);
  CHECK(interferers(plan, InterfererSet::kExternalOnly).size() == 8);
}

TEST_CASE("Monte-Carlo realization of the phase sum") {
  Setup s = small_setup(1);
  s.opt.pulse_radius = 12;
  s.opt.window_radius = 12;
  const InteractionModel m(s.plan, s.link, s.opt);
  const auto xs = all_subcarriers(m, {s.plan.coi_index + 1, 2});

  const auto c = build_qam(64);
  const double p = 1e-3;
  const auto mc = mc_oracle(xs, c, p, 50000, 3);
  CHECK(mc.max_imag < 1e-10);
  mc.cov.check_invariants();

  // P -> 2P: the phase is quadratic in the field, the covariance quadratic in the phase.
  const auto mc2 = mc_oracle(xs, c, 2 * p, 50000, 3);
  CHECK((mc2.cov.cov - 4.0 * mc.cov.cov).norm() <= 1e-12 * mc2.cov.cov.norm());
  CHECK((mc2.cov.mean - 2.0 * mc.cov.mean).norm() <= 1e-12 * mc2.cov.mean.norm());

  // Common complex scale leaves the correlation unchanged.
  auto scaled = xs;
  for (auto& t : scaled) {
    for (auto& v : t.x) v *= cd(0.0, 3.0);
  }
  const auto a = scalar_covariance(xs, kurtosis(c), p);
  const auto b = scalar_covariance(scaled, kurtosis(c), p);
  CHECK((a.correlation() - b.correlation()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((b.cov - 9.0 * a.cov).norm() <= 1e-12 * b.cov.norm());

  // Constant modulus, diagonal-only tensor: the phase is constant.
  auto diag = xs;
  for (auto& t : diag) {
    for (int k = -t.K; k <= t.K; ++k) {
      for (int mm = -t.K; mm <= t.K; ++mm) {
        if (k != mm) t.at(k, mm) = cd{};
      }
    }
  }
  const auto qpsk = build_qam(4);
  const auto flat = mc_oracle(diag, qpsk, p, 2000, 1);
  CHECK(flat.cov.cov.cwiseAbs().maxCoeff() < 1e-24);
  CHECK(std::abs(flat.cov.mean(0) - scalar_covariance(diag, 1.0, p).mean(0)) < 1e-12);
}

TEST_CASE("scalar covariance matches Monte-Carlo for three kurtosis values") {
  Setup s = small_setup(1);
  const InteractionModel m(s.plan, s.link, s.opt);
  const auto xs = all_subcarriers(m, {s.plan.coi_index + 1, 0});
  const double p = 1e-3;
  const Constellation cs[] = {build_qam(4), build_qam(64), shape_mb(build_qam(64), 5.0)};
  for (const auto& c : cs) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto mc = mc_oracle(xs, c, p, 1000000, 17);
    const auto an = scalar_covariance(xs, kurtosis(c), p);
    double var_err = 0.0;
    for (Eigen::Index i = 0; i < an.cov.rows(); ++i) {
      var_err = std::max(var_err, std::abs(mc.cov.cov(i, i) / an.cov(i, i) - 1.0));
    }
    const double corr_err = (mc.cov.correlation() - an.correlation()).cwiseAbs().maxCoeff();
    MESSAGE(c.label() << " M=" << kurtosis(c) << ": var err " << var_err << ", corr err " << corr_err << " ("
                      << seconds_since(t0) << " s)");
    CHECK(var_err < 0.02);
    CHECK(corr_err < 0.02);
    CHECK((mc.cov.mean - an.mean).cwiseAbs().maxCoeff() < 0.02 * an.mean.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("edge subcarriers stay correlated over 10 spans") {
  // 5 channels, 8 subcarriers, unshaped 64-QAM.
  const ScmPlan plan = ScmPlan::make(5, 8);
  LinkSpec link;
  link.n_spans = 10;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cov = nlpn_covariance(plan, link, build_qam(64), 1e-3 / 8);
  const auto r = cov.correlation();
  MESSAGE("corr(1,2)=" << r(0, 1) << " corr(1,8)=" << r(0, 7) << " (" << seconds_since(t0) << " s)");
  CHECK(r(0, 7) >= 0.3);
  for (int j = 1; j < 8; ++j) CHECK(r(0, j) <= r(0, j - 1) + 1e-12);
}

TEST_CASE("correlation is insensitive to mild roll-off changes") {
  LinkSpec link;
  link.n_spans = 3;
  const auto c = build_qam(64);
  const Eigen::MatrixXd ref = nlpn_covariance(ScmPlan::make(3, 4, 0.1), link, c, 1e-3 / 4).correlation();
  for (double beta : {0.05, 0.2}) {
    const Eigen::MatrixXd r = nlpn_covariance(ScmPlan::make(3, 4, beta), link, c, 1e-3 / 4).correlation();
    const double d = (r - ref).cwiseAbs().maxCoeff();
    MESSAGE("roll-off " << beta << ": max correlation change " << d);
    CHECK(d < 0.02);
  }
}
