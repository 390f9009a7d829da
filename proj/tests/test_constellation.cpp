#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "nlpn/constellation.hpp"

using namespace nlpn;

namespace {

void check_normalized(const Constellation& c) {
  const double psum = std::accumulate(c.probs().begin(), c.probs().end(), 0.0);
  CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
  for (double p : c.probs()) CHECK(p >= 0.0);
  CHECK(mean_power(c) == doctest::Approx(1.0).epsilon(1e-12));
}

// Fourth/second moments of the square lattice computed from integer levels.
double lattice_kurtosis(int m) {
  double m2 = 0;
  double m4 = 0;
  for (int i = 0; i < m; ++i) {
    for (int q = 0; q < m; ++q) {
      const double e = std::pow(2 * i - m + 1, 2) + std::pow(2 * q - m + 1, 2);
      m2 += e;
      m4 += e * e;
    }
  }
  const double n = m * m;
  return (m4 / n) / std::pow(m2 / n, 2);
}

}  // namespace

TEST_CASE("qpsk geometry") {
  const auto c = build_qam(4);
  REQUIRE(c.size() == 4);
  for (const auto& p : c.points()) {
    CHECK(std::abs(std::abs(p.real()) - 1 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(std::abs(p.imag()) - 1 / std::sqrt(2.0)) < 1e-15);
  }
  for (double p : c.probs()) CHECK(p == 0.25);
  CHECK(kurtosis(c) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("unsupported orders are rejected") {
  CHECK_THROWS_AS(build_qam(5), InvalidArgument);
  CHECK_THROWS_AS(build_qam(32), InvalidArgument);
}

TEST_CASE("square qam moments") {
  for (int order : {4, 16, 64, 256}) {
    const auto c = build_qam(order);
    check_normalized(c);
    const int m = static_cast<int>(std::lround(std::sqrt(order)));
    CHECK(kurtosis(c) == doctest::Approx(lattice_kurtosis(m)).epsilon(1e-12));
    CHECK(entropy(c) == doctest::Approx(std::log2(order)).epsilon(1e-12));
  }
  CHECK(std::abs(kurtosis(build_qam(64)) - 1.3810) < 1e-4);
}

TEST_CASE("gray labels differ in one bit between rail neighbours") {
  const auto c = build_qam(64);
  const double step = 2.0 * c.grid_scale() / std::sqrt(42.0);
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = 0; b < c.size(); ++b) {
      const double d = std::abs(c.points()[a] - c.points()[b]);
      if (std::abs(d - step) < 1e-9) CHECK(std::popcount(c.labels()[a] ^ c.labels()[b]) == 1);
    }
  }
  std::vector<std::uint32_t> sorted = c.labels();
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("decisions match brute-force nearest point") {
  const auto c = build_qam(64);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.8);
  for (int i = 0; i < 20000; ++i) {
    const cd y(n(rng), n(rng));
    std::size_t best = 0;
    for (std::size_t k = 1; k < c.size(); ++k) {
      if (std::norm(y - c.points()[k]) < std::norm(y - c.points()[best])) best = k;
    }
    CHECK(c.decide(y) == best);
  }
}

TEST_CASE("maxwell-boltzmann shaping") {
  const auto base = build_qam(64);
  const auto full = shape_mb(base, 6.0);
  for (double p : full.probs()) CHECK(p == doctest::Approx(1.0 / 64).epsilon(1e-12));

  const auto s5 = shape_mb(base, 5.0);
  check_normalized(s5);
  CHECK(std::abs(entropy(s5) - 5.0) < 1e-6);
  CHECK(std::abs(kurtosis(s5) - 1.89) <= 0.02);

  double prev = 0.0;
  for (double h : {6.0, 5.5, 5.0, 4.5}) {
    const auto s = shape_mb(base, h);
    CHECK(std::abs(entropy(s) - h) < 1e-6);
    CHECK(kurtosis(s) >= prev - 1e-12);
    prev = kurtosis(s);
  }
  CHECK_THROWS_AS(shape_mb(base, 7.0), InvalidArgument);
  CHECK_THROWS_AS(shape_mb(base, 0.0), InvalidArgument);
  CHECK_THROWS_AS(shape_mb(s5, 4.0), InvalidArgument);
}

TEST_CASE("from_points validates") {
  CHECK_THROWS_AS(Constellation::from_points({{1, 0}, {1, 0}}, {0.5, 0.5}, "dup"), InvalidArgument);
  const auto c = Constellation::from_points({{2, 0}}, {3.0}, "one");
  CHECK(entropy(c) == 0.0);
  check_normalized(c);
}

TEST_CASE("symbol draws are deterministic") {
  const auto c = build_qam(4);
  const auto a = draw_symbols(c, 1, 10, 42);
  const auto b = draw_symbols(c, 1, 10, 42);
  CHECK(a.indices == b.indices);
  CHECK(a.symbols == b.symbols);
  const auto d = draw_symbols(c, 1, 10, 43);
  CHECK(a.indices != d.indices);
}

TEST_CASE("symbol statistics") {
  const auto u = build_qam(64);
  const auto f = draw_symbols(u, 1, 1000000, 9);
  double p = 0.0;
  for (auto v : f.stream(0, 0)) p += std::norm(v);
  CHECK(std::abs(p / 1e6 - 1.0) < 0.01);

  // Multinomial frequencies of a shaped law within 3 sigma.
  const auto s = shape_mb(u, 5.0);
  const std::size_t n = 400000;
  const auto g = draw_symbols(s, 1, n, 11);
  std::vector<double> count(s.size(), 0.0);
  for (auto i : g.index_stream(0, 1)) count[i] += 1.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double pk = s.probs()[k];
    const double sigma = std::sqrt(n * pk * (1 - pk));
    CHECK(std::abs(count[k] - n * pk) <= 3.0 * sigma + 1.0);
  }

  // Substreams are uncorrelated.
  const auto h = draw_symbols(u, 2, 100000, 5);
  cd cross{};
  for (std::size_t i = 0; i < 100000; ++i) cross += h.stream(0, 0)[i] * std::conj(h.stream(1, 1)[i]);
  CHECK(std::abs(cross) / 100000 < 0.02);
}
