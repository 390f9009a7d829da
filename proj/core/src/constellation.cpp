#include "nlpn/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace nlpn {
namespace {

constexpr double kSimplexTol = 1e-12;

double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

// probs ∝ exp(-λ e_i); energies are shifted by their minimum for stability.
std::vector<double> boltzmann(std::span<const double> energy, double lambda) {
  const double emin = *std::min_element(energy.begin(), energy.end());
  std::vector<double> p(energy.size());
  double z = 0.0;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    p[i] = std::exp(-lambda * (energy[i] - emin));
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::uint32_t gray(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace

Constellation Constellation::from_points(std::vector<cd> points, std::vector<double> probs,
                                         std::string label) {
  if (points.empty() || points.size() != probs.size()) {
    throw InvalidArgument("constellation: points/probs size mismatch");
  }
  Constellation c;
  c.points_ = std::move(points);
  c.probs_ = std::move(probs);
  c.label_ = std::move(label);
  c.normalize_and_check();
  return c;
}

void Constellation::normalize_and_check() {
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("constellation: negative probability");
    total += p;
  }
  if (total <= 0.0) throw InvalidArgument("constellation: probabilities sum to zero");
  for (auto& p : probs_) p /= total;

  double power = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) power += probs_[i] * std::norm(points_[i]);
  if (power > 0.0) {
    const double s = 1.0 / std::sqrt(power);
    for (auto& x : points_) x *= s;
    grid_scale_ *= s;
  }

  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if (points_[i] == points_[j]) throw InvalidArgument("constellation: duplicate points");
    }
  }
  const double psum = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (std::abs(psum - 1.0) > kSimplexTol) throw NumericFailure("constellation: simplex violated");
  if (power > 0.0 && std::abs(mean_power(*this) - 1.0) > kSimplexTol) {
    throw NumericFailure("constellation: unit power violated");
  }
}

std::size_t Constellation::decide(cd y) const {
  if (rail_levels_ > 0) {
    const int m = rail_levels_;
    auto rail = [&](double v) {
      const double u = (v / grid_scale_ + (m - 1)) / 2.0;
      return std::clamp(static_cast<int>(std::lround(u)), 0, m - 1);
    };
    return static_cast<std::size_t>(rail(y.real()) * m + rail(y.imag()));
  }
  std::size_t best = 0;
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = std::norm(y - points_[i]);
    if (d < dmin) {
      dmin = d;
      best = i;
    }
  }
  return best;
}

Constellation build_qam(int order) {
  int m = 0;
  switch (order) {
    case 4: m = 2; break;
    case 16: m = 4; break;
    case 64: m = 8; break;
    case 256: m = 16; break;
    default: throw InvalidArgument("build_qam: unsupported order " + std::to_string(order));
  }
  const int bits_rail = static_cast<int>(std::lround(std::log2(m)));
  Constellation c;
  c.label_ = std::to_string(order) + "QAM";
  c.bits_per_symbol_ = 2 * bits_rail;
  c.rail_levels_ = m;
  c.grid_scale_ = 1.0;
  // Point index = iI * m + iQ.
  for (int i = 0; i < m; ++i) {
    for (int q = 0; q < m; ++q) {
      c.points_.emplace_back(2.0 * i - (m - 1), 2.0 * q - (m - 1));
      c.labels_.push_back((gray(static_cast<std::uint32_t>(i)) << bits_rail) |
                          gray(static_cast<std::uint32_t>(q)));
    }
  }
  c.probs_.assign(c.points_.size(), 1.0 / static_cast<double>(c.points_.size()));
  c.normalize_and_check();
  return c;
}

Constellation shape_mb(const Constellation& base, double target_entropy_bits) {
  const double hmax = std::log2(static_cast<double>(base.size()));
  if (!(target_entropy_bits > 0.0) || target_entropy_bits > hmax + 1e-12) {
    throw InvalidArgument("shape_mb: target entropy outside (0, log2|X|]");
  }
  for (double p : base.probs()) {
    if (std::abs(p - base.probs().front()) > 1e-12) {
      throw InvalidArgument("shape_mb: base constellation must be uniform");
    }
  }

  std::vector<double> energy;
  energy.reserve(base.size());
  for (const auto& x : base.points()) energy.push_back(std::norm(x));

  Constellation out = base;
  out.label_ = base.label() + "-MB" + std::to_string(target_entropy_bits).substr(0, 4);
  constexpr double kTol = 1e-9;
  if (target_entropy_bits >= hmax - kTol) {
    out.probs_ = boltzmann(energy, 0.0);
    out.normalize_and_check();
    return out;
  }

  auto h_at = [&](double lambda) { return entropy_of(boltzmann(energy, lambda)); };
  double lo = 0.0;
  double hi = 1.0;
  int grow = 0;
  while (h_at(hi) >= target_entropy_bits) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 200) throw NumericFailure("shape_mb: could not bracket the entropy target");
  }
  double lambda = 0.5 * (lo + hi);
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    lambda = 0.5 * (lo + hi);
    const double h = h_at(lambda);
    if (std::abs(h - target_entropy_bits) < kTol) {
      converged = true;
      break;
    }
    (h > target_entropy_bits ? lo : hi) = lambda;
  }
  if (!converged) throw NumericFailure("shape_mb: bisection did not converge in 200 steps");

  out.probs_ = boltzmann(energy, lambda);
  out.normalize_and_check();
  return out;
}

double mean_power(const Constellation& c) {
  double p = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) p += c.probs()[i] * std::norm(c.points()[i]);
  return p;
}

double kurtosis(const Constellation& c) {
  double m2 = 0.0;
  double m4 = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double e = std::norm(c.points()[i]);
    m2 += c.probs()[i] * e;
    m4 += c.probs()[i] * e * e;
  }
  return m4 / (m2 * m2);
}

double entropy(const Constellation& c) { return entropy_of(c.probs()); }

SymbolFrame draw_symbols(const Constellation& c, std::size_t n_subcarriers, std::size_t n_symbols,
                         std::uint64_t seed, double baud) {
  if (n_symbols < 1) throw InvalidArgument("draw_symbols: n_symbols must be >= 1");
  if (c.size() > 65536) throw InvalidArgument("draw_symbols: constellation too large");

  std::vector<double> cdf(c.size());
  std::partial_sum(c.probs().begin(), c.probs().end(), cdf.begin());
  cdf.back() = 1.0;

  SymbolFrame f;
  f.n_subcarriers = n_subcarriers;
  f.n_symbols = n_symbols;
  f.baud = baud;
  f.seed = seed;
  f.indices.resize(n_subcarriers * 2 * n_symbols);
  f.symbols.resize(f.indices.size());
  for (std::size_t sc = 0; sc < n_subcarriers; ++sc) {
    for (int pol = 0; pol < 2; ++pol) {
      std::mt19937_64 rng(derive_seed(seed, sc, static_cast<std::uint64_t>(pol)));
      const std::size_t off = f.offset(sc, pol);
      for (std::size_t n = 0; n < n_symbols; ++n) {
        // 53-bit uniform in [0,1); independent of the library's distributions.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const auto idx = static_cast<std::size_t>(
            std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const auto k = std::min(idx, c.size() - 1);
        f.indices[off + n] = static_cast<std::uint16_t>(k);
        f.symbols[off + n] = c.points()[k];
      }
    }
  }
  return f;
}

}  // namespace nlpn
