#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlpn/common.hpp"

namespace nlpn {

/// Discrete 2-D signal set with a probability law. Always normalized to unit
/// average power; launch power is applied downstream as a scalar.
class Constellation {
 public:
  /// Builds from arbitrary distinct points. Probabilities are renormalized
  /// and the points rescaled to unit average power.
  static Constellation from_points(std::vector<cd> points, std::vector<double> probs,
                                   std::string label);

  const std::vector<cd>& points() const { return points_; }
  const std::vector<double>& probs() const { return probs_; }
  /// Gray bit labels (empty for constellations without a bit mapping).
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  const std::string& label() const { return label_; }
  std::size_t size() const { return points_.size(); }
  int bits_per_symbol() const { return bits_per_symbol_; }

  /// For square-QAM geometry: levels per rail and the spacing scale so that
  /// rail value v maps to (2*i - (levels-1)) * grid_scale(). Zero otherwise.
  int rail_levels() const { return rail_levels_; }
  double grid_scale() const { return grid_scale_; }

  /// Index of the nearest point (minimum Euclidean distance).
  std::size_t decide(cd y) const;

 private:
  friend Constellation build_qam(int order);
  friend Constellation shape_mb(const Constellation& base, double target_entropy_bits);

  Constellation() = default;
  void normalize_and_check();

  std::vector<cd> points_;
  std::vector<double> probs_;
  std::vector<std::uint32_t> labels_;
  std::string label_;
  int bits_per_symbol_ = 0;
  int rail_levels_ = 0;
  double grid_scale_ = 0.0;
};

/// Square QAM with uniform probabilities and reflected-Gray labels per rail.
/// Supported orders: 4, 16, 64, 256.
Constellation build_qam(int order);

/// Maxwell-Boltzmann shaping of a uniform base: probs ∝ exp(-λ|x|²) with λ
/// found by bisection so the entropy matches the target within 1e-6 bit.
Constellation shape_mb(const Constellation& base, double target_entropy_bits);

/// Normalized kurtosis E|b|⁴ / (E|b|²)².
double kurtosis(const Constellation& c);

/// Shannon entropy in bits per 2-D symbol.
double entropy(const Constellation& c);

/// Average power Σ p|x|².
double mean_power(const Constellation& c);

/// Transmitted symbols for every subcarrier and polarization of one channel.
struct SymbolFrame {
  std::size_t n_subcarriers = 0;
  std::size_t n_symbols = 0;
  double baud = 0.0;
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  /// Flattened [subcarrier][polarization][time] point indices.
  std::vector<std::uint16_t> indices;
  /// Matching complex values (amplitude * point).
  std::vector<cd> symbols;

  std::size_t offset(std::size_t sc, int pol) const {
    return (sc * 2 + static_cast<std::size_t>(pol)) * n_symbols;
  }
  std::span<const cd> stream(std::size_t sc, int pol) const {
    return {symbols.data() + offset(sc, pol), n_symbols};
  }
  std::span<const std::uint16_t> index_stream(std::size_t sc, int pol) const {
    return {indices.data() + offset(sc, pol), n_symbols};
  }
};

/// I.i.d. draws per the constellation law. Each (subcarrier, polarization)
/// uses its own substream derived from (seed, subcarrier, polarization).
SymbolFrame draw_symbols(const Constellation& c, std::size_t n_subcarriers, std::size_t n_symbols,
                         std::uint64_t seed, double baud = 0.0);

}  // namespace nlpn
