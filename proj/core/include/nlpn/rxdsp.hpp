#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nlpn/channel.hpp"
#include "nlpn/constellation.hpp"
#include "nlpn/covariance.hpp"
#include "nlpn/signal.hpp"

namespace nlpn {

/// Symbols excluded at each end of a cyclic frame before any statistic.
inline constexpr std::size_t kBoundarySymbols = 512;

/// One demultiplexed subcarrier, one sample per symbol per polarization.
struct SubcarrierStream {
  std::vector<cd> x;
  std::vector<cd> y;
};

/// Gain-aligned received symbols with their transmitted counterparts,
/// indexed [subcarrier][polarization][symbol].
struct RxSymbols {
  std::size_t n_subcarriers = 0;
  std::size_t n_symbols = 0;
  std::vector<cd> s;
  std::vector<cd> a;
  std::vector<std::uint16_t> tx_index;
  /// Least-squares complex gain applied per [subcarrier][polarization].
  std::vector<cd> gain_applied;

  std::size_t offset(std::size_t sc, int pol) const {
    return (sc * 2 + static_cast<std::size_t>(pol)) * n_symbols;
  }
  std::span<cd> s_stream(std::size_t sc, int pol) { return {s.data() + offset(sc, pol), n_symbols}; }
  std::span<const cd> s_stream(std::size_t sc, int pol) const {
    return {s.data() + offset(sc, pol), n_symbols};
  }
  std::span<const cd> a_stream(std::size_t sc, int pol) const {
    return {a.data() + offset(sc, pol), n_symbols};
  }
  std::span<const std::uint16_t> index_stream(std::size_t sc, int pol) const {
    return {tx_index.data() + offset(sc, pol), n_symbols};
  }
};

/// NLPN estimates φ̃ indexed [subcarrier][polarization][symbol].
struct PhaseTrace {
  std::size_t n_subcarriers = 0;
  std::size_t n_symbols = 0;
  std::vector<double> phi;
  /// Symbols whose reference a_n was zero (left at 0 rad).
  std::size_t skipped = 0;
  std::vector<std::string> meta;

  std::size_t offset(std::size_t sc, int pol) const {
    return (sc * 2 + static_cast<std::size_t>(pol)) * n_symbols;
  }
  std::span<const double> stream(std::size_t sc, int pol) const {
    return {phi.data() + offset(sc, pol), n_symbols};
  }
};

/// Removes the accumulated dispersion of the whole link.
Waveform cd_compensate(Waveform w, const LinkSpec& link);

/// Shifts subcarrier j of `channel` (COI by default) to baseband, applies
/// the matched RRC filter and samples at the symbol instants. Output is
/// divided by the transmit amplitude so symbols are on the unit-power scale.
SubcarrierStream demux(const Waveform& w, const ScmPlan& plan, int subcarrier, int channel = -1);

/// All subcarriers of one channel, sharing one transform of the field.
std::vector<SubcarrierStream> demux_all(const Waveform& w, const ScmPlan& plan, int channel = -1);

/// Least-squares complex scalar g minimizing Σ|g·s - a|².
cd ls_gain(std::span<const cd> s, std::span<const cd> a);

/// Trims `trim` symbols at each end, then applies the least-squares gain per
/// subcarrier and polarization.
RxSymbols normalize_gain(std::span<const SubcarrierStream> streams, const SymbolFrame& tx,
                         std::size_t trim = kBoundarySymbols);

/// φ̃_n = Im[(s_n - a_n) / a_n].
PhaseTrace extract_nlpn(const RxSymbols& rx);

struct EmpiricalCovOptions {
  std::size_t block = 1024;
  int bootstrap_replicates = 200;
  std::uint64_t seed = 7;
  std::size_t min_symbols = 10000;
};

/// Sample covariance across symbols, per polarization then averaged over
/// polarizations; correlation standard errors via block bootstrap.
CovarianceMatrix empirical_cov(const PhaseTrace& traces, const EmpiricalCovOptions& opt = {});

struct QualityMetrics {
  double ber = 0.0;
  double q_db = 0.0;
  double evm_db = 0.0;
  std::size_t bit_errors = 0;
  std::size_t bits = 0;
  /// No bit errors were counted: q_db comes from the EVM-derived SNR.
  bool lower_bound = false;
  /// Σ|y - a|² and Σ|a|², kept so metrics can be pooled.
  double error_energy = 0.0;
  double reference_energy = 0.0;
  std::size_t symbols = 0;
};

/// Q in dB from a bit error ratio: 20·log10(√2·erfc⁻¹(2·BER)); -inf at 0.5.
double q_from_ber(double ber);

/// Gray-coded square-QAM BER at the given SNR (nearest-neighbour form).
double qam_ber_from_snr(int order, double snr_lin);

/// Counts bit errors between transmitted and decided point indices and
/// measures EVM of `y` against `a`.
QualityMetrics ber_q(std::span<const std::uint16_t> tx_index, std::span<const std::uint16_t> rx_index,
                     const Constellation& c, std::span<const cd> y, std::span<const cd> a);

/// Pools bit counts and EVM energies of several streams, then recomputes Q.
QualityMetrics combine_metrics(std::span<const QualityMetrics> parts, const Constellation& c);

/// Q from pooled counts (falls back to the EVM-derived SNR with no errors).
QualityMetrics finalize_metrics(std::size_t bit_errors, std::size_t bits, double error_energy,
                                double reference_energy, std::size_t symbols, const Constellation& c);

/// Trace CSV: one row per symbol, columns sc<j>_pol<p>.
void write_trace_csv(std::ostream& os, const PhaseTrace& t);

}  // namespace nlpn
