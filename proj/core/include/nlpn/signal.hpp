#pragma once

#include <array>
#include <span>
#include <vector>

#include "nlpn/constellation.hpp"
#include "nlpn/fft.hpp"

namespace nlpn {

/// Frequency plan of a WDM comb whose channels are split into digital
/// subcarriers. Frequencies are relative to the centre of the channel of
/// interest (COI).
struct ScmPlan {
  int n_channels = 5;
  double channel_spacing = 50e9;
  int n_subcarriers = 8;
  double subcarrier_baud = 4e9;
  double subcarrier_spacing = 6.25e9;
  double rolloff = 0.1;
  /// Simulation samples per subcarrier symbol on the global grid.
  int samples_per_symbol = 80;
  int coi_index = 2;
  /// Per-subcarrier transmitter / matched-filter oversampling.
  int tx_sps = 2;
  /// RRC truncation in symbols (even).
  int filter_span = 64;

  /// Standard grid: baud = total_baud / N_s and spacing = channel_spacing / N_s,
  /// with a global rate of at least `rate_margin` times the comb width.
  static ScmPlan make(int n_channels, int n_subcarriers, double rolloff = 0.1,
                      double total_baud = 32e9, double channel_spacing = 50e9,
                      double rate_margin = 1.25);

  void validate() const;
  double sample_rate() const { return subcarrier_baud * samples_per_symbol; }
  double symbol_period() const { return 1.0 / subcarrier_baud; }
  int n_total_subcarriers() const { return n_channels * n_subcarriers; }
  double subcarrier_frequency(int channel, int subcarrier) const;
  /// One-sided bandwidth of one subcarrier, (1+β)·baud/2.
  double subcarrier_half_bandwidth() const { return 0.5 * (1.0 + rolloff) * subcarrier_baud; }
  /// Largest |f| occupied by any subcarrier.
  double occupied_half_bandwidth() const;
};

/// Dual-polarization complex baseband field on a uniform periodic grid.
struct Waveform {
  std::array<CVec, 2> pol;
  double sample_rate = 0.0;
  /// Absolute-layout frequency that this waveform's 0 Hz represents.
  double center_freq_offset = 0.0;
  double launch_power_per_subcarrier = 0.0;
  /// Occupied band relative to this waveform's baseband, in Hz.
  double band_lo = 0.0;
  double band_hi = 0.0;

  std::size_t size() const { return pol[0].size(); }
  double duration() const { return static_cast<double>(size()) / sample_rate; }
  /// Mean of |x|² + |y|² over the frame.
  double mean_power() const;
  /// Σ(|x|²+|y|²)/fs, the frame energy.
  double energy() const;
};

/// Unit-energy root-raised-cosine taps, length span_symbols*sps + 1,
/// centred on the middle tap.
std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps);

/// DFT of taps placed circularly around sample 0 on an n-point grid.
CVec centered_filter_response(std::span<const double> taps, std::size_t n);

/// Pulse-shapes one subcarrier (both polarizations) at `sps` samples per
/// symbol with circular filtering. Samples are scaled by sqrt(P·sps/2) so
/// the mean power equals `power_per_subcarrier` for unit-power symbols.
Waveform modulate(std::span<const cd> x_symbols, std::span<const cd> y_symbols,
                  std::span<const double> taps, int sps, double baud,
                  double power_per_subcarrier, double rolloff);

/// Amplitude applied by modulate() for the given power and oversampling.
inline double modulation_amplitude(double power_per_subcarrier, int sps) {
  return std::sqrt(power_per_subcarrier * sps / 2.0);
}

/// Frequency-shifts every subcarrier waveform to its slot and sums them on
/// the global grid. `subcarriers` is indexed [channel * N_s + subcarrier].
Waveform assemble(const ScmPlan& plan, std::span<const Waveform> subcarriers);

/// Spectral translation by df followed by a band-limited rate change.
Waveform shift_and_resample(const Waveform& w, double df, double new_rate);

/// Builds the whole transmitted comb: symbols for every channel (COI uses
/// frames[coi_index]) modulated and assembled.
Waveform transmit(const ScmPlan& plan, std::span<const SymbolFrame> frames,
                  double power_per_subcarrier);

}  // namespace nlpn
