#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nlpn/signal.hpp"

namespace nlpn {

/// Standard single-mode fiber parameters in engineering units.
struct FiberSpec {
  double alpha_db_per_km = 0.2;
  double beta2_ps2_per_km = -21.27;
  double gamma_per_w_km = 1.3;
  double span_length_km = 100.0;

  void validate() const;
  /// Power attenuation coefficient in 1/m.
  double alpha_per_m() const { return alpha_db_per_km / (10.0 * std::log10(std::exp(1.0))) * 1e-3; }
  double beta2_s2_per_m() const { return beta2_ps2_per_km * 1e-24 * 1e-3; }
  double gamma_per_w_m() const { return gamma_per_w_km * 1e-3; }
  double span_length_m() const { return span_length_km * 1e3; }
  double span_loss_db() const { return alpha_db_per_km * span_length_km; }
};

struct LinkSpec {
  FiberSpec fiber;
  int n_spans = 10;
  double amp_noise_figure_db = 5.0;
  bool ase_enabled = false;
  std::uint64_t ase_seed = 1;

  void validate() const;
  double total_length_m() const { return fiber.span_length_m() * n_spans; }
};

/// Step-size control for the split-step integrator.
struct StepPolicy {
  /// Upper bound on (8/9)·γ·P·h for every step, P the local mean power.
  double max_nl_phase = 1e-3;
  /// Longest step is span_length / min_steps_per_span.
  int min_steps_per_span = 100;
  /// When > 0, use exactly this many equal steps per span instead.
  int uniform_steps = 0;
  /// Requests whose per-step nonlinear phase would exceed this are refused.
  double guard_nl_phase = 1e-2;
};

/// Carrier used for the ASE photon energy.
inline constexpr double kCarrierFrequencyHz = 193.4e12;
inline constexpr double kPlanck = 6.62607015e-34;

/// Step lengths (m) that tile one span under `policy` for input power p0 (W).
std::vector<double> span_steps(const FiberSpec& f, const StepPolicy& policy, double p0);

/// Symmetric split-step solution of the Manakov equation over one span
/// (loss included, no amplification).
Waveform propagate_span(Waveform w, const FiberSpec& f, const StepPolicy& policy = {});

/// Lumped amplifier: field gain 10^(g/20) plus optional white circular
/// Gaussian ASE of PSD n_sp·hν·(G-1) per polarization.
Waveform amplify(Waveform w, double gain_db, double nf_db, bool ase_enabled, std::uint64_t seed);

/// One-sided ASE PSD per polarization (W/Hz) for gain G (linear) and NF (dB).
double ase_psd(double gain_lin, double nf_db);

/// Called after every span with the 1-based span count.
using SpanObserver = std::function<void(int, const Waveform&)>;

/// n_spans × (span → amplifier compensating the span loss).
Waveform propagate_link(Waveform w, const LinkSpec& link, const StepPolicy& policy = {},
                        const SpanObserver& observer = {});

/// Applies exp(i·β₂/2·ω²·z - α/2·z) in the frequency domain (ω absolute,
/// including the waveform's centre offset).
Waveform apply_dispersion(Waveform w, double beta2_s2_per_m, double length_m, double alpha_per_m = 0.0);

}  // namespace nlpn
