#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlpn/constellation.hpp"
#include "nlpn/rxdsp.hpp"

namespace nlpn {

/// Exponentially weighted one-tap least squares w = Σλ^k ref·conj(s) / Σλ^k |s|².
struct RlsPhaseState {
  cd num{};
  double den = 0.0;
  double lambda = 0.99;
  cd w{1.0, 0.0};

  /// Current phase estimate -arg(w); 0 before the first update.
  double phase() const { return den > 0.0 ? -std::arg(w) : 0.0; }
  double magnitude() const { return den > 0.0 ? std::abs(w) : 1.0; }
};

/// Folds (s, ref) into the state and returns the updated phase estimate.
double rls_phase_step(RlsPhaseState& state, cd s, cd ref);

/// Circular mean arg Σ e^{iφ_j}; returns `fallback` for a zero resultant.
double joint_combine(std::span<const double> phi_hats, double fallback = 0.0);

enum class EqMode { kNone, kIndividual, kJoint };

std::string to_string(EqMode m);
EqMode parse_eq_mode(const std::string& s);

struct EqOptions {
  double lambda = 0.99;
  EqMode mode = EqMode::kIndividual;
  /// Leading symbols that use the transmitted symbol as reference.
  std::size_t warmup = 500;
};

struct EqFrameResult {
  /// Corrected symbols, same layout as the input.
  RxSymbols corrected;
  /// Decided point indices, same layout.
  std::vector<std::uint16_t> decided;
  /// Pooled over subcarriers and polarizations, warmup excluded.
  QualityMetrics metrics;
};

/// Decision-directed phase equalization of all subcarriers. The estimate
/// applied at symbol n uses symbols before n only.
EqFrameResult equalize_frame(const RxSymbols& rx, const Constellation& c, const EqOptions& opt);

struct LambdaPoint {
  double lambda = 0.0;
  QualityMetrics metrics;
};

struct SweepResult {
  double best_lambda = 0.0;
  QualityMetrics best;
  std::vector<LambdaPoint> curve;
};

/// Q over a forgetting-factor grid; ties go to the larger λ.
SweepResult sweep_forgetting(const RxSymbols& rx, const Constellation& c, std::span<const double> lambdas,
                             EqMode mode, std::size_t warmup = 500);

/// Q-vs-power summary of one mode.
struct EqReport {
  EqMode mode = EqMode::kNone;
  std::vector<double> power_dbm;
  std::vector<double> q_db;
  std::vector<double> lambda;
  double peak_q_db = 0.0;
  double peak_power_dbm = 0.0;
};

EqReport make_report(EqMode mode, std::vector<double> power_dbm, std::vector<double> q_db,
                     std::vector<double> lambda);

}  // namespace nlpn
