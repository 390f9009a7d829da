#pragma once

#include <span>
#include <vector>

#include "nlpn/channel.hpp"
#include "nlpn/constellation.hpp"
#include "nlpn/covariance.hpp"
#include "nlpn/signal.hpp"

namespace nlpn {

/// Identifies one interfering subcarrier on the grid.
struct InterfererId {
  int channel = 0;
  int subcarrier = 0;
  bool operator==(const InterfererId&) const = default;
};

/// First-order XPM kernel X[k,m] mapping interferer symbol pairs
/// b*_{n-k} b_{n-m} onto the phase of COI subcarrier symbol n.
struct InteractionTensor {
  int K = 0;
  int coi_subcarrier = 0;
  InterfererId interferer;
  /// Angular frequency of the interferer relative to the COI subcarrier.
  double omega = 0.0;
  /// Row-major (2K+1)² entries; (k, m) lives at (k+K)*(2K+1) + (m+K).
  std::vector<cd> x;

  int dim() const { return 2 * K + 1; }
  cd at(int k, int m) const { return x[static_cast<std::size_t>((k + K) * dim() + (m + K))]; }
  cd& at(int k, int m) { return x[static_cast<std::size_t>((k + K) * dim() + (m + K))]; }
  double max_abs() const;
  /// max |x[m,k] - conj(x[k,m])|.
  double hermitian_error() const;
  /// max |x| over the outermost index ring divided by max |x|.
  double boundary_ratio() const;
};

struct TensorOptions {
  /// Gauss–Legendre nodes per span on the loss-warped coordinate.
  int nodes_per_span = 64;
  /// Samples per symbol of the pulse grid.
  int sps = 4;
  /// Lags (in symbols) kept around the walk-off centre at every node.
  int pulse_radius = 24;
  /// Half-width (in symbols) of the COI intensity window.
  int window_radius = 16;
  /// Truncation radius; 0 selects the walk-off rule.
  int K = 0;
  /// Boundary-decay threshold for the truncation check.
  double decay_threshold = 1e-3;
};

/// Samples of the RRC pulse (taps at `sps`) after dispersion over z and an
/// advance of `advance_s` seconds, on a periodic grid of n_grid samples.
/// Σ|p|² equals Σ taps².
CVec dispersed_pulse(std::span<const double> taps, int sps, double baud, std::size_t n_grid,
                     double z_m, double beta2_s2_per_m, double advance_s = 0.0);

/// Gauss–Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Evaluates interaction tensors for one plan and link. Pulse shapes and
/// quadrature nodes are shared by every (subcarrier, interferer) pair.
class InteractionModel {
 public:
  InteractionModel(const ScmPlan& plan, const LinkSpec& link, TensorOptions opt = {});

  const ScmPlan& plan() const { return plan_; }
  const LinkSpec& link() const { return link_; }
  const TensorOptions& options() const { return opt_; }

  double omega(int coi_subcarrier, InterfererId interferer) const;
  /// Walk-off truncation radius for an interferer over `n_spans`, covering
  /// every COI subcarrier so all its tensors share K.
  int default_k(InterfererId interferer, int n_spans) const;

  /// Tensor over the full link.
  InteractionTensor tensor(int coi_subcarrier, InterfererId interferer) const;
  /// Tensors accumulated up to each requested span count (ascending).
  std::vector<InteractionTensor> tensors_at_spans(int coi_subcarrier, InterfererId interferer,
                                                  std::span<const int> span_counts, int K = 0) const;

 private:
  struct Node {
    int span = 0;
    double z_total = 0.0;
    double weight = 0.0;
    CVec spectrum;             // dispersed base pulse spectrum, scaled by 1/n
    std::vector<double> window;  // |p_j|² over the COI window
  };

  ScmPlan plan_;
  LinkSpec link_;
  TensorOptions opt_;
  std::vector<double> taps_;
  std::size_t n_grid_ = 0;
  int radius_ = 0;
  int window_ = 0;
  std::vector<Node> nodes_;
};

/// Convenience wrapper over InteractionModel.
InteractionTensor interaction_coeffs(const ScmPlan& plan, const LinkSpec& link, int coi_subcarrier,
                                     InterfererId interferer, const TensorOptions& opt = {});

struct S1S2 {
  cd s1;
  cd s2;
};

/// S1 = Σ_{k,m} Xi·conj(Xj), S2 = Σ_k Xi[k,k]·conj(Xj[k,k]).
S1S2 s1_s2(const InteractionTensor& xi, const InteractionTensor& xj);

enum class InterfererSet { kAll, kExternalOnly };

/// Every interferer of the COI under the chosen set (self term excluded
/// per COI subcarrier by the consumers).
std::vector<InterfererId> interferers(const ScmPlan& plan, InterfererSet set);

/// Interferer-summed Re S1, Re S2 and Re tr X, enough to form the
/// covariance for any constellation and power.
struct NlpnSums {
  int n_spans = 0;
  Eigen::MatrixXd s1;
  Eigen::MatrixXd s2;
  Eigen::VectorXd trace;
  /// Largest |Im S| / |S| encountered.
  double max_imag_ratio = 0.0;
};

/// Sums at each requested span count (ascending).
std::vector<NlpnSums> nlpn_sums(const InteractionModel& model, InterfererSet set,
                                std::span<const int> span_counts, int threads = 1);

/// Dual-polarization covariance: 2 · P_pol² · (S1 + (M-2)·S2) with
/// P_pol = power_per_subcarrier / 2, mean 2 · P_pol · tr X.
CovarianceMatrix covariance_from_sums(const NlpnSums& sums, double kurtosis_m,
                                      double power_per_subcarrier);

/// Analytic NLPN covariance of the COI subcarriers over the full link.
CovarianceMatrix nlpn_covariance(const ScmPlan& plan, const LinkSpec& link, const Constellation& c,
                                 double power_per_subcarrier, InterfererSet set = InterfererSet::kAll,
                                 const TensorOptions& opt = {});

/// Scalar (single-polarization) covariance P²·Re[S1 + (M-2)S2] for a set of
/// tensors sharing one interferer.
CovarianceMatrix scalar_covariance(std::span<const InteractionTensor> tensors, double kurtosis_m,
                                   double power);

struct McOracleResult {
  CovarianceMatrix cov;
  /// Largest |Im φ_n| over the realization (zero for Hermitian tensors).
  double max_imag = 0.0;
};

/// Monte-Carlo realization of φ_n^(j) = Σ X[k,m] b*_{n-k} b_{n-m} over one
/// shared i.i.d. interferer sequence of power `power` (circular indexing);
/// returns the empirical covariance and mean.
McOracleResult mc_oracle(std::span<const InteractionTensor> tensors, const Constellation& c,
                         double power, std::size_t n_symbols, std::uint64_t seed);

inline CovarianceMatrix mc_oracle_cov(std::span<const InteractionTensor> tensors,
                                      const Constellation& c, double power, std::size_t n_symbols,
                                      std::uint64_t seed) {
  return mc_oracle(tensors, c, power, n_symbols, seed).cov;
}

}  // namespace nlpn
