#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nlpn {

/// N_s × N_s NLPN covariance (rad²) with per-subcarrier means, from either
/// the analytic model or measured phase traces.
struct CovarianceMatrix {
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean;
  /// Bootstrap standard errors of the correlation entries (empty when the
  /// source carries no sampling error).
  Eigen::MatrixXd corr_stderr;
  /// Per-polarization covariances when available.
  std::vector<Eigen::MatrixXd> per_pol;
  /// Provenance lines written as '#' comments on export.
  std::vector<std::string> meta;

  Eigen::Index size() const { return cov.rows(); }
  /// cov(i,j)/sqrt(cov(i,i)·cov(j,j)), unit diagonal, clamped to [-1, 1].
  Eigen::MatrixXd correlation() const;
  /// Throws NumericFailure if symmetry / PSD / diagonal contracts fail.
  void check_invariants() const;
};

/// Row-major CSV with '#' provenance lines and an index header row.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, const std::vector<std::string>& meta);

}  // namespace nlpn
