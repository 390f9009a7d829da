#include "nlpn/csv.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nlpn/common.hpp"
#include "nlpn/covariance.hpp"

namespace nlpn {

Eigen::MatrixXd CovarianceMatrix::correlation() const {
  const Eigen::Index n = cov.rows();
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = cov(i, i) * cov(j, j);
      r(i, j) = d > 0.0 ? std::clamp(cov(i, j) / std::sqrt(d), -1.0, 1.0) : 0.0;
    }
  }
  return r;
}

void CovarianceMatrix::check_invariants() const {
  const Eigen::Index n = cov.rows();
  if (cov.cols() != n) throw NumericFailure("covariance: matrix is not square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cov(i, i) < 0.0) throw NumericFailure("covariance: negative variance");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (cov(i, j) != cov(j, i)) throw NumericFailure("covariance: matrix is not symmetric");
    }
  }
  if (n == 0) return;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(top, 0.0)) {
    throw NumericFailure("covariance: matrix is not positive semidefinite");
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, const std::vector<std::string>& meta) {
  for (const auto& line : meta) os << "# " << line << '\n';
  os << "row";
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << j + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << i + 1;
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
    os << '\n';
  }
}

std::vector<std::string> Provenance::lines() const {
  std::vector<std::string> out{"nlpnlab " + version + " config_hash=" + config_hash +
                               " seed=" + std::to_string(seed)};
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& comments,
                     const std::vector<std::string>& columns)
    : os_(path, std::ios::binary), n_cols_(columns.size()) {
  if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& c : comments) os_ << "# " << c << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
  os_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (col_ >= n_cols_) throw std::logic_error("CsvWriter: too many cells in row");
  os_ << (col_ ? "," : "") << v;
  ++col_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (col_ != n_cols_) throw std::logic_error("CsvWriter: incomplete row");
  os_ << '\n';
  col_ = 0;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.columns.empty()) {
      t.columns = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw std::runtime_error("csv: no column " + name);
}

}  // namespace nlpn
