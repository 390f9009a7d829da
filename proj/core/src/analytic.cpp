#include "nlpn/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlpn/parallel.hpp"

namespace nlpn {
namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

CVec tap_spectrum(std::span<const double> taps, std::size_t n_grid) {
  return centered_filter_response(taps, n_grid);
}

std::size_t wrap(long long i, std::size_t n) {
  const auto nn = static_cast<long long>(n);
  return static_cast<std::size_t>(((i % nn) + nn) % nn);
}

}  // namespace

double InteractionTensor::max_abs() const {
  double m = 0.0;
  for (const auto& v : x) m = std::max(m, std::abs(v));
  return m;
}

double InteractionTensor::hermitian_error() const {
  double e = 0.0;
  for (int k = -K; k <= K; ++k) {
    for (int m = k; m <= K; ++m) e = std::max(e, std::abs(at(m, k) - std::conj(at(k, m))));
  }
  return e;
}

double InteractionTensor::boundary_ratio() const {
  const double peak = max_abs();
  if (peak == 0.0) return 0.0;
  double ring = 0.0;
  for (int i = -K; i <= K; ++i) {
    ring = std::max({ring, std::abs(at(-K, i)), std::abs(at(K, i)), std::abs(at(i, -K)),
                     std::abs(at(i, K))});
  }
  return ring / peak;
}

CVec dispersed_pulse(std::span<const double> taps, int sps, double baud, std::size_t n_grid,
                     double z_m, double beta2, double advance_s) {
  if (z_m < 0.0) throw InvalidArgument("dispersed_pulse: z must be >= 0");
  CVec spec = tap_spectrum(taps, n_grid);
  const double fs = baud * sps;
  for (std::size_t k = 0; k < n_grid; ++k) {
    const double w = kTwoPi * bin_frequency(k, n_grid, fs);
    spec[k] *= std::polar(1.0, 0.5 * beta2 * w * w * z_m + w * advance_s);
  }
  ifft_inplace(spec);
  return spec;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw InvalidArgument("gauss_legendre: n must be >= 1");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1, 1] onto [0, 1], ascending.
    nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
    weights[static_cast<std::size_t>(i)] = 0.5 * w;
    weights[static_cast<std::size_t>(n - 1 - i)] = 0.5 * w;
  }
}

InteractionModel::InteractionModel(const ScmPlan& plan, const LinkSpec& link, TensorOptions opt)
    : plan_(plan), link_(link), opt_(opt) {
  plan_.validate();
  link_.validate();
  if (opt_.nodes_per_span < 1 || opt_.sps < 2 || opt_.pulse_radius < 1 || opt_.window_radius < 1) {
    throw InvalidArgument("tensor options: invalid quadrature or window sizes");
  }
  taps_ = rrc_taps(plan_.rolloff, plan_.filter_span, opt_.sps);

  const double beta2 = link_.fiber.beta2_s2_per_m();
  const double baud = plan_.subcarrier_baud;
  const double spread = std::abs(beta2) * link_.total_length_m() * kPi * (1.0 + plan_.rolloff) * baud * baud;
  const int spread_sym = static_cast<int>(std::ceil(spread));
  radius_ = opt_.pulse_radius + spread_sym;
  window_ = opt_.window_radius + spread_sym;
  const auto period = static_cast<std::size_t>(
      std::max(plan_.filter_span + 2 * spread_sym + 4, 2 * (radius_ + window_) + 4));
  n_grid_ = next_pow2(period) * static_cast<std::size_t>(opt_.sps);

  std::vector<double> u;
  std::vector<double> gw;
  gauss_legendre(opt_.nodes_per_span, u, gw);
  const double alpha = link_.fiber.alpha_per_m();
  const double length = link_.fiber.span_length_m();
  const double span_weight = alpha > 0.0 ? (1.0 - std::exp(-alpha * length)) / alpha : length;

  const CVec base = tap_spectrum(taps_, n_grid_);
  const double fs = baud * opt_.sps;
  const int wlen = 2 * window_ * opt_.sps + 1;
  for (int s = 0; s < link_.n_spans; ++s) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      // u = (1 - e^{-αz}) / (1 - e^{-αL}) absorbs the loss weight.
      const double z = alpha > 0.0 ? -std::log1p(-u[i] * (1.0 - std::exp(-alpha * length))) / alpha
                                   : u[i] * length;
      Node node;
      node.span = s;
      node.z_total = s * length + z;
      node.weight = gw[i] * span_weight;
      node.spectrum.resize(n_grid_);
      for (std::size_t k = 0; k < n_grid_; ++k) {
        const double w = kTwoPi * bin_frequency(k, n_grid_, fs);
        node.spectrum[k] = base[k] * std::polar(1.0 / static_cast<double>(n_grid_),
                                                0.5 * beta2 * w * w * node.z_total);
      }
      CVec p = node.spectrum;
      fft_plan(n_grid_, FftDirection::kBackward)->execute(p);
      node.window.resize(static_cast<std::size_t>(wlen));
      for (int t = 0; t < wlen; ++t) {
        node.window[static_cast<std::size_t>(t)] =
            std::norm(p[wrap(t - window_ * opt_.sps, n_grid_)]);
      }
      nodes_.push_back(std::move(node));
    }
  }
}

double InteractionModel::omega(int coi_subcarrier, InterfererId interferer) const {
  return kTwoPi * (plan_.subcarrier_frequency(interferer.channel, interferer.subcarrier) -
                   plan_.subcarrier_frequency(plan_.coi_index, coi_subcarrier));
}

int InteractionModel::default_k(InterfererId interferer, int n_spans) const {
  double wmax = 0.0;
  for (int j = 0; j < plan_.n_subcarriers; ++j) wmax = std::max(wmax, std::abs(omega(j, interferer)));
  const double walk = std::abs(link_.fiber.beta2_s2_per_m()) * wmax * link_.fiber.span_length_m() *
                      n_spans * plan_.subcarrier_baud;
  return static_cast<int>(std::ceil(walk)) + radius_ + 2;
}

InteractionTensor InteractionModel::tensor(int coi_subcarrier, InterfererId interferer) const {
  const int spans[] = {link_.n_spans};
  return std::move(tensors_at_spans(coi_subcarrier, interferer, spans).front());
}

std::vector<InteractionTensor> InteractionModel::tensors_at_spans(int coi_subcarrier,
                                                                  InterfererId interferer,
                                                                  std::span<const int> span_counts,
                                                                  int K) const {
  if (coi_subcarrier < 0 || coi_subcarrier >= plan_.n_subcarriers) {
    throw InvalidArgument("interaction_coeffs: COI subcarrier out of range");
  }
  if (interferer.channel < 0 || interferer.channel >= plan_.n_channels || interferer.subcarrier < 0 ||
      interferer.subcarrier >= plan_.n_subcarriers) {
    throw InvalidArgument("interaction_coeffs: interferer out of range");
  }
  const double om = omega(coi_subcarrier, interferer);
  if (om == 0.0 || interferer == InterfererId{plan_.coi_index, coi_subcarrier}) {
    throw InvalidArgument("interaction_coeffs: self term (Ω = 0) is excluded");
  }
  if (span_counts.empty() || !std::is_sorted(span_counts.begin(), span_counts.end()) ||
      span_counts.front() < 1 || span_counts.back() > link_.n_spans) {
    throw InvalidArgument("interaction_coeffs: span counts must be ascending within the link");
  }
  if (K <= 0) K = opt_.K > 0 ? opt_.K : default_k(interferer, span_counts.back());

  InteractionTensor acc;
  acc.K = K;
  acc.coi_subcarrier = coi_subcarrier;
  acc.interferer = interferer;
  acc.omega = om;
  acc.x.assign(static_cast<std::size_t>(acc.dim()) * static_cast<std::size_t>(acc.dim()), cd{});

  const int sps = opt_.sps;
  const double T = plan_.symbol_period();
  const double beta2 = link_.fiber.beta2_s2_per_m();
  const double fs = plan_.subcarrier_baud * sps;
  const double prefactor = 2.0 * kManakov * link_.fiber.gamma_per_w_m() * sps;
  const int rows = 2 * radius_ + 1;
  const int wlen = 2 * window_ * sps + 1;

  Eigen::MatrixXcd q_mat(rows, wlen);
  Eigen::MatrixXcd f_mat(rows, rows);
  CVec q(n_grid_);
  double dropped = 0.0;
  int needed_k = 0;

  std::vector<InteractionTensor> out;
  std::size_t next_checkpoint = 0;
  std::size_t node_index = 0;
  const int last_span = span_counts.back();
  for (int s = 0; s < last_span; ++s) {
    for (; node_index < nodes_.size() && nodes_[node_index].span == s; ++node_index) {
      const Node& node = nodes_[node_index];
      if (node.weight == 0.0) continue;
      // Interferer pulses sit at t = kT + β₂ΩZ; p(t - kT - β₂ΩZ) is p advanced by -β₂ΩZ.
      const double advance = -beta2 * om * node.z_total;
      const long long nd = std::llround(advance / T);
      const double frac = advance - static_cast<double>(nd) * T;
      for (std::size_t k = 0; k < n_grid_; ++k) {
        const double w = kTwoPi * bin_frequency(k, n_grid_, fs);
        q[k] = node.spectrum[k] * std::polar(1.0, w * frac);
      }
      fft_plan(n_grid_, FftDirection::kBackward)->execute(q);

      for (int r = 0; r < rows; ++r) {
        const int lag = r - radius_;
        for (int t = 0; t < wlen; ++t) {
          q_mat(r, t) = q[wrap(static_cast<long long>(t - window_ * sps - lag * sps), n_grid_)];
        }
      }
      const Eigen::Map<const Eigen::VectorXd> win(node.window.data(), wlen);
      f_mat.noalias() = (q_mat.conjugate() * win.asDiagonal()) * q_mat.transpose();

      const double coeff = node.weight * prefactor;
      needed_k = std::max(needed_k, static_cast<int>(std::abs(nd)) + radius_);
      for (int r = 0; r < rows; ++r) {
        const long long k = r - radius_ + nd;
        for (int c = 0; c < rows; ++c) {
          const long long m = c - radius_ + nd;
          const cd v = coeff * f_mat(r, c);
          if (std::abs(k) > K || std::abs(m) > K) {
            dropped = std::max(dropped, std::abs(v));
            continue;
          }
          acc.at(static_cast<int>(k), static_cast<int>(m)) += v;
        }
      }
    }
    if (next_checkpoint < span_counts.size() && span_counts[next_checkpoint] == s + 1) {
      while (next_checkpoint < span_counts.size() && span_counts[next_checkpoint] == s + 1) {
        out.push_back(acc);
        ++next_checkpoint;
      }
    }
  }

  const double peak = acc.max_abs();
  if (peak > 0.0 &&
      (dropped > opt_.decay_threshold * peak || acc.boundary_ratio() > opt_.decay_threshold)) {
    std::ostringstream msg;
    msg << "interaction_coeffs: truncation K=" << K << " violates boundary decay; required K >= "
        << needed_k + 1;
    throw NumericFailure(msg.str());
  }
  return out;
}

InteractionTensor interaction_coeffs(const ScmPlan& plan, const LinkSpec& link, int coi_subcarrier,
                                     InterfererId interferer, const TensorOptions& opt) {
  return InteractionModel(plan, link, opt).tensor(coi_subcarrier, interferer);
}

S1S2 s1_s2(const InteractionTensor& xi, const InteractionTensor& xj) {
  if (xi.K != xj.K || !(xi.interferer == xj.interferer) || xi.x.size() != xj.x.size()) {
    throw InvalidArgument("s1_s2: tensors must share interferer and truncation");
  }
  S1S2 r{};
  for (std::size_t i = 0; i < xi.x.size(); ++i) r.s1 += xi.x[i] * std::conj(xj.x[i]);
  for (int k = -xi.K; k <= xi.K; ++k) r.s2 += xi.at(k, k) * std::conj(xj.at(k, k));
  return r;
}

std::vector<InterfererId> interferers(const ScmPlan& plan, InterfererSet set) {
  std::vector<InterfererId> ids;
  for (int c = 0; c < plan.n_channels; ++c) {
    if (c == plan.coi_index && set == InterfererSet::kExternalOnly) continue;
    for (int j = 0; j < plan.n_subcarriers; ++j) ids.push_back({c, j});
  }
  return ids;
}

std::vector<NlpnSums> nlpn_sums(const InteractionModel& model, InterfererSet set,
                                std::span<const int> span_counts, int threads) {
  const int ns = model.plan().n_subcarriers;
  const auto ids = interferers(model.plan(), set);
  const std::size_t nc = span_counts.size();

  // One slot per interferer keeps the reduction order fixed.
  std::vector<std::vector<NlpnSums>> partial(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t idx) {
    const InterfererId id = ids[idx];
    const int K = model.options().K > 0 ? model.options().K : model.default_k(id, span_counts.back());
    std::vector<std::vector<InteractionTensor>> per_sc(static_cast<std::size_t>(ns));
    for (int j = 0; j < ns; ++j) {
      if (id == InterfererId{model.plan().coi_index, j}) continue;
      per_sc[static_cast<std::size_t>(j)] = model.tensors_at_spans(j, id, span_counts, K);
    }
    auto& mine = partial[idx];
    mine.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      NlpnSums& s = mine[c];
      s.n_spans = span_counts[c];
      s.s1 = Eigen::MatrixXd::Zero(ns, ns);
      s.s2 = Eigen::MatrixXd::Zero(ns, ns);
      s.trace = Eigen::VectorXd::Zero(ns);
      for (int i = 0; i < ns; ++i) {
        const auto& ti = per_sc[static_cast<std::size_t>(i)];
        if (ti.empty()) continue;
        const InteractionTensor& xi = ti[c];
        cd tr{};
        for (int k = -xi.K; k <= xi.K; ++k) tr += xi.at(k, k);
        s.trace(i) = tr.real();
        for (int j = i; j < ns; ++j) {
          const auto& tj = per_sc[static_cast<std::size_t>(j)];
          if (tj.empty()) continue;
          const S1S2 r = s1_s2(xi, tj[c]);
          s.s1(i, j) = s.s1(j, i) = r.s1.real();
          s.s2(i, j) = s.s2(j, i) = r.s2.real();
          if (std::abs(r.s1) > 0.0) {
            s.max_imag_ratio = std::max(s.max_imag_ratio, std::abs(r.s1.imag()) / std::abs(r.s1));
          }
          if (std::abs(r.s2) > 0.0) {
            s.max_imag_ratio = std::max(s.max_imag_ratio, std::abs(r.s2.imag()) / std::abs(r.s2));
          }
        }
      }
    }
  });

  std::vector<NlpnSums> total(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    total[c].n_spans = span_counts[c];
    total[c].s1 = Eigen::MatrixXd::Zero(ns, ns);
    total[c].s2 = Eigen::MatrixXd::Zero(ns, ns);
    total[c].trace = Eigen::VectorXd::Zero(ns);
    for (const auto& p : partial) {
      total[c].s1 += p[c].s1;
      total[c].s2 += p[c].s2;
      total[c].trace += p[c].trace;
      total[c].max_imag_ratio = std::max(total[c].max_imag_ratio, p[c].max_imag_ratio);
    }
    if (total[c].max_imag_ratio > 1e-6) {
      throw NumericFailure("nlpn_sums: S1/S2 imaginary part exceeds 1e-6 relative");
    }
  }
  return total;
}

CovarianceMatrix covariance_from_sums(const NlpnSums& sums, double kurtosis_m,
                                      double power_per_subcarrier) {
  const double p_pol = 0.5 * power_per_subcarrier;
  CovarianceMatrix out;
  out.cov = 2.0 * p_pol * p_pol * (sums.s1 + (kurtosis_m - 2.0) * sums.s2);
  out.mean = 2.0 * p_pol * sums.trace;
  std::ostringstream meta;
  meta << "analytic: n_spans=" << sums.n_spans << " M=" << kurtosis_m
       << " P_subcarrier_W=" << power_per_subcarrier;
  out.meta.push_back(meta.str());
  return out;
}

CovarianceMatrix nlpn_covariance(const ScmPlan& plan, const LinkSpec& link, const Constellation& c,
                                 double power_per_subcarrier, InterfererSet set,
                                 const TensorOptions& opt) {
  const InteractionModel model(plan, link, opt);
  const int spans[] = {link.n_spans};
  if (link.n_spans < 1) {
    CovarianceMatrix z;
    z.cov = Eigen::MatrixXd::Zero(plan.n_subcarriers, plan.n_subcarriers);
    z.mean = Eigen::VectorXd::Zero(plan.n_subcarriers);
    return z;
  }
  const auto sums = nlpn_sums(model, set, spans, 1);
  return covariance_from_sums(sums.front(), kurtosis(c), power_per_subcarrier);
}

CovarianceMatrix scalar_covariance(std::span<const InteractionTensor> tensors, double kurtosis_m,
                                   double power) {
  const auto n = static_cast<Eigen::Index>(tensors.size());
  CovarianceMatrix out;
  out.cov = Eigen::MatrixXd::Zero(n, n);
  out.mean = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& xi = tensors[static_cast<std::size_t>(i)];
    cd tr{};
    for (int k = -xi.K; k <= xi.K; ++k) tr += xi.at(k, k);
    out.mean(i) = power * tr.real();
    for (Eigen::Index j = i; j < n; ++j) {
      const S1S2 r = s1_s2(xi, tensors[static_cast<std::size_t>(j)]);
      out.cov(i, j) = out.cov(j, i) = power * power * (r.s1 + (kurtosis_m - 2.0) * r.s2).real();
    }
  }
  return out;
}

McOracleResult mc_oracle(std::span<const InteractionTensor> tensors, const Constellation& c,
                         double power, std::size_t n_symbols, std::uint64_t seed) {
  if (tensors.empty()) throw InvalidArgument("mc_oracle: no tensors");
  const int K = tensors.front().K;
  for (const auto& t : tensors) {
    if (t.K != K || !(t.interferer == tensors.front().interferer)) {
      throw InvalidArgument("mc_oracle: tensors must share interferer and truncation");
    }
  }
  if (n_symbols < 2) throw InvalidArgument("mc_oracle: need at least two symbols");

  const SymbolFrame frame = draw_symbols(c, 1, n_symbols, seed);
  const double amp = std::sqrt(power);
  // bext[i] = b[(i - K) mod N], so b_{n-m} = bext[n - m + K].
  std::vector<cd> bext(n_symbols + 2 * static_cast<std::size_t>(K));
  const auto b = frame.stream(0, 0);
  for (std::size_t i = 0; i < bext.size(); ++i) {
    bext[i] = amp * b[wrap(static_cast<long long>(i) - K, n_symbols)];
  }

  const auto nt = tensors.size();
  const int dim = 2 * K + 1;
  McOracleResult res;
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n_symbols), static_cast<Eigen::Index>(nt));
  for (std::size_t j = 0; j < nt; ++j) {
    const auto& t = tensors[j];
    // Non-zero column range per row.
    std::vector<int> lo(static_cast<std::size_t>(dim), 1);
    std::vector<int> hi(static_cast<std::size_t>(dim), 0);
    for (int r = 0; r < dim; ++r) {
      for (int col = 0; col < dim; ++col) {
        if (t.x[static_cast<std::size_t>(r * dim + col)] != cd{}) {
          if (lo[static_cast<std::size_t>(r)] > hi[static_cast<std::size_t>(r)]) lo[static_cast<std::size_t>(r)] = col;
          hi[static_cast<std::size_t>(r)] = col;
        }
      }
    }
    for (std::size_t n = 0; n < n_symbols; ++n) {
      // Element b_{n-m} with m = col - K sits at bext[n - col + 2K].
      const cd* base = bext.data() + n + 2 * static_cast<std::size_t>(K);
      cd acc{};
      for (int r = 0; r < dim; ++r) {
        const int c0 = lo[static_cast<std::size_t>(r)];
        const int c1 = hi[static_cast<std::size_t>(r)];
        if (c0 > c1) continue;
        const cd* row = t.x.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(dim);
        cd inner{};
        for (int col = c0; col <= c1; ++col) inner += row[col] * *(base - col);
        acc += std::conj(*(base - r)) * inner;
      }
      res.max_imag = std::max(res.max_imag, std::abs(acc.imag()));
      phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = acc.real();
    }
  }

  res.cov.mean = phi.colwise().mean().transpose();
  const Eigen::MatrixXd centered = phi.rowwise() - res.cov.mean.transpose();
  const Eigen::MatrixXd sample = (centered.transpose() * centered) / static_cast<double>(n_symbols - 1);
  res.cov.cov = 0.5 * (sample + sample.transpose());
  std::ostringstream meta;
  meta << "mc_oracle: n_symbols=" << n_symbols << " seed=" << seed << " power=" << power
       << " constellation=" << c.label();
  res.cov.meta.push_back(meta.str());
  return res;
}

}  // namespace nlpn
