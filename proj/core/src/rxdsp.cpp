#include "nlpn/rxdsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

namespace nlpn {
namespace {

// Sample covariance of rows [lo, hi) of one polarization.
struct Moments {
  Eigen::VectorXd sum;
  Eigen::MatrixXd cross;
  double count = 0.0;

  explicit Moments(Eigen::Index n) : sum(Eigen::VectorXd::Zero(n)), cross(Eigen::MatrixXd::Zero(n, n)) {}

  void add(const Moments& o, double w = 1.0) {
    sum += w * o.sum;
    cross += w * o.cross;
    count += w * o.count;
  }
  Eigen::MatrixXd covariance() const {
    const Eigen::VectorXd mean = sum / count;
    return (cross - count * mean * mean.transpose()) / (count - 1.0);
  }
};

Eigen::MatrixXd correlation_of(const Eigen::MatrixXd& cov) {
  CovarianceMatrix m;
  m.cov = cov;
  return m.correlation();
}

}  // namespace

Waveform cd_compensate(Waveform w, const LinkSpec& link) {
  return apply_dispersion(std::move(w), link.fiber.beta2_s2_per_m(), -link.total_length_m());
}

std::vector<SubcarrierStream> demux_all(const Waveform& w, const ScmPlan& plan, int channel) {
  plan.validate();
  if (channel < 0) channel = plan.coi_index;
  if (channel >= plan.n_channels) throw InvalidArgument("demux: channel out of range");
  const std::size_t n = w.size();
  const auto sps = static_cast<std::size_t>(std::llround(w.sample_rate / plan.subcarrier_baud));
  if (sps < 1 || n % sps != 0 ||
      std::abs(static_cast<double>(sps) * plan.subcarrier_baud - w.sample_rate) > 1e-6 * w.sample_rate) {
    throw InvalidArgument("demux: sample rate must be an integer multiple of the subcarrier baud");
  }
  const std::size_t n_sym = n / sps;
  const double bin = w.sample_rate / static_cast<double>(n);
  const auto h = centered_filter_response(rrc_taps(plan.rolloff, plan.filter_span, static_cast<int>(sps)), n);
  const double amp = modulation_amplitude(w.launch_power_per_subcarrier, static_cast<int>(sps));
  if (!(amp > 0.0)) throw InvalidArgument("demux: waveform carries no launch power");
  // Only bins inside the matched filter's passband contribute.
  const auto half = static_cast<long long>(std::ceil(plan.subcarrier_half_bandwidth() / bin)) + 1;
  const auto nn = static_cast<long long>(n);
  const auto ns = static_cast<long long>(n_sym);
  const double scale = 1.0 / (static_cast<double>(n) * amp);

  std::array<CVec, 2> spec{fft(w.pol[0]), fft(w.pol[1])};
  std::vector<SubcarrierStream> out(static_cast<std::size_t>(plan.n_subcarriers));
  const auto inv = fft_plan(n_sym, FftDirection::kBackward);
  for (int j = 0; j < plan.n_subcarriers; ++j) {
    const double f = plan.subcarrier_frequency(channel, j) - w.center_freq_offset;
    const long long shift = std::llround(f / bin);
    if (std::abs(static_cast<double>(shift) * bin - f) > 1e-6 * bin) {
      throw InvalidArgument("demux: subcarrier frequency is not on the frame's bin grid");
    }
    for (int p = 0; p < 2; ++p) {
      // Folding the filtered baseband spectrum modulo n_sym samples it once
      // per symbol.
      CVec folded(n_sym, cd{});
      for (long long s = -half; s <= half; ++s) {
        const auto src = static_cast<std::size_t>(((s + shift) % nn + nn) % nn);
        const auto hk = static_cast<std::size_t>((s % nn + nn) % nn);
        folded[static_cast<std::size_t>((s % ns + ns) % ns)] += spec[p][src] * h[hk];
      }
      inv->execute(folded);
      auto& dst = p == 0 ? out[static_cast<std::size_t>(j)].x : out[static_cast<std::size_t>(j)].y;
      dst.resize(n_sym);
      for (std::size_t k = 0; k < n_sym; ++k) dst[k] = folded[k] * scale;
    }
  }
  return out;
}

SubcarrierStream demux(const Waveform& w, const ScmPlan& plan, int subcarrier, int channel) {
  if (subcarrier < 0 || subcarrier >= plan.n_subcarriers) {
    throw InvalidArgument("demux: subcarrier out of range");
  }
  auto all = demux_all(w, plan, channel);
  return std::move(all[static_cast<std::size_t>(subcarrier)]);
}

cd ls_gain(std::span<const cd> s, std::span<const cd> a) {
  if (s.size() != a.size()) throw InvalidArgument("ls_gain: length mismatch");
  cd num{};
  double den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    num += std::conj(s[i]) * a[i];
    den += std::norm(s[i]);
  }
  if (!(den > 0.0)) throw InvalidArgument("ls_gain: zero-energy stream");
  return num / den;
}

RxSymbols normalize_gain(std::span<const SubcarrierStream> streams, const SymbolFrame& tx,
                         std::size_t trim) {
  if (streams.size() != tx.n_subcarriers) throw InvalidArgument("normalize_gain: subcarrier count mismatch");
  if (tx.n_symbols <= 2 * trim) throw InvalidArgument("normalize_gain: frame shorter than the trimmed ends");
  RxSymbols rx;
  rx.n_subcarriers = tx.n_subcarriers;
  rx.n_symbols = tx.n_symbols - 2 * trim;
  const std::size_t total = rx.n_subcarriers * 2 * rx.n_symbols;
  rx.s.resize(total);
  rx.a.resize(total);
  rx.tx_index.resize(total);
  rx.gain_applied.resize(rx.n_subcarriers * 2);
  for (std::size_t sc = 0; sc < rx.n_subcarriers; ++sc) {
    for (int p = 0; p < 2; ++p) {
      const auto& src = p == 0 ? streams[sc].x : streams[sc].y;
      if (src.size() != tx.n_symbols) throw InvalidArgument("normalize_gain: stream length mismatch");
      const std::span<const cd> s(src.data() + trim, rx.n_symbols);
      const auto a = tx.stream(sc, p).subspan(trim, rx.n_symbols);
      const auto idx = tx.index_stream(sc, p).subspan(trim, rx.n_symbols);
      const cd g = ls_gain(s, a);
      rx.gain_applied[sc * 2 + static_cast<std::size_t>(p)] = g;
      const std::size_t off = rx.offset(sc, p);
      for (std::size_t k = 0; k < rx.n_symbols; ++k) {
        rx.s[off + k] = g * s[k];
        rx.a[off + k] = a[k];
        rx.tx_index[off + k] = idx[k];
      }
    }
  }
  return rx;
}

PhaseTrace extract_nlpn(const RxSymbols& rx) {
  if (rx.s.size() != rx.a.size()) throw InvalidArgument("extract_nlpn: shape mismatch");
  PhaseTrace t;
  t.n_subcarriers = rx.n_subcarriers;
  t.n_symbols = rx.n_symbols;
  t.phi.assign(rx.s.size(), 0.0);
  for (std::size_t i = 0; i < rx.s.size(); ++i) {
    if (rx.a[i] == cd{}) {
      ++t.skipped;
      continue;
    }
    t.phi[i] = ((rx.s[i] - rx.a[i]) / rx.a[i]).imag();
  }
  if (!rx.s.empty() && t.skipped == rx.s.size()) {
    throw InvalidArgument("extract_nlpn: all reference symbols are zero");
  }
  return t;
}

CovarianceMatrix empirical_cov(const PhaseTrace& traces, const EmpiricalCovOptions& opt) {
  const auto ns = static_cast<Eigen::Index>(traces.n_subcarriers);
  const std::size_t n = traces.n_symbols;
  if (ns < 1) throw InvalidArgument("empirical_cov: no subcarriers");
  if (n < opt.min_symbols) throw InvalidArgument("empirical_cov: too few symbols for the statistical floor");
  if (opt.block < 1) throw InvalidArgument("empirical_cov: block must be >= 1");

  // Per-block moments make the bootstrap a resampling of sufficient statistics.
  const std::size_t n_blocks = n / opt.block;
  std::array<std::vector<Moments>, 2> blocks;
  std::array<Moments, 2> full{Moments(ns), Moments(ns)};
  Eigen::VectorXd row(ns);
  for (int p = 0; p < 2; ++p) {
    blocks[p].assign(n_blocks, Moments(ns));
    for (std::size_t k = 0; k < n; ++k) {
      for (Eigen::Index j = 0; j < ns; ++j) {
        row(j) = traces.phi[traces.offset(static_cast<std::size_t>(j), p) + k];
      }
      Moments* dst[2] = {&full[p], nullptr};
      if (k / opt.block < n_blocks) dst[1] = &blocks[p][k / opt.block];
      for (Moments* m : dst) {
        if (!m) continue;
        m->sum += row;
        m->cross.selfadjointView<Eigen::Lower>().rankUpdate(row);
        m->count += 1.0;
      }
    }
    for (auto& b : blocks[p]) b.cross = b.cross.selfadjointView<Eigen::Lower>();
    full[p].cross = full[p].cross.selfadjointView<Eigen::Lower>();
  }

  CovarianceMatrix out;
  out.per_pol = {full[0].covariance(), full[1].covariance()};
  out.cov = 0.5 * (out.per_pol[0] + out.per_pol[1]);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.mean = 0.5 * (full[0].sum / full[0].count + full[1].sum / full[1].count);

  out.corr_stderr = Eigen::MatrixXd::Zero(ns, ns);
  if (opt.bootstrap_replicates > 1 && n_blocks > 1) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n_blocks - 1);
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(ns, ns);
    for (int r = 0; r < opt.bootstrap_replicates; ++r) {
      std::array<Moments, 2> acc{Moments(ns), Moments(ns)};
      for (std::size_t b = 0; b < n_blocks; ++b) {
        const std::size_t i = pick(rng);
        acc[0].add(blocks[0][i]);
        acc[1].add(blocks[1][i]);
      }
      const Eigen::MatrixXd c = correlation_of(0.5 * (acc[0].covariance() + acc[1].covariance()));
      s1 += c;
      s2 += c.cwiseProduct(c);
    }
    const double m = opt.bootstrap_replicates;
    out.corr_stderr = ((s2 - s1.cwiseProduct(s1) / m) / (m - 1.0)).cwiseMax(0.0).cwiseSqrt();
  }
  std::ostringstream meta;
  meta << "empirical: n_symbols=" << n << " block=" << opt.block
       << " bootstrap=" << opt.bootstrap_replicates << " pol_averaged=1";
  out.meta = traces.meta;
  out.meta.push_back(meta.str());
  return out;
}

double q_from_ber(double ber) {
  if (!(ber >= 0.0) || ber > 1.0) throw InvalidArgument("q_from_ber: BER outside [0,1]");
  if (ber >= 0.5) return -std::numeric_limits<double>::infinity();
  if (ber == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

double qam_ber_from_snr(int order, double snr_lin) {
  if (order < 4) throw InvalidArgument("qam_ber_from_snr: order must be >= 4");
  const double m = order;
  const double x = std::sqrt(3.0 * snr_lin / (m - 1.0));
  const double qx = 0.5 * std::erfc(x / std::sqrt(2.0));
  return std::min(0.5, 4.0 / std::log2(m) * (1.0 - 1.0 / std::sqrt(m)) * qx);
}

QualityMetrics finalize_metrics(std::size_t bit_errors, std::size_t bits, double error_energy,
                                double reference_energy, std::size_t symbols, const Constellation& c) {
  QualityMetrics q;
  q.bit_errors = bit_errors;
  q.bits = bits;
  q.error_energy = error_energy;
  q.reference_energy = reference_energy;
  q.symbols = symbols;
  q.ber = bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0;
  q.evm_db = reference_energy > 0.0 ? lin_to_db(error_energy / reference_energy)
                                    : std::numeric_limits<double>::quiet_NaN();
  if (bit_errors > 0) {
    q.q_db = q_from_ber(std::min(q.ber, 0.5));
    return q;
  }
  q.lower_bound = true;
  const double snr = error_energy > 0.0 ? reference_energy / error_energy
                                        : std::numeric_limits<double>::infinity();
  const int order = static_cast<int>(c.size());
  const double ber = (order >= 4 && std::isfinite(snr)) ? qam_ber_from_snr(order, snr) : 0.0;
  q.q_db = ber > 0.0 ? q_from_ber(ber) : lin_to_db(snr);
  return q;
}

QualityMetrics ber_q(std::span<const std::uint16_t> tx_index, std::span<const std::uint16_t> rx_index,
                     const Constellation& c, std::span<const cd> y, std::span<const cd> a) {
  if (tx_index.size() != rx_index.size() || y.size() != a.size()) {
    throw InvalidArgument("ber_q: length mismatch");
  }
  const auto& labels = c.labels();
  if (labels.empty()) throw InvalidArgument("ber_q: constellation has no bit labels");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < tx_index.size(); ++i) {
    errors += static_cast<std::size_t>(std::popcount(labels[tx_index[i]] ^ labels[rx_index[i]]));
  }
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    err += std::norm(y[i] - a[i]);
    ref += std::norm(a[i]);
  }
  return finalize_metrics(errors, tx_index.size() * static_cast<std::size_t>(c.bits_per_symbol()), err,
                          ref, y.size(), c);
}

QualityMetrics combine_metrics(std::span<const QualityMetrics> parts, const Constellation& c) {
  std::size_t errors = 0;
  std::size_t bits = 0;
  std::size_t symbols = 0;
  double err = 0.0;
  double ref = 0.0;
  for (const auto& p : parts) {
    errors += p.bit_errors;
    bits += p.bits;
    symbols += p.symbols;
    err += p.error_energy;
    ref += p.reference_energy;
  }
  return finalize_metrics(errors, bits, err, ref, symbols, c);
}

void write_trace_csv(std::ostream& os, const PhaseTrace& t) {
  for (const auto& m : t.meta) os << "# " << m << '\n';
  for (std::size_t sc = 0; sc < t.n_subcarriers; ++sc) {
    for (int p = 0; p < 2; ++p) os << (sc || p ? "," : "") << "sc" << sc << "_pol" << p;
  }
  os << '\n';
  os.precision(10);
  for (std::size_t k = 0; k < t.n_symbols; ++k) {
    for (std::size_t sc = 0; sc < t.n_subcarriers; ++sc) {
      for (int p = 0; p < 2; ++p) os << (sc || p ? "," : "") << t.phi[t.offset(sc, p) + k];
    }
    os << '\n';
  }
}

}  // namespace nlpn
