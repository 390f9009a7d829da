#include "nlpn/signal.hpp"

#include <algorithm>
#include <cmath>

namespace nlpn {
namespace {

// Smallest integer >= x whose only prime factors are 2, 3 and 5.
int next_smooth(double x) {
  int n = std::max(1, static_cast<int>(std::ceil(x - 1e-9)));
  for (;; ++n) {
    int m = n;
    for (int p : {2, 3, 5}) {
      while (m % p == 0) m /= p;
    }
    if (m == 1) return n;
  }
}

void check_band(double lo, double hi, double rate, const char* what) {
  const double limit = 0.5 * rate / 1.05;
  if (std::max(std::abs(lo), std::abs(hi)) > limit) {
    throw InvalidArgument(std::string(what) + ": occupied band violates the 5% Nyquist margin");
  }
}

long long integer_bins(double f, double bin_spacing, const char* what) {
  const double b = f / bin_spacing;
  const double r = std::round(b);
  if (std::abs(b - r) > 1e-6) {
    throw InvalidArgument(std::string(what) + ": frequency is not on the frame's bin grid");
  }
  return static_cast<long long>(r);
}

// Band-limited resample of a spectrum X (length n) into length m, keeping
// amplitudes. The Nyquist bin of an even-length input is split evenly.
CVec resample_spectrum(const CVec& x, std::size_t m) {
  const std::size_t n = x.size();
  CVec out(m, cd{});
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  const auto mm = static_cast<long long>(m);
  const auto nn = static_cast<long long>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long long s = signed_bin(k, n);
    const bool nyq_in = (nn % 2 == 0) && (s == nn / 2);
    if (nyq_in) {
      if (nn / 2 < (mm + 1) / 2) {
        out[static_cast<std::size_t>(nn / 2)] += 0.5 * scale * x[k];
        out[static_cast<std::size_t>(mm - nn / 2)] += 0.5 * scale * x[k];
      }
      continue;
    }
    if (2 * std::abs(s) >= mm) continue;
    out[static_cast<std::size_t>((s + mm) % mm)] += scale * x[k];
  }
  return out;
}

}  // namespace

ScmPlan ScmPlan::make(int n_channels, int n_subcarriers, double rolloff, double total_baud,
                      double channel_spacing, double rate_margin) {
  ScmPlan p;
  p.n_channels = n_channels;
  p.n_subcarriers = n_subcarriers;
  p.rolloff = rolloff;
  p.channel_spacing = channel_spacing;
  p.subcarrier_baud = total_baud / n_subcarriers;
  p.subcarrier_spacing = channel_spacing / n_subcarriers;
  p.coi_index = n_channels / 2;
  p.samples_per_symbol =
      next_smooth(rate_margin * n_channels * channel_spacing / p.subcarrier_baud);
  return p;
}

void ScmPlan::validate() const {
  if (n_channels < 1 || n_subcarriers < 1) throw InvalidArgument("plan: counts must be >= 1");
  if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw InvalidArgument("plan: rolloff outside [0,1]");
  if (!(subcarrier_baud > 0.0) || !(subcarrier_spacing > 0.0)) {
    throw InvalidArgument("plan: baud and spacing must be positive");
  }
  if (subcarrier_baud * (1.0 + rolloff) > subcarrier_spacing * (1.0 + 1e-12)) {
    throw InvalidArgument("plan: subcarrier spectra overlap");
  }
  if (std::abs(n_subcarriers * subcarrier_spacing - channel_spacing) > 1e-6 * channel_spacing) {
    throw InvalidArgument("plan: N_s * subcarrier_spacing must equal channel_spacing");
  }
  if (coi_index < 0 || coi_index >= n_channels) throw InvalidArgument("plan: coi_index out of range");
  if (n_channels % 2 == 1 && coi_index != n_channels / 2) {
    throw InvalidArgument("plan: COI must be the central channel");
  }
  if (tx_sps < 2 || filter_span < 2 || filter_span % 2 != 0) {
    throw InvalidArgument("plan: tx_sps >= 2 and even filter_span required");
  }
  if (samples_per_symbol % tx_sps != 0) {
    throw InvalidArgument("plan: samples_per_symbol must be a multiple of tx_sps");
  }
  check_band(-occupied_half_bandwidth(), occupied_half_bandwidth(), sample_rate(), "plan");
}

double ScmPlan::subcarrier_frequency(int channel, int subcarrier) const {
  return (channel - coi_index) * channel_spacing +
         (subcarrier - 0.5 * (n_subcarriers - 1)) * subcarrier_spacing;
}

double ScmPlan::occupied_half_bandwidth() const {
  double f = 0.0;
  for (int c : {0, n_channels - 1}) {
    for (int j : {0, n_subcarriers - 1}) f = std::max(f, std::abs(subcarrier_frequency(c, j)));
  }
  return f + subcarrier_half_bandwidth();
}

double Waveform::mean_power() const {
  if (size() == 0) return 0.0;
  return energy() * sample_rate / static_cast<double>(size());
}

double Waveform::energy() const {
  double e = 0.0;
  for (const auto& p : pol) {
    for (const auto& v : p) e += std::norm(v);
  }
  return e / sample_rate;
}

std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps) {
  if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw InvalidArgument("rrc_taps: rolloff outside [0,1]");
  if (span_symbols < 2 || span_symbols % 2 != 0) throw InvalidArgument("rrc_taps: span must be even");
  if (sps < 2) throw InvalidArgument("rrc_taps: sps must be >= 2");

  const int n = span_symbols * sps + 1;
  const int mid = n / 2;
  const double b = rolloff;
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i - mid) / sps;  // in symbol periods
    double v = 0.0;
    if (std::abs(t) < 1e-12) {
      v = 1.0 - b + 4.0 * b / kPi;
    } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
      v = b / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
      const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
      v = num / den;
    }
    h[static_cast<std::size_t>(i)] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double s = 1.0 / std::sqrt(e);
  for (auto& v : h) v *= s;
  return h;
}

CVec centered_filter_response(std::span<const double> taps, std::size_t n) {
  if (taps.size() > n) throw InvalidArgument("filter longer than the frame");
  CVec buf(n, cd{});
  const auto mid = static_cast<long long>(taps.size() / 2);
  const auto nn = static_cast<long long>(n);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const long long pos = ((static_cast<long long>(i) - mid) % nn + nn) % nn;
    buf[static_cast<std::size_t>(pos)] += taps[i];
  }
  fft_inplace(buf);
  return buf;
}

Waveform modulate(std::span<const cd> x_symbols, std::span<const cd> y_symbols,
                  std::span<const double> taps, int sps, double baud,
                  double power_per_subcarrier, double rolloff) {
  if (x_symbols.size() != y_symbols.size() || x_symbols.empty()) {
    throw InvalidArgument("modulate: polarization streams must be equal and non-empty");
  }
  const std::size_t n = x_symbols.size() * static_cast<std::size_t>(sps);
  const CVec h = centered_filter_response(taps, n);
  const double amp = modulation_amplitude(power_per_subcarrier, sps);

  Waveform w;
  w.sample_rate = baud * sps;
  w.launch_power_per_subcarrier = power_per_subcarrier;
  w.band_lo = -0.5 * (1.0 + rolloff) * baud;
  w.band_hi = 0.5 * (1.0 + rolloff) * baud;
  const std::array<std::span<const cd>, 2> src{x_symbols, y_symbols};
  for (int p = 0; p < 2; ++p) {
    CVec buf(n, cd{});
    for (std::size_t k = 0; k < src[p].size(); ++k) buf[k * sps] = amp * src[p][k];
    fft_inplace(buf);
    for (std::size_t k = 0; k < n; ++k) buf[k] *= h[k];
    ifft_inplace(buf);
    w.pol[p] = std::move(buf);
  }
  return w;
}

Waveform assemble(const ScmPlan& plan, std::span<const Waveform> subcarriers) {
  plan.validate();
  if (subcarriers.size() != static_cast<std::size_t>(plan.n_total_subcarriers())) {
    throw InvalidArgument("assemble: expected n_channels * n_subcarriers waveforms");
  }
  const double duration = subcarriers.front().duration();
  const double fs = plan.sample_rate();
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  const double bin = 1.0 / duration;

  Waveform out;
  out.sample_rate = fs;
  out.launch_power_per_subcarrier = subcarriers.front().launch_power_per_subcarrier;
  out.band_lo = -plan.occupied_half_bandwidth();
  out.band_hi = plan.occupied_half_bandwidth();
  check_band(out.band_lo, out.band_hi, fs, "assemble");
  for (auto& p : out.pol) p.assign(n, cd{});

  for (int c = 0; c < plan.n_channels; ++c) {
    for (int j = 0; j < plan.n_subcarriers; ++j) {
      const Waveform& w = subcarriers[static_cast<std::size_t>(c * plan.n_subcarriers + j)];
      if (std::abs(w.duration() - duration) > 1e-9 * duration) {
        throw InvalidArgument("assemble: subcarrier frames differ in duration");
      }
      const double f = plan.subcarrier_frequency(c, j);
      check_band(w.band_lo + f, w.band_hi + f, fs, "assemble");
      const long long shift = integer_bins(f, bin, "assemble");
      const double scale = static_cast<double>(n) / static_cast<double>(w.size());
      const auto nn = static_cast<long long>(n);
      const auto nt = static_cast<long long>(w.size());
      for (int p = 0; p < 2; ++p) {
        const CVec spec = fft(w.pol[p]);
        for (std::size_t k = 0; k < spec.size(); ++k) {
          const long long s = signed_bin(k, spec.size());
          // The Nyquist bin carries no signal once the band check has passed.
          if (nt % 2 == 0 && s == nt / 2) continue;
          const long long dst = ((s + shift) % nn + nn) % nn;
          out.pol[p][static_cast<std::size_t>(dst)] += scale * spec[k];
        }
      }
    }
  }
  for (auto& p : out.pol) ifft_inplace(p);
  return out;
}

Waveform shift_and_resample(const Waveform& w, double df, double new_rate) {
  const double ratio = new_rate / w.sample_rate;
  const double m_real = static_cast<double>(w.size()) * ratio;
  const auto m = static_cast<std::size_t>(std::llround(m_real));
  if (m == 0 || std::abs(m_real - static_cast<double>(m)) > 1e-6) {
    throw InvalidArgument("shift_and_resample: rate change must give an integer length");
  }
  check_band(w.band_lo + df, w.band_hi + df, new_rate, "shift_and_resample");

  Waveform out;
  out.sample_rate = new_rate;
  out.center_freq_offset = w.center_freq_offset - df;
  out.launch_power_per_subcarrier = w.launch_power_per_subcarrier;
  out.band_lo = w.band_lo + df;
  out.band_hi = w.band_hi + df;
  for (int p = 0; p < 2; ++p) {
    CVec buf = w.pol[p];
    if (df != 0.0) {
      const double step = kTwoPi * df / w.sample_rate;
      for (std::size_t k = 0; k < buf.size(); ++k) {
        buf[k] *= std::polar(1.0, step * static_cast<double>(k));
      }
    }
    if (m == buf.size()) {
      out.pol[p] = std::move(buf);
      continue;
    }
    fft_inplace(buf);
    CVec rs = resample_spectrum(buf, m);
    ifft_inplace(rs);
    out.pol[p] = std::move(rs);
  }
  return out;
}

Waveform transmit(const ScmPlan& plan, std::span<const SymbolFrame> frames,
                  double power_per_subcarrier) {
  if (frames.size() != static_cast<std::size_t>(plan.n_channels)) {
    throw InvalidArgument("transmit: one SymbolFrame per channel required");
  }
  const auto taps = rrc_taps(plan.rolloff, plan.filter_span, plan.tx_sps);
  std::vector<Waveform> parts;
  parts.reserve(static_cast<std::size_t>(plan.n_total_subcarriers()));
  for (int c = 0; c < plan.n_channels; ++c) {
    const auto& f = frames[static_cast<std::size_t>(c)];
    if (f.n_subcarriers != static_cast<std::size_t>(plan.n_subcarriers)) {
      throw InvalidArgument("transmit: frame subcarrier count does not match plan");
    }
    for (int j = 0; j < plan.n_subcarriers; ++j) {
      const auto sc = static_cast<std::size_t>(j);
      parts.push_back(modulate(f.stream(sc, 0), f.stream(sc, 1), taps, plan.tx_sps,
                               plan.subcarrier_baud, power_per_subcarrier, plan.rolloff));
    }
  }
  return assemble(plan, parts);
}

}  // namespace nlpn
