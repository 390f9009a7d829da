#include "nlpn/channel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace nlpn {
namespace {

// Per-step operator exp(i·β₂/2·ω²·h - α/2·h) on the waveform's bin grid.
CVec dispersion_operator(std::size_t n, double fs, double center, double beta2, double alpha,
                         double h) {
  CVec op(n);
  const double loss = std::exp(-0.5 * alpha * h);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = kTwoPi * (bin_frequency(k, n, fs) + center);
    op[k] = std::polar(loss, 0.5 * beta2 * w * w * h);
  }
  return op;
}

void apply_operator(CVec& x, const CVec& op) {
  fft_inplace(x);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] *= op[k] * inv_n;
  fft_plan(x.size(), FftDirection::kBackward)->execute(x);
}

void apply_nonlinear(Waveform& w, double coeff_times_h) {
  auto& x = w.pol[0];
  auto& y = w.pol[1];
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double phase = coeff_times_h * (std::norm(x[k]) + std::norm(y[k]));
    const cd rot = std::polar(1.0, phase);
    x[k] *= rot;
    y[k] *= rot;
  }
}

}  // namespace

void FiberSpec::validate() const {
  if (!(alpha_db_per_km >= 0.0)) throw InvalidArgument("fiber: alpha must be >= 0");
  if (!(span_length_km > 0.0)) throw InvalidArgument("fiber: span length must be > 0");
  if (!std::isfinite(beta2_ps2_per_km) || !std::isfinite(gamma_per_w_km)) {
    throw InvalidArgument("fiber: non-finite beta2/gamma");
  }
}

void LinkSpec::validate() const {
  fiber.validate();
  if (n_spans < 0) throw InvalidArgument("link: n_spans must be >= 0");
}

std::vector<double> span_steps(const FiberSpec& f, const StepPolicy& policy, double p0) {
  const double length = f.span_length_m();
  if (policy.uniform_steps > 0) {
    return std::vector<double>(static_cast<std::size_t>(policy.uniform_steps),
                               length / policy.uniform_steps);
  }
  if (policy.min_steps_per_span < 1 || !(policy.max_nl_phase > 0.0)) {
    throw InvalidArgument("step policy: need min_steps_per_span >= 1 and max_nl_phase > 0");
  }
  const double coeff = kManakov * f.gamma_per_w_m() * p0;
  const double alpha = f.alpha_per_m();
  const double h_max = length / policy.min_steps_per_span;

  // Steps are h_max / 2^l; positions are tracked in integer units of the
  // finest level so the span is tiled exactly.
  int levels = 0;
  while (coeff * h_max / std::ldexp(1.0, levels) > policy.max_nl_phase && levels < 40) ++levels;
  const long long total_units = static_cast<long long>(policy.min_steps_per_span) << levels;
  const double unit = length / static_cast<double>(total_units);

  std::vector<double> steps;
  long long z = 0;
  while (z < total_units) {
    const double local = coeff * std::exp(-alpha * static_cast<double>(z) * unit);
    long long h = 1;
    for (int l = 0; l <= levels; ++l) {
      const long long cand = 1LL << (levels - l);
      if (z + cand <= total_units && local * static_cast<double>(cand) * unit <= policy.max_nl_phase) {
        h = cand;
        break;
      }
    }
    steps.push_back(static_cast<double>(h) * unit);
    z += h;
  }
  return steps;
}

Waveform apply_dispersion(Waveform w, double beta2, double length_m, double alpha) {
  if (length_m == 0.0 && alpha == 0.0) return w;
  const CVec op = dispersion_operator(w.size(), w.sample_rate, w.center_freq_offset, beta2, alpha,
                                      length_m);
  for (auto& p : w.pol) apply_operator(p, op);
  return w;
}

Waveform propagate_span(Waveform w, const FiberSpec& f, const StepPolicy& policy) {
  f.validate();
  const double alpha = f.alpha_per_m();
  const double beta2 = f.beta2_s2_per_m();
  const double gamma = f.gamma_per_w_m();
  if (gamma == 0.0) return apply_dispersion(std::move(w), beta2, f.span_length_m(), alpha);

  const double p0 = w.mean_power();
  const auto steps = span_steps(f, policy, p0);

  double z = 0.0;
  double worst = 0.0;
  for (double h : steps) {
    worst = std::max(worst, kManakov * std::abs(gamma) * p0 * std::exp(-alpha * z) * h);
    z += h;
  }
  if (worst > policy.guard_nl_phase) {
    throw NumericFailure("propagate_span: per-step nonlinear phase " + std::to_string(worst) +
                         " rad exceeds the accuracy guard");
  }

  // Operators are cached by their length; the step ladder yields few
  // distinct values.
  std::map<long long, CVec> cache;
  const double quantum = f.span_length_m() * 1e-12;
  auto op_for = [&](double length) -> const CVec& {
    const long long key = std::llround(length / quantum);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, dispersion_operator(w.size(), w.sample_rate, w.center_freq_offset,
                                                  beta2, alpha, length))
               .first;
    }
    return it->second;
  };

  const double coeff = kManakov * gamma;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double lin = (i == 0) ? 0.5 * steps[0] : 0.5 * (steps[i - 1] + steps[i]);
    const CVec& op = op_for(lin);
    for (auto& p : w.pol) apply_operator(p, op);
    apply_nonlinear(w, coeff * steps[i]);
  }
  const CVec& last = op_for(0.5 * steps.back());
  for (auto& p : w.pol) apply_operator(p, last);
  return w;
}

double ase_psd(double gain_lin, double nf_db) {
  if (gain_lin <= 1.0) return 0.0;
  const double nsp = db_to_lin(nf_db) * gain_lin / (2.0 * (gain_lin - 1.0));
  return nsp * kPlanck * kCarrierFrequencyHz * (gain_lin - 1.0);
}

Waveform amplify(Waveform w, double gain_db, double nf_db, bool ase_enabled, std::uint64_t seed) {
  if (gain_db < 0.0) throw InvalidArgument("amplify: gain must be >= 0 dB");
  const double g = db_to_lin(gain_db);
  const double field = std::sqrt(g);
  for (auto& p : w.pol) {
    for (auto& v : p) v *= field;
  }
  if (!ase_enabled) return w;
  const double psd = ase_psd(g, nf_db);
  if (psd == 0.0) return w;
  const double sigma = std::sqrt(0.5 * psd * w.sample_rate);
  for (int p = 0; p < 2; ++p) {
    std::mt19937_64 rng(derive_seed(seed, 0xA5E, static_cast<std::uint64_t>(p)));
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& v : w.pol[p]) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cd(re, im);
    }
  }
  return w;
}

Waveform propagate_link(Waveform w, const LinkSpec& link, const StepPolicy& policy,
                        const SpanObserver& observer) {
  link.validate();
  for (int s = 0; s < link.n_spans; ++s) {
    w = propagate_span(std::move(w), link.fiber, policy);
    w = amplify(std::move(w), link.fiber.span_loss_db(), link.amp_noise_figure_db, link.ase_enabled,
                derive_seed(link.ase_seed, static_cast<std::uint64_t>(s)));
    if (observer) observer(s + 1, w);
  }
  return w;
}

}  // namespace nlpn
