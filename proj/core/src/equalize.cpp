#include "nlpn/equalize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace nlpn {

double rls_phase_step(RlsPhaseState& st, cd s, cd ref) {
  if (!(st.lambda > 0.0 && st.lambda <= 1.0)) throw InvalidArgument("rls: lambda must be in (0, 1]");
  st.num = st.lambda * st.num + ref * std::conj(s);
  st.den = st.lambda * st.den + std::norm(s);
  if (st.den > 0.0) st.w = st.num / st.den;
  return st.phase();
}

double joint_combine(std::span<const double> phi_hats, double fallback) {
  if (phi_hats.empty()) throw InvalidArgument("joint_combine: no estimates");
  if (phi_hats.size() == 1) return phi_hats.front();
  cd sum{};
  for (double p : phi_hats) sum += std::polar(1.0, p);
  if (std::abs(sum) < 1e-12 * static_cast<double>(phi_hats.size())) return fallback;
  return std::arg(sum);
}

std::string to_string(EqMode m) {
  switch (m) {
    case EqMode::kNone: return "none";
    case EqMode::kIndividual: return "individual";
    case EqMode::kJoint: return "joint";
  }
  return "none";
}

EqMode parse_eq_mode(const std::string& s) {
  if (s == "none") return EqMode::kNone;
  if (s == "individual") return EqMode::kIndividual;
  if (s == "joint") return EqMode::kJoint;
  throw InvalidArgument("unknown equalizer mode '" + s + "'");
}

EqFrameResult equalize_frame(const RxSymbols& rx, const Constellation& c, const EqOptions& opt) {
  const std::size_t ns = rx.n_subcarriers;
  const std::size_t n = rx.n_symbols;
  if (ns == 0 || rx.s.size() != ns * 2 * n) throw InvalidArgument("equalize_frame: malformed input");
  EqFrameResult out;
  out.corrected = rx;
  out.decided.assign(rx.s.size(), 0);

  std::vector<RlsPhaseState> st(ns);
  std::vector<double> phi(ns);
  std::vector<double> theta(ns);
  std::size_t errors = 0;
  std::size_t bits = 0;
  std::size_t counted = 0;
  double err = 0.0;
  double ref_energy = 0.0;
  const auto& labels = c.labels();

  for (int p = 0; p < 2; ++p) {
    for (auto& s : st) s = RlsPhaseState{.lambda = opt.lambda};
    double combined = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < ns; ++j) phi[j] = st[j].phase();
      if (opt.mode == EqMode::kJoint) {
        combined = joint_combine(phi, combined);
        std::fill(theta.begin(), theta.end(), combined);
      } else {
        theta = phi;
      }
      for (std::size_t j = 0; j < ns; ++j) {
        const std::size_t i = rx.offset(j, p) + k;
        const cd s = rx.s[i];
        cd y = s;
        if (opt.mode != EqMode::kNone) y = s * std::polar(st[j].magnitude(), -theta[j]);
        const std::size_t d = c.decide(y);
        out.corrected.s[i] = y;
        out.decided[i] = static_cast<std::uint16_t>(d);
        if (opt.mode != EqMode::kNone) {
          const cd ref = k < opt.warmup ? rx.a[i] : c.points()[d];
          rls_phase_step(st[j], s, ref);
        }
        if (k >= opt.warmup) {
          if (!labels.empty()) errors += static_cast<std::size_t>(std::popcount(labels[rx.tx_index[i]] ^ labels[d]));
          err += std::norm(y - rx.a[i]);
          ref_energy += std::norm(rx.a[i]);
          ++counted;
        }
      }
    }
  }
  bits = counted * static_cast<std::size_t>(c.bits_per_symbol());
  out.metrics = finalize_metrics(errors, bits, err, ref_energy, counted, c);
  return out;
}

SweepResult sweep_forgetting(const RxSymbols& rx, const Constellation& c, std::span<const double> lambdas,
                             EqMode mode, std::size_t warmup) {
  if (lambdas.empty()) throw InvalidArgument("sweep_forgetting: empty lambda grid");
  SweepResult r;
  bool first = true;
  for (double l : lambdas) {
    const auto res = equalize_frame(rx, c, {.lambda = l, .mode = mode, .warmup = warmup});
    r.curve.push_back({l, res.metrics});
    const double q = res.metrics.q_db;
    if (first || q > r.best.q_db || (q == r.best.q_db && l > r.best_lambda)) {
      r.best_lambda = l;
      r.best = res.metrics;
      first = false;
    }
  }
  return r;
}

EqReport make_report(EqMode mode, std::vector<double> power_dbm, std::vector<double> q_db,
                     std::vector<double> lambda) {
  if (power_dbm.empty() || power_dbm.size() != q_db.size() || lambda.size() != q_db.size()) {
    throw InvalidArgument("make_report: inconsistent curve");
  }
  EqReport r;
  r.mode = mode;
  const auto it = std::max_element(q_db.begin(), q_db.end());
  r.peak_q_db = *it;
  r.peak_power_dbm = power_dbm[static_cast<std::size_t>(it - q_db.begin())];
  r.power_dbm = std::move(power_dbm);
  r.q_db = std::move(q_db);
  r.lambda = std::move(lambda);
  return r;
}

}  // namespace nlpn
