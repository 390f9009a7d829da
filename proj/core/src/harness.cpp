#include "nlpn/harness.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "nlpn/csv.hpp"
#include "nlpn/parallel.hpp"

#ifndef NLPN_VERSION
#define NLPN_VERSION "dev"
#endif

namespace nlpn {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return format_double(v); }

class Logger {
 public:
  explicit Logger(LogFn fn) : fn_(std::move(fn)) {}
  void operator()(const std::string& s) const {
    if (!fn_) return;
    std::lock_guard lock(mutex_);
    fn_(s);
  }

 private:
  LogFn fn_;
  mutable std::mutex mutex_;
};

Provenance provenance(const ExperimentConfig& cfg, std::vector<std::string> extra = {}) {
  return {version(), config_hash(cfg), cfg.symbol_seed, std::move(extra)};
}

void write_config_echo(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "effective_config.json", std::ios::binary);
  os << effective_config_json(cfg);
}

fs::path write_matrix(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_matrix_csv(os, m, meta);
  return path;
}

std::string cell_label(int n_sc, const std::string& format) {
  return "n_subcarriers=" + std::to_string(n_sc) + " format=" + format;
}

double per_subcarrier_watt(double dbm_per_channel, int n_sc) { return dbm_to_watt(dbm_per_channel) / n_sc; }

}  // namespace

std::string version() { return NLPN_VERSION; }

LinkRun simulate_link(const ScmPlan& plan, const LinkSpec& link, const StepPolicy& step, const Constellation& c,
                      std::size_t n_symbols, double power_per_subcarrier, std::uint64_t symbol_seed,
                      std::span<const int> span_counts) {
  if (span_counts.empty() || !std::is_sorted(span_counts.begin(), span_counts.end()) ||
      span_counts.front() < 0 || span_counts.back() > link.n_spans) {
    throw InvalidArgument("simulate_link: span counts must be ascending within the link");
  }
  std::vector<SymbolFrame> frames;
  for (int ch = 0; ch < plan.n_channels; ++ch) {
    frames.push_back(draw_symbols(c, static_cast<std::size_t>(plan.n_subcarriers), n_symbols,
                                  derive_seed(symbol_seed, static_cast<std::uint64_t>(ch)), plan.subcarrier_baud));
  }
  const SymbolFrame& coi = frames[static_cast<std::size_t>(plan.coi_index)];

  LinkRun run;
  auto receive = [&](int spans, const Waveform& w) {
    LinkSpec partial = link;
    partial.n_spans = spans;
    const auto streams = demux_all(cd_compensate(w, partial), plan);
    run.span_counts.push_back(spans);
    run.rx.push_back(normalize_gain(streams, coi));
  };

  Waveform w = transmit(plan, frames, power_per_subcarrier);
  std::size_t next = 0;
  while (next < span_counts.size() && span_counts[next] == 0) {
    receive(0, w);
    ++next;
  }
  if (next == span_counts.size()) return run;
  LinkSpec limited = link;
  limited.n_spans = span_counts.back();
  propagate_link(std::move(w), limited, step, [&](int spans, const Waveform& cur) {
    while (next < span_counts.size() && span_counts[next] == spans) {
      receive(spans, cur);
      ++next;
    }
  });
  return run;
}

std::vector<fs::path> run_cov_experiment(const ExperimentConfig& cfg_in, const RunContext& ctx) {
  ExperimentConfig cfg = cfg_in;
  cfg.link.ase_enabled = false;  // correlation runs isolate NLPN
  cfg.validate();
  const Logger log(ctx.log);
  if (cfg.power_dbm_per_channel.size() != 1) {
    throw ConfigError("power.dbm_per_channel", "cov runs take exactly one launch power");
  }
  const double p_dbm = cfg.power_dbm_per_channel.front();
  write_config_echo(cfg, ctx.out_dir);
  std::vector<fs::path> files{ctx.out_dir / "effective_config.json"};

  // Analytic sums depend only on the plan and link; formats enter through M.
  std::vector<std::vector<NlpnSums>> sums(cfg.plan.n_subcarriers.size());
  for (std::size_t i = 0; i < cfg.plan.n_subcarriers.size(); ++i) {
    const int n_sc = cfg.plan.n_subcarriers[i];
    log("analytic sums for " + std::to_string(n_sc) + " subcarriers");
    const InteractionModel model(cfg.plan.make(n_sc), cfg.link, cfg.tensor);
    sums[i] = nlpn_sums(model, cfg.interferer_set, cfg.span_checkpoints, ctx.threads);
  }

  struct Cell {
    std::size_t plan_index;
    std::size_t format_index;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < cfg.plan.n_subcarriers.size(); ++i) {
    for (std::size_t f = 0; f < cfg.formats.size(); ++f) cells.push_back({i, f});
  }
  std::vector<std::vector<fs::path>> written(cells.size());

  parallel_for(cells.size(), ctx.threads, [&](std::size_t ci) {
    const Cell cell = cells[ci];
    const int n_sc = cfg.plan.n_subcarriers[cell.plan_index];
    const FormatSpec& fmt_spec = cfg.formats[cell.format_index];
    const Constellation c = fmt_spec.build();
    const ScmPlan plan = cfg.plan.make(n_sc);
    const double p_sc = per_subcarrier_watt(p_dbm, n_sc);
    const std::size_t n_sym = cfg.symbols_for(n_sc);
    log("cov cell: " + cell_label(n_sc, fmt_spec.name));

    const LinkRun run = simulate_link(plan, cfg.link, cfg.step, c, n_sym, p_sc,
                                      derive_seed(cfg.symbol_seed, static_cast<std::uint64_t>(n_sc)),
                                      cfg.span_checkpoints);
    const EmpiricalCovOptions eopt{cfg.bootstrap_block, cfg.bootstrap_replicates, cfg.bootstrap_seed, 10000};
    std::vector<CovarianceMatrix> emp;
    std::vector<CovarianceMatrix> ana;
    for (std::size_t k = 0; k < run.rx.size(); ++k) {
      emp.push_back(empirical_cov(extract_nlpn(run.rx[k]), eopt));
      ana.push_back(covariance_from_sums(sums[cell.plan_index][k], kurtosis(c), p_sc));
    }

    const fs::path dir = ctx.out_dir / ("ns" + std::to_string(n_sc)) / fmt_spec.name;
    fs::create_directories(dir);
    const auto meta = provenance(cfg, {cell_label(n_sc, fmt_spec.name) + " power_dbm_per_channel=" + fmt(p_dbm) +
                                       " kurtosis=" + fmt(kurtosis(c))})
                          .lines();
    auto& out = written[ci];

    const CovarianceMatrix& e_last = emp.back();
    const CovarianceMatrix& a_last = ana.back();
    const Eigen::MatrixXd ce = e_last.correlation();
    const Eigen::MatrixXd ca = a_last.correlation();
    {
      CsvWriter w(dir / "corr_vs_subcarrier.csv", meta,
                  {"subcarrier_index", "corr_empirical", "corr_analytic", "stderr"});
      for (int j = 0; j < n_sc; ++j) {
        w.cell(j + 1).cell(ce(0, j)).cell(ca(0, j)).cell(e_last.corr_stderr(0, j));
        w.end_row();
      }
      out.push_back(dir / "corr_vs_subcarrier.csv");
    }
    {
      CsvWriter w(dir / "corr_vs_spans.csv", meta, {"n_spans", "pair", "corr_empirical", "corr_analytic", "stderr"});
      if (n_sc > 1) {
        for (std::size_t k = 0; k < emp.size(); ++k) {
          const Eigen::MatrixXd e = emp[k].correlation();
          const Eigen::MatrixXd a = ana[k].correlation();
          w.cell(run.span_counts[k]).cell("adjacent").cell(e(0, 1)).cell(a(0, 1)).cell(emp[k].corr_stderr(0, 1));
          w.end_row();
          w.cell(run.span_counts[k]).cell("farthest").cell(e(0, n_sc - 1)).cell(a(0, n_sc - 1)).cell(emp[k].corr_stderr(0, n_sc - 1));
          w.end_row();
        }
      }
      out.push_back(dir / "corr_vs_spans.csv");
    }
    out.push_back(write_matrix(dir / "corr_empirical.csv", ce, meta));
    out.push_back(write_matrix(dir / "corr_analytic.csv", ca, meta));
    out.push_back(write_matrix(dir / "corr_stderr.csv", e_last.corr_stderr, meta));
    out.push_back(write_matrix(dir / "cov_empirical.csv", e_last.cov, meta));
    out.push_back(write_matrix(dir / "cov_empirical_pol0.csv", e_last.per_pol[0], meta));
    out.push_back(write_matrix(dir / "cov_empirical_pol1.csv", e_last.per_pol[1], meta));
    out.push_back(write_matrix(dir / "cov_analytic.csv", a_last.cov, meta));
    {
      CsvWriter w(dir / "mean_phase.csv", meta, {"subcarrier_index", "mean_empirical", "mean_analytic"});
      for (int j = 0; j < n_sc; ++j) {
        w.cell(j + 1).cell(e_last.mean(j)).cell(a_last.mean(j));
        w.end_row();
      }
      out.push_back(dir / "mean_phase.csv");
    }
  });
  for (auto& w : written) files.insert(files.end(), w.begin(), w.end());
  return files;
}

std::vector<fs::path> run_eq_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  const Logger log(ctx.log);
  write_config_echo(cfg, ctx.out_dir);
  std::vector<fs::path> files{ctx.out_dir / "effective_config.json"};

  struct Cell {
    std::size_t plan_index;
    std::size_t format_index;
    std::size_t power_index;
  };
  struct Result {
    QualityMetrics none;
    std::vector<SweepResult> sweeps;  // one per configured mode
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < cfg.plan.n_subcarriers.size(); ++i) {
    for (std::size_t f = 0; f < cfg.formats.size(); ++f) {
      for (std::size_t p = 0; p < cfg.power_dbm_per_channel.size(); ++p) cells.push_back({i, f, p});
    }
  }
  std::vector<Result> results(cells.size());

  parallel_for(cells.size(), ctx.threads, [&](std::size_t ci) {
    const Cell cell = cells[ci];
    const int n_sc = cfg.plan.n_subcarriers[cell.plan_index];
    const FormatSpec& fspec = cfg.formats[cell.format_index];
    const double p_dbm = cfg.power_dbm_per_channel[cell.power_index];
    const Constellation c = fspec.build();
    const ScmPlan plan = cfg.plan.make(n_sc);
    log("eq cell: " + cell_label(n_sc, fspec.name) + " power_dbm=" + fmt(p_dbm));

    // Symbols and ASE are common across the power grid so curves are smooth.
    LinkSpec link = cfg.link;
    link.ase_seed = derive_seed(cfg.ase_seed, static_cast<std::uint64_t>(n_sc), cell.format_index);
    const int spans[] = {link.n_spans};
    const LinkRun run = simulate_link(plan, link, cfg.step, c, cfg.symbols_for(n_sc), per_subcarrier_watt(p_dbm, n_sc),
                                      derive_seed(cfg.symbol_seed, static_cast<std::uint64_t>(n_sc), cell.format_index),
                                      spans);
    const RxSymbols& rx = run.rx.front();
    Result& r = results[ci];
    r.none = equalize_frame(rx, c, {.lambda = 1.0, .mode = EqMode::kNone, .warmup = cfg.warmup}).metrics;
    for (EqMode m : cfg.modes) {
      r.sweeps.push_back(m == EqMode::kNone ? SweepResult{0.0, r.none, {{0.0, r.none}}}
                                            : sweep_forgetting(rx, c, cfg.lambdas, m, cfg.warmup));
    }
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t f = 0; f < cfg.formats.size(); ++f) {
    const fs::path dir = ctx.out_dir / cfg.formats[f].name;
    fs::create_directories(dir);
    const auto meta = provenance(cfg, {"format=" + cfg.formats[f].name}).lines();
    CsvWriter q(dir / "q_vs_power.csv", meta, {"n_subcarriers", "mode", "lambda", "power_dBm", "q_dB"});
    CsvWriter best(dir / "q_best.csv", meta,
                   {"n_subcarriers", "mode", "power_dBm", "best_lambda", "q_dB", "ber", "lower_bound"});
    CsvWriter peak(dir / "peak_gain.csv", meta,
                   {"n_subcarriers", "individual_gain_dB", "joint_added_gain_dB", "unequalized_peak_q_dB",
                    "individual_peak_q_dB", "joint_peak_q_dB"});
    for (std::size_t i = 0; i < cfg.plan.n_subcarriers.size(); ++i) {
      const int n_sc = cfg.plan.n_subcarriers[i];
      std::vector<const Result*> row;
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        if (cells[ci].plan_index == i && cells[ci].format_index == f) row.push_back(&results[ci]);
      }
      // Unequalized reference.
      std::vector<double> q_none;
      for (std::size_t p = 0; p < row.size(); ++p) {
        q_none.push_back(row[p]->none.q_db);
        q.cell(n_sc).cell("none").cell(0.0).cell(cfg.power_dbm_per_channel[p]).cell(row[p]->none.q_db);
        q.end_row();
        best.cell(n_sc).cell("none").cell(cfg.power_dbm_per_channel[p]).cell(0.0).cell(row[p]->none.q_db);
        best.cell(row[p]->none.ber).cell(row[p]->none.lower_bound ? 1 : 0);
        best.end_row();
      }
      double peak_none = make_report(EqMode::kNone, cfg.power_dbm_per_channel, q_none,
                                     std::vector<double>(q_none.size(), 0.0))
                             .peak_q_db;
      double peak_ind = nan;
      double peak_joint = nan;
      for (std::size_t m = 0; m < cfg.modes.size(); ++m) {
        if (cfg.modes[m] == EqMode::kNone) continue;
        const std::string mode = to_string(cfg.modes[m]);
        std::vector<double> qb;
        std::vector<double> lb;
        for (std::size_t l = 0; l < cfg.lambdas.size(); ++l) {
          for (std::size_t p = 0; p < row.size(); ++p) {
            const auto& pt = row[p]->sweeps[m].curve[l];
            q.cell(n_sc).cell(mode).cell(pt.lambda).cell(cfg.power_dbm_per_channel[p]).cell(pt.metrics.q_db);
            q.end_row();
          }
        }
        for (std::size_t p = 0; p < row.size(); ++p) {
          const SweepResult& s = row[p]->sweeps[m];
          qb.push_back(s.best.q_db);
          lb.push_back(s.best_lambda);
          best.cell(n_sc).cell(mode).cell(cfg.power_dbm_per_channel[p]).cell(s.best_lambda).cell(s.best.q_db);
          best.cell(s.best.ber).cell(s.best.lower_bound ? 1 : 0);
          best.end_row();
        }
        const EqReport rep = make_report(cfg.modes[m], cfg.power_dbm_per_channel, qb, lb);
        (cfg.modes[m] == EqMode::kIndividual ? peak_ind : peak_joint) = rep.peak_q_db;
      }
      peak.cell(n_sc).cell(peak_ind - peak_none).cell(peak_joint - peak_ind).cell(peak_none).cell(peak_ind);
      peak.cell(peak_joint);
      peak.end_row();
    }
    files.push_back(dir / "q_vs_power.csv");
    files.push_back(dir / "q_best.csv");
    files.push_back(dir / "peak_gain.csv");
  }
  return files;
}

std::vector<fs::path> run_model_only(const ExperimentConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  const Logger log(ctx.log);
  write_config_echo(cfg, ctx.out_dir);
  std::vector<fs::path> files{ctx.out_dir / "effective_config.json"};
  const double p_dbm = cfg.power_dbm_per_channel.front();
  const int spans[] = {cfg.link.n_spans};

  CsvWriter summary(ctx.out_dir / "model_check.csv", provenance(cfg).lines(),
                    {"n_subcarriers", "format", "channel", "subcarrier", "K", "max_corr_diff", "max_var_rel_err",
                     "s1_rel_change_2K", "max_imag_phase"});
  files.push_back(ctx.out_dir / "model_check.csv");

  for (int n_sc : cfg.plan.n_subcarriers) {
    const ScmPlan plan = cfg.plan.make(n_sc);
    const InteractionModel model(plan, cfg.link, cfg.tensor);
    // Truncation check: entries outside the lag window are exactly zero, so
    // the window widens together with K.
    TensorOptions wide_opt = cfg.tensor;
    wide_opt.pulse_radius *= 2;
    wide_opt.window_radius *= 2;
    const InteractionModel wide(plan, cfg.link, wide_opt);
    log("model: analytic sums for " + std::to_string(n_sc) + " subcarriers");
    const NlpnSums sums = nlpn_sums(model, cfg.interferer_set, spans, ctx.threads).front();
    const double p_sc = per_subcarrier_watt(p_dbm, n_sc);

    // Per-interferer tensors are format independent.
    struct Pair {
      InterfererId id;
      std::vector<InteractionTensor> tensors;
      std::vector<InteractionTensor> doubled;
    };
    std::vector<Pair> pairs;
    for (const InterfererId& id : cfg.mc_interferers) {
      Pair p{id, {}, {}};
      const int k0 = cfg.tensor.K > 0 ? cfg.tensor.K : model.default_k(id, cfg.link.n_spans);
      for (int j = 0; j < n_sc; ++j) {
        if (id == InterfererId{plan.coi_index, j}) continue;
        p.tensors.push_back(model.tensors_at_spans(j, id, spans, k0).front());
        p.doubled.push_back(wide.tensors_at_spans(j, id, spans, 2 * k0).front());
      }
      if (!p.tensors.empty()) pairs.push_back(std::move(p));
    }

    for (const FormatSpec& fspec : cfg.formats) {
      const Constellation c = fspec.build();
      const double m = kurtosis(c);
      const fs::path dir = ctx.out_dir / ("ns" + std::to_string(n_sc)) / fspec.name;
      fs::create_directories(dir);
      const auto meta = provenance(cfg, {cell_label(n_sc, fspec.name) + " power_dbm_per_channel=" + fmt(p_dbm)}).lines();
      const CovarianceMatrix a = covariance_from_sums(sums, m, p_sc);
      files.push_back(write_matrix(dir / "cov_analytic.csv", a.cov, meta));
      files.push_back(write_matrix(dir / "corr_analytic.csv", a.correlation(), meta));

      for (const Pair& p : pairs) {
        const std::string tag = "mc_ch" + std::to_string(p.id.channel) + "_sc" + std::to_string(p.id.subcarrier);
        log("model: " + cell_label(n_sc, fspec.name) + " " + tag);
        const double p_pol = 0.5 * p_sc;
        const CovarianceMatrix sa = scalar_covariance(p.tensors, m, p_pol);
        const McOracleResult mc =
            mc_oracle(p.tensors, c, p_pol, cfg.mc_symbols,
                      derive_seed(cfg.mc_seed, static_cast<std::uint64_t>(n_sc),
                                  static_cast<std::uint64_t>(p.id.channel), static_cast<std::uint64_t>(p.id.subcarrier)));
        const Eigen::MatrixXd diff = mc.cov.correlation() - sa.correlation();
        double var_err = 0.0;
        for (Eigen::Index j = 0; j < sa.cov.rows(); ++j) {
          if (sa.cov(j, j) > 0.0) var_err = std::max(var_err, std::abs(mc.cov.cov(j, j) / sa.cov(j, j) - 1.0));
        }
        double s1_change = 0.0;
        for (std::size_t j = 0; j < p.tensors.size(); ++j) {
          const double s1 = s1_s2(p.tensors[j], p.tensors[j]).s1.real();
          const double s1d = s1_s2(p.doubled[j], p.doubled[j]).s1.real();
          if (s1 > 0.0) s1_change = std::max(s1_change, std::abs(s1d / s1 - 1.0));
        }
        const fs::path sub = dir / tag;
        fs::create_directories(sub);
        files.push_back(write_matrix(sub / "cov_analytic.csv", sa.cov, meta));
        files.push_back(write_matrix(sub / "cov_mc.csv", mc.cov.cov, meta));
        files.push_back(write_matrix(sub / "corr_analytic.csv", sa.correlation(), meta));
        files.push_back(write_matrix(sub / "corr_mc.csv", mc.cov.correlation(), meta));
        files.push_back(write_matrix(sub / "corr_diff.csv", diff, meta));
        summary.cell(n_sc).cell(fspec.name).cell(p.id.channel).cell(p.id.subcarrier).cell(p.tensors.front().K);
        summary.cell(diff.cwiseAbs().maxCoeff()).cell(var_err).cell(s1_change).cell(mc.max_imag);
        summary.end_row();
      }
    }
  }
  return files;
}

}  // namespace nlpn
