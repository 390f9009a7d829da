#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nlpn/config.hpp"
#include "nlpn/rxdsp.hpp"

namespace nlpn {

/// Library version string baked in at build time.
std::string version();

/// Progress sink; the CLI prints these lines to stderr.
using LogFn = std::function<void(const std::string&)>;

struct RunContext {
  std::filesystem::path out_dir;
  int threads = 1;
  LogFn log;
};

/// Empirical (SSFM, ASE off) vs analytic NLPN correlation. Writes per
/// ns<N>/<format>/: corr_vs_subcarrier.csv, corr_vs_spans.csv and the full
/// matrices. Returns the files written.
std::vector<std::filesystem::path> run_cov_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Q-factor vs launch power with and without phase equalization. Writes per
/// <format>/: q_vs_power.csv, q_best.csv and peak_gain.csv.
std::vector<std::filesystem::path> run_eq_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Analytic covariance plus the per-interferer Monte-Carlo check, no SSFM.
std::vector<std::filesystem::path> run_model_only(const ExperimentConfig& cfg, const RunContext& ctx);

/// One simulated link realization reduced to COI symbols at the requested
/// span counts.
struct LinkRun {
  std::vector<int> span_counts;
  std::vector<RxSymbols> rx;
};

/// Transmits random frames for every channel, propagates and receives the
/// COI at each span count in `span_counts` (ascending).
LinkRun simulate_link(const ScmPlan& plan, const LinkSpec& link, const StepPolicy& step,
                      const Constellation& c, std::size_t n_symbols, double power_per_subcarrier,
                      std::uint64_t symbol_seed, std::span<const int> span_counts);

}  // namespace nlpn
