#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlpn/analytic.hpp"
#include "nlpn/channel.hpp"
#include "nlpn/constellation.hpp"
#include "nlpn/equalize.hpp"
#include "nlpn/signal.hpp"

namespace nlpn {

/// Schema violation; `path` is the dotted key path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct FormatSpec {
  std::string name;
  int order = 64;
  /// Maxwell-Boltzmann target entropy in bits; 0 keeps the uniform law.
  double entropy_bits = 0.0;

  Constellation build() const;
};

struct PlanSpec {
  int n_channels = 5;
  std::vector<int> n_subcarriers{8};
  double rolloff = 0.1;
  double total_baud = 32e9;
  double channel_spacing = 50e9;
  double rate_margin = 1.25;
  /// 0 picks the smallest 5-smooth value meeting rate_margin.
  int samples_per_symbol = 0;
  int filter_span = 64;
  int tx_sps = 2;

  ScmPlan make(int n_sc) const;
};

struct ExperimentConfig {
  PlanSpec plan;
  LinkSpec link;
  std::vector<FormatSpec> formats{{"64qam", 64, 0.0}};
  std::vector<double> power_dbm_per_channel{0.0};
  /// Symbols per subcarrier keyed by subcarrier count; key 0 is the default.
  std::map<int, std::size_t> symbols{{0, 32768}};
  std::uint64_t symbol_seed = 1;
  std::uint64_t ase_seed = 2;
  std::uint64_t bootstrap_seed = 7;
  StepPolicy step;
  std::vector<int> span_checkpoints;
  int bootstrap_replicates = 200;
  std::size_t bootstrap_block = 1024;
  std::vector<double> lambdas{0.9, 0.95, 0.98, 0.99, 0.995, 0.999};
  std::vector<EqMode> modes{EqMode::kIndividual, EqMode::kJoint};
  std::size_t warmup = 500;
  InterfererSet interferer_set = InterfererSet::kAll;
  TensorOptions tensor;
  std::size_t mc_symbols = 1000000;
  std::uint64_t mc_seed = 11;
  std::vector<InterfererId> mc_interferers;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  std::size_t symbols_for(int n_sc) const;
  /// Consistency checks that span several sections.
  void validate() const;
};

/// Parses the JSON config text. Unknown keys and type errors raise
/// ConfigError naming the field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the effective configuration (sorted keys).
std::string effective_config_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Applies --seed-override: every seed is derived from `seed`.
void override_seeds(ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace nlpn
