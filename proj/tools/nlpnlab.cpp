// Command-line front end: cov | eq | model | validate.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nlpn/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericFailure = 3, kOtherError = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlated nonlinear phase noise lab"};
  app.set_version_flag("--version", nlpn::version());
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub, bool runs) {
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    if (!runs) return;
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", threads, "worker threads (overrides threads)")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", seed, "derive every seed from this value");
    sub->add_flag("-q,--quiet", quiet, "no progress output");
  };
  CLI::App* cov = app.add_subcommand("cov", "SSFM vs analytic NLPN correlation");
  CLI::App* eq = app.add_subcommand("eq", "Q-factor vs launch power with phase equalization");
  CLI::App* model = app.add_subcommand("model", "analytic covariance and Monte-Carlo check only");
  CLI::App* validate = app.add_subcommand("validate", "check a config and print its effective form");
  add_common(cov, true);
  add_common(eq, true);
  add_common(model, true);
  add_common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    nlpn::ExperimentConfig cfg = nlpn::load_config(config_path);
    if (seed) nlpn::override_seeds(cfg, *seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (threads > 0) cfg.threads = threads;

    if (validate->parsed()) {
      std::cout << nlpn::effective_config_json(cfg);
      std::cerr << "config ok, hash " << nlpn::config_hash(cfg) << '\n';
      return kOk;
    }

    const auto start = std::chrono::steady_clock::now();
    nlpn::RunContext ctx{cfg.output_dir, cfg.threads, nullptr};
    if (!quiet) {
      ctx.log = [start](const std::string& s) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "[%8.1fs] %s\n", t, s.c_str());
      };
    }
    std::vector<std::filesystem::path> files;
    if (cov->parsed()) files = nlpn::run_cov_experiment(cfg, ctx);
    if (eq->parsed()) files = nlpn::run_eq_experiment(cfg, ctx);
    if (model->parsed()) files = nlpn::run_model_only(cfg, ctx);
    if (!quiet) {
      for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
    }
    return kOk;
  } catch (const nlpn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlpn::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlpn::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOtherError;
  }
}
