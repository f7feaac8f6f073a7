#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "kfsi/runmodes.hpp"

namespace {

void print_report(const kfsi::RunReport& rep) {
  for (const auto& c : rep.checks)
    std::printf("[%s] %-40s value=%.3e threshold=%.3e\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.value, c.threshold);
  if (!rep.message.empty()) std::printf("%s\n", rep.message.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel flow interacting with a clamped elastic top wall: regularized "
               "Galerkin solver with Picard coupling and epsilon continuation"};

  std::string config_path, mode, checkpoint_path, outdir = "out";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "configuration file (INI-style)");
  app.add_option("--mode", mode, "identity-suite|decoupled|coupled|continuation|verify")
      ->required();
  app.add_option("--checkpoint", checkpoint_path, "checkpoint path (verify / coupled restart)");
  app.add_option("--out", outdir, "output directory");
  app.add_option("--seed", seed, "seed for randomized suites");

  CLI11_PARSE(app, argc, argv);

  try {
    kfsi::RunConfig cfg =
        config_path.empty() ? kfsi::RunConfig{} : kfsi::RunConfig::from_file(config_path);
    if (config_path.empty()) cfg.validate();

    kfsi::RunReport rep;
    if (mode == "identity-suite") {
      rep = kfsi::run_identity_suite(cfg, outdir, seed);
    } else if (mode == "decoupled") {
      rep = kfsi::run_decoupled(cfg, outdir);
    } else if (mode == "coupled") {
      rep = kfsi::run_coupled(cfg, outdir, checkpoint_path);
    } else if (mode == "continuation") {
      rep = kfsi::run_continuation(cfg, outdir);
    } else if (mode == "verify") {
      if (checkpoint_path.empty()) {
        std::fprintf(stderr, "verify mode needs --checkpoint\n");
        return kfsi::kExitConfigError;
      }
      rep = kfsi::run_verify(cfg, checkpoint_path, outdir);
    } else {
      std::fprintf(stderr, "unknown mode '%s'\n", mode.c_str());
      return kfsi::kExitConfigError;
    }
    print_report(rep);
    return rep.exit_code;
  } catch (const kfsi::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kfsi::kExitConfigError;
  } catch (const kfsi::FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kfsi::kExitConfigError;
  } catch (const kfsi::HorizonExceeded& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kfsi::kExitNumericalFailure;
  } catch (const kfsi::SolverError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kfsi::kExitNumericalFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kfsi::kExitNumericalFailure;
  }
}
