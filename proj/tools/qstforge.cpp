#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "qstforge/cli_app.hpp"

namespace {

struct CommonArgs {
  std::string job_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
  bool quiet = false;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--job", args.job_file, "job spec JSON file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides job output_dir)");
  cmd->add_option("--seed", args.seed, "top-level RNG seed (overrides job seed)")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "worker threads (0 = machine parallelism)")
      ->each([&](const std::string&) { args.threads_set = true; });
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qstforge: coupling optimization and diagnostics for 2D qubit networks"};
  app.require_subcommand(1);

  const char* subcommands[] = {"anneal", "evolve", "spectrum", "noise",
                               "thermal", "qsl", "transport", "run"};
  const char* descriptions[] = {
      "optimize couplings for a state transfer",
      "evolve a state and emit the fidelity time series",
      "gap-ratio and participation-ratio diagnostics",
      "coupling/frequency noise sensitivity sweep",
      "thermal-population infidelity with size extrapolation",
      "quantum-speed-limit report and bound curves",
      "Fock-space transport series",
      "dispatch on the job file's command field"};

  CommonArgs args;
  for (int i = 0; i < 8; ++i) attach_common(app.add_subcommand(subcommands[i], descriptions[i]), args);

  CLI11_PARSE(app, argc, argv);

  std::string command = app.get_subcommands().front()->get_name();
  if (command == "run") command.clear();

  qstforge::cli::Overrides overrides;
  if (!args.out_dir.empty()) overrides.out_dir = args.out_dir;
  if (args.seed_set) overrides.seed = args.seed;
  if (args.threads_set) {
    overrides.threads = args.threads;
  } else if (const char* env = std::getenv("QSTFORGE_THREADS")) {
    overrides.threads = std::atoi(env);
  }
  overrides.quiet = args.quiet;

  return qstforge::cli::run_job_file(args.job_file, command, overrides);
}
