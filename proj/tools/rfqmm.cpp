// rfqmm: simulate markets, train and evaluate quoting agents, inspect
// regime chains. Exit status 0 ok, 2 config, 3 numeric, 4 I/O.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rfqmm/cli_io.hpp"

namespace {

struct Flags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::string out;
  bool deterministic = false;
  std::vector<std::string> checkpoints;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--preset", f.preset, "baseline, neg_init, pos_init, neg_Q, pos_Q or custom");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--episodes", f.episodes, "episodes or paths per batch");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--deterministic", f.deterministic, "single-threaded, bit-reproducible run");
}

int run(const std::string& name, const Flags& f) {
  using namespace rfqmm::cli;
  Overrides ov;
  if (!f.preset.empty()) ov.preset = f.preset;
  ov.seed = f.seed;
  ov.episodes = f.episodes;
  if (!f.out.empty()) ov.out = f.out;
  ov.deterministic = f.deterministic;
  ov.checkpoints = f.checkpoints;
  std::optional<std::filesystem::path> file;
  if (!f.config.empty()) file = f.config;
  const RunConfig c = load_config(file, ov);
  if (name == "simulate") return cmd_simulate(c);
  if (name == "train") return cmd_train(c);
  if (name == "evaluate") return cmd_evaluate(c);
  if (name == "stationary") return cmd_stationary(c);
  return cmd_symmetry(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RFQ market-making simulator and PPO trainer"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "agent-free regime and price paths"},
      {"train", "PPO training, writes a checkpoint"},
      {"evaluate", "evaluate one checkpoint over a batch of episodes"},
      {"stationary", "stationary distribution of the regime chain"},
      {"symmetry", "compare a preset with its mirror image"}};
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    if (std::string(name) == "evaluate" || std::string(name) == "symmetry")
      cmd->add_option("--checkpoint", flags.checkpoints, "checkpoint directory (symmetry: two)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(rfqmm::ExitCode::kConfig);
  }
  try {
    return run(app.get_subcommands().front()->get_name(), flags);
  } catch (const rfqmm::Error& e) {
    std::cerr << "rfqmm: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "rfqmm: " << e.what() << "\n";
    return static_cast<int>(rfqmm::ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "rfqmm: " << e.what() << "\n";
    return static_cast<int>(rfqmm::ExitCode::kNumeric);
  }
}
