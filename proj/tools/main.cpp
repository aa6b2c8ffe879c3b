#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdqn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spiking deep Q network with potential-based layer normalization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seed, pbln, env_name, out_dir, frames;

  const std::vector<std::string> commands = {"train",        "eval",
                                             "verify-lemma", "verify-theorem",
                                             "verify-moments", "sweep-firing"};
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--pbln", pbln, "on|off|both")->check(CLI::IsMember({"on", "off", "both"}));
    sub->add_option("--env", env_name, "catch|gridview")
        ->check(CLI::IsMember({"catch", "gridview"}));
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--frames", frames, "training frame budget");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!seed.empty()) overrides.emplace_back("seed", seed);
  if (!pbln.empty()) overrides.emplace_back("pbln", pbln);
  if (!env_name.empty()) overrides.emplace_back("env", env_name);
  if (!out_dir.empty()) overrides.emplace_back("out", out_dir);
  if (!frames.empty()) overrides.emplace_back("train.total_frames", frames);

  try {
    sdqn::RunConfig cfg = sdqn::load_run_config(command, config_path, overrides);
    return sdqn::run(std::move(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
