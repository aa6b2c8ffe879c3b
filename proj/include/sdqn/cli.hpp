#pragma once

#include <string>
#include <vector>

#include "sdqn/rl.hpp"
#include "sdqn/theory.hpp"

// Command surface and configuration. Config files are flat key=value text
// with dotted sections ('#' comments); precedence is flags over file over
// defaults, and unknown keys are rejected. Every run writes the resolved
// key set to <out>/config.resolved, which reproduces the run when passed
// back through --config.

namespace sdqn {

struct RunConfig {
  std::string command;
  std::string env_name = "catch";
  std::string pbln_mode = "on";  // on | off | both (both: sweep-firing only)
  bool pbln_fc = false;
  std::string out_dir;  // empty: derived from SDQN_OUT_ROOT (or ./runs)
  std::uint64_t seed = 1;

  // network
  std::string conv_stack;     // e.g. "c8k3s1-c16k3s2"; empty: per-command default
  std::size_t fc_width = 0;   // 0: per-command default
  std::size_t time_window = 16;
  std::size_t n_stack = 4;
  LifParams lif;

  TrainConfig train;
  LemmaConfig lemma;

  std::size_t sweep_seeds = 10;
  std::size_t sweep_obs = 32;
  double sweep_gain = 6.0;

  std::string checkpoint;  // eval input
  std::size_t eval_episodes = 100;
};

// Applies one key=value assignment; throws with the key path on unknown keys
// or malformed values.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

// All known keys with their current values, in registry order.
std::vector<std::pair<std::string, std::string>> dump_keys(const RunConfig& cfg);

// defaults <- file (optional) <- overrides, in that order.
RunConfig load_run_config(const std::string& command, const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

// Parses "c8k3s1-c16k3s2"-style conv stack descriptions (optional pN padding
// suffix per layer).
std::vector<ConvSpec> parse_conv_stack(const std::string& text, std::size_t in_channels);

// Architecture for the train/eval commands (small stack unless overridden).
Architecture build_train_arch(const RunConfig& cfg, const Env& env);

// Architecture for sweep-firing (three-conv stack unless overridden).
Architecture build_sweep_arch(const RunConfig& cfg, const Env& env);

// Dispatches the command, writes artifacts under the output directory, and
// returns the process exit status (nonzero when a verification fails).
int run(RunConfig cfg);

}  // namespace sdqn
