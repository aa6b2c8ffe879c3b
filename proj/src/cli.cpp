#include "sdqn/cli.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace sdqn {

namespace {

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("key '" + key + "': expected on/off, got '" + v + "'");
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

std::string fmt_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::vector<KeySpec>& key_registry() {
  static const std::vector<KeySpec> registry = [] {
    std::vector<KeySpec> keys;
    auto add_str = [&](const std::string& name, std::string RunConfig::* field) {
      keys.push_back({name,
                      [field](RunConfig& c, const std::string& v) { c.*field = v; },
                      [field](const RunConfig& c) { return c.*field; }});
    };
    auto add_u64 = [&](const std::string& name, auto field) {
      keys.push_back({name,
                      [field, name](RunConfig& c, const std::string& v) {
                        c.*field = static_cast<std::remove_reference_t<decltype(c.*field)>>(
                            parse_u64(name, v));
                      },
                      [field](const RunConfig& c) {
                        return fmt_u64(static_cast<std::uint64_t>(c.*field));
                      }});
    };

    add_str("command", &RunConfig::command);
    add_str("env", &RunConfig::env_name);
    keys.push_back({"pbln",
                    [](RunConfig& c, const std::string& v) {
                      if (v != "on" && v != "off" && v != "both")
                        throw std::invalid_argument("key 'pbln': expected on/off/both, got '" +
                                                    v + "'");
                      c.pbln_mode = v;
                    },
                    [](const RunConfig& c) { return c.pbln_mode; }});
    keys.push_back({"pbln.fc",
                    [](RunConfig& c, const std::string& v) { c.pbln_fc = parse_bool("pbln.fc", v); },
                    [](const RunConfig& c) { return c.pbln_fc ? std::string("on") : std::string("off"); }});
    add_str("out", &RunConfig::out_dir);
    add_u64("seed", &RunConfig::seed);

    add_str("net.conv", &RunConfig::conv_stack);
    add_u64("net.fc_width", &RunConfig::fc_width);
    add_u64("net.time_window", &RunConfig::time_window);
    add_u64("net.stack", &RunConfig::n_stack);

    keys.push_back({"lif.tau",
                    [](RunConfig& c, const std::string& v) { c.lif.tau = parse_f64("lif.tau", v); },
                    [](const RunConfig& c) { return fmt_f64(c.lif.tau); }});
    keys.push_back({"lif.v_th",
                    [](RunConfig& c, const std::string& v) { c.lif.v_th = parse_f64("lif.v_th", v); },
                    [](const RunConfig& c) { return fmt_f64(c.lif.v_th); }});
    keys.push_back({"lif.v_reset",
                    [](RunConfig& c, const std::string& v) {
                      c.lif.v_reset = parse_f64("lif.v_reset", v);
                    },
                    [](const RunConfig& c) { return fmt_f64(c.lif.v_reset); }});

    auto add_train_f64 = [&](const std::string& name, double TrainConfig::* field) {
      keys.push_back({name,
                      [field, name](RunConfig& c, const std::string& v) {
                        c.train.*field = parse_f64(name, v);
                      },
                      [field](const RunConfig& c) { return fmt_f64(c.train.*field); }});
    };
    auto add_train_u64 = [&](const std::string& name, std::size_t TrainConfig::* field) {
      keys.push_back({name,
                      [field, name](RunConfig& c, const std::string& v) {
                        c.train.*field = static_cast<std::size_t>(parse_u64(name, v));
                      },
                      [field](const RunConfig& c) { return fmt_u64(c.train.*field); }});
    };
    add_train_f64("train.gamma", &TrainConfig::gamma);
    add_train_f64("train.lr", &TrainConfig::lr);
    add_train_u64("train.replay_capacity", &TrainConfig::replay_capacity);
    add_train_u64("train.batch_size", &TrainConfig::batch_size);
    add_train_u64("train.target_sync", &TrainConfig::target_sync);
    add_train_f64("train.eps_start", &TrainConfig::eps_start);
    add_train_f64("train.eps_end", &TrainConfig::eps_end);
    add_train_u64("train.eps_decay_frames", &TrainConfig::eps_decay_frames);
    add_train_u64("train.total_frames", &TrainConfig::total_frames);
    add_train_u64("train.train_period", &TrainConfig::train_period);
    add_train_u64("train.learn_start", &TrainConfig::learn_start);
    add_train_u64("train.eval_every", &TrainConfig::eval_every);
    add_train_u64("train.eval_episodes", &TrainConfig::eval_episodes);
    add_train_f64("train.early_stop_return", &TrainConfig::early_stop_return);
    add_train_f64("train.clip_norm", &TrainConfig::clip_norm);
    keys.push_back({"train.threads",
                    [](RunConfig& c, const std::string& v) {
                      c.train.n_threads = static_cast<int>(parse_u64("train.threads", v));
                    },
                    [](const RunConfig& c) {
                      return fmt_u64(static_cast<std::uint64_t>(
                          c.train.n_threads < 0 ? 0 : c.train.n_threads));
                    }});

    auto add_lemma_f64 = [&](const std::string& name, double LemmaConfig::* field) {
      keys.push_back({name,
                      [field, name](RunConfig& c, const std::string& v) {
                        c.lemma.*field = parse_f64(name, v);
                      },
                      [field](const RunConfig& c) { return fmt_f64(c.lemma.*field); }});
    };
    auto add_lemma_u64 = [&](const std::string& name, std::size_t LemmaConfig::* field) {
      keys.push_back({name,
                      [field, name](RunConfig& c, const std::string& v) {
                        c.lemma.*field = static_cast<std::size_t>(parse_u64(name, v));
                      },
                      [field](const RunConfig& c) { return fmt_u64(c.lemma.*field); }});
    };
    add_lemma_f64("lemma.k", &LemmaConfig::k);
    add_lemma_f64("lemma.p", &LemmaConfig::p);
    add_lemma_u64("lemma.t", &LemmaConfig::t);
    add_lemma_u64("lemma.trials", &LemmaConfig::trials);
    add_lemma_u64("lemma.fan_in", &LemmaConfig::fan_in);

    add_u64("sweep.seeds", &RunConfig::sweep_seeds);
    add_u64("sweep.obs", &RunConfig::sweep_obs);
    keys.push_back({"sweep.init_gain",
                    [](RunConfig& c, const std::string& v) {
                      c.sweep_gain = parse_f64("sweep.init_gain", v);
                    },
                    [](const RunConfig& c) { return fmt_f64(c.sweep_gain); }});

    add_str("eval.checkpoint", &RunConfig::checkpoint);
    add_u64("eval.episodes", &RunConfig::eval_episodes);
    return keys;
  }();
  return registry;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeySpec& spec : key_registry()) {
    if (spec.name == key) {
      spec.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown key: " + key);
}

std::vector<std::pair<std::string, std::string>> dump_keys(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const KeySpec& spec : key_registry()) out.emplace_back(spec.name, spec.get(cfg));
  return out;
}

RunConfig load_run_config(const std::string& command, const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  cfg.command = command;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("config file not found: " + config_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(config_path + ":" + std::to_string(lineno) +
                                    ": expected key=value, got '" + stripped + "'");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key == "command") {
        if (!command.empty() && value != command)
          throw std::invalid_argument("config file command '" + value +
                                      "' conflicts with requested command '" + command + "'");
        cfg.command = value;
        continue;
      }
      apply_key(cfg, key, value);
    }
  }
  for (const auto& [key, value] : overrides) apply_key(cfg, key, value);
  if (cfg.command.empty()) throw std::invalid_argument("no command given");
  return cfg;
}

std::vector<ConvSpec> parse_conv_stack(const std::string& text, std::size_t in_channels) {
  std::vector<ConvSpec> specs;
  std::size_t channels = in_channels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '-')) {
    ConvSpec s;
    s.in_channels = channels;
    s.stride = 1;
    s.padding = 0;
    std::size_t i = 0;
    auto read_num = [&](const char* what) {
      std::size_t start = i;
      while (i < item.size() && std::isdigit(static_cast<unsigned char>(item[i]))) ++i;
      if (i == start)
        throw std::invalid_argument("net.conv: expected digits for " + std::string(what) +
                                    " in '" + item + "'");
      return static_cast<std::size_t>(std::stoull(item.substr(start, i - start)));
    };
    if (i >= item.size() || item[i] != 'c')
      throw std::invalid_argument("net.conv: layer must start with 'c', got '" + item + "'");
    ++i;
    s.out_channels = read_num("channels");
    if (i >= item.size() || item[i] != 'k')
      throw std::invalid_argument("net.conv: missing kernel 'k' in '" + item + "'");
    ++i;
    s.kernel_size = read_num("kernel");
    while (i < item.size()) {
      const char tag = item[i];
      ++i;
      if (tag == 's')
        s.stride = read_num("stride");
      else if (tag == 'p')
        s.padding = read_num("padding");
      else
        throw std::invalid_argument("net.conv: unexpected '" + std::string(1, tag) + "' in '" +
                                    item + "'");
    }
    channels = s.out_channels;
    specs.push_back(s);
  }
  if (specs.empty()) throw std::invalid_argument("net.conv: empty stack description");
  return specs;
}

namespace {

Architecture build_arch(const RunConfig& cfg, const Env& env, const std::string& default_stack,
                        std::size_t default_fc) {
  Architecture arch;
  arch.input_shape = {cfg.n_stack, env.height(), env.width()};
  const std::string stack = cfg.conv_stack.empty() ? default_stack : cfg.conv_stack;
  arch.conv = parse_conv_stack(stack, cfg.n_stack);
  arch.fc_width = cfg.fc_width == 0 ? default_fc : cfg.fc_width;
  arch.n_actions = env.n_actions();
  arch.time_window = cfg.time_window;
  arch.lif = cfg.lif;
  arch.pbln_conv = cfg.pbln_mode != "off";
  arch.pbln_fc = cfg.pbln_fc;
  arch.validate();
  return arch;
}

std::string default_out_dir(const RunConfig& cfg) {
  const char* root = std::getenv("SDQN_OUT_ROOT");
  std::string base = root ? root : "runs";
  return base + "/" + cfg.command + "-" + cfg.env_name + "-seed" + std::to_string(cfg.seed);
}

void write_resolved(const RunConfig& cfg, const std::string& dir) {
  std::ofstream out(dir + "/config.resolved");
  for (const auto& [key, value] : dump_keys(cfg)) out << key << "=" << value << "\n";
}

int finish_report(const std::string& dir, const std::string& file, const nlohmann::json& j,
                  bool pass) {
  std::ofstream(dir + "/" + file) << j.dump(2) << '\n';
  std::cout << (pass ? "PASS " : "FAIL ") << file << "\n";
  return pass ? 0 : 1;
}

}  // namespace

Architecture build_train_arch(const RunConfig& cfg, const Env& env) {
  return build_arch(cfg, env, "c8k3s1-c16k3s2", 64);
}

Architecture build_sweep_arch(const RunConfig& cfg, const Env& env) {
  return build_arch(cfg, env, "c16k5s2-c32k3s1-c32k3s2", 128);
}

int run(RunConfig cfg) {
  if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  write_resolved(cfg, cfg.out_dir);

  try {
    if (cfg.command == "train") {
      auto env = make_env(cfg.env_name);
      const Architecture arch = build_train_arch(cfg, *env);
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      const TrainResult res = train(arch, tc, *env, cfg.out_dir);
      std::cout << "trained " << res.frames_run << " frames, " << res.episodes << " episodes"
                << (res.early_stopped ? " (early stop)" : "") << "\n";
      return 0;
    }

    if (cfg.command == "eval") {
      if (cfg.checkpoint.empty())
        throw std::invalid_argument("eval: set eval.checkpoint to a checkpoint path");
      auto [arch, params] = load_checkpoint(cfg.checkpoint);
      auto env = make_env(cfg.env_name);
      const auto [mean, stdev] =
          evaluate(params, arch, *env, cfg.eval_episodes, cfg.seed);
      nlohmann::json j = {{"mean_return", mean},
                          {"std_return", stdev},
                          {"episodes", cfg.eval_episodes},
                          {"checkpoint", cfg.checkpoint}};
      std::ofstream(cfg.out_dir + "/eval.json") << j.dump(2) << '\n';
      std::cout << "eval mean=" << mean << " std=" << stdev << "\n";
      return 0;
    }

    if (cfg.command == "verify-moments") {
      nlohmann::json all = nlohmann::json::array();
      bool pass = true;
      for (double p : {0.0, 0.25, 0.5, 1.0}) {
        const TheoryReport r = verify_spike_moments(p, cfg.lemma.trials, cfg.seed);
        all.push_back(r.to_json());
        pass = pass && r.pass;
      }
      return finish_report(cfg.out_dir, "moments.json", all, pass);
    }

    if (cfg.command == "verify-lemma") {
      LemmaConfig lc = cfg.lemma;
      lc.tau = cfg.lif.tau;
      lc.seed = cfg.seed;
      const TheoryReport r = verify_lemma1(lc);
      return finish_report(cfg.out_dir, "lemma.json", r.to_json(), r.pass);
    }

    if (cfg.command == "verify-theorem") {
      nlohmann::json all = nlohmann::json::array();
      bool pass = true;
      for (double k : {0.1, 0.5, 1.0}) {
        for (double p : {0.1, 0.5, 0.9}) {
          LemmaConfig lc = cfg.lemma;
          lc.tau = cfg.lif.tau;
          lc.seed = cfg.seed;
          lc.k = k;
          lc.p = p;
          const TheoryReport r = verify_theorem1(lc, cfg.lif.v_th);
          all.push_back(r.to_json());
          pass = pass && r.pass;
        }
      }
      return finish_report(cfg.out_dir, "theorem.json", all, pass);
    }

    if (cfg.command == "sweep-firing") {
      auto env = make_env(cfg.env_name);
      SweepConfig sc;
      sc.arch = build_sweep_arch(cfg, *env);
      sc.env = cfg.env_name;
      sc.n_seeds = cfg.sweep_seeds;
      sc.n_obs = cfg.sweep_obs;
      sc.init_gain = cfg.sweep_gain;
      sc.seed = cfg.seed;
      if (cfg.pbln_mode == "on" || cfg.pbln_mode == "both") {
        const SweepReport r = firing_sweep(sc, true);
        std::ofstream(cfg.out_dir + "/sweep_pbln_on.json") << r.to_json().dump(2) << '\n';
      }
      if (cfg.pbln_mode == "off" || cfg.pbln_mode == "both") {
        const SweepReport r = firing_sweep(sc, false);
        std::ofstream(cfg.out_dir + "/sweep_pbln_off.json") << r.to_json().dump(2) << '\n';
      }
      std::cout << "sweep-firing reports written to " << cfg.out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("[" + cfg.command + "] " + e.what());
  }

  throw std::invalid_argument("unknown command: " + cfg.command);
}

}  // namespace sdqn
