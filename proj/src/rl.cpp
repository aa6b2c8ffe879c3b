#include "sdqn/rl.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace sdqn {

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.size() < n)
    throw std::invalid_argument("ReplayBuffer: cannot sample " + std::to_string(n) +
                                " from size " + std::to_string(items_.size()));
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(items_[rng.uniform_int(items_.size())]);
  return out;
}

std::size_t epsilon_greedy(const Tensor& q, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon_greedy: epsilon must lie in [0,1]");
  if (rng.uniform01() < epsilon) return rng.uniform_int(q.numel());
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.numel(); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV schema v1: one row per completed episode, firing fractions taken from
// the greedy forward at the episode's first frame.
constexpr const char* kCsvHeader =
    "# sdqn-metrics v1\n"
    "frame,episode,return,loss,epsilon,fire_frac_conv1,fire_frac_conv2,fire_frac_conv3,"
    "fire_frac_fc\n";

void write_metrics_row(std::ofstream& csv, std::size_t frame, std::size_t episode,
                       double ep_return, double loss, double eps, const FiringStats& stats,
                       std::size_t n_conv) {
  double conv_frac[3] = {0.0, 0.0, 0.0};
  for (std::size_t l = 0; l < n_conv && l < 3; ++l) conv_frac[l] = stats.active_fraction[l];
  const double fc_frac =
      stats.active_fraction.empty() ? 0.0 : stats.active_fraction.back();
  csv << frame << ',' << episode << ',' << fmt_double(ep_return) << ',' << fmt_double(loss)
      << ',' << fmt_double(eps) << ',' << fmt_double(conv_frac[0]) << ','
      << fmt_double(conv_frac[1]) << ',' << fmt_double(conv_frac[2]) << ','
      << fmt_double(fc_frac) << '\n';
}

void dump_nan_batch(const std::string& out_dir, const std::vector<Transition>& batch,
                    const TdResult& res, std::size_t frame) {
  if (out_dir.empty()) return;
  nlohmann::json j;
  j["frame"] = frame;
  j["loss"] = "nan";
  j["batch"] = nlohmann::json::array();
  for (std::size_t i = 0; i < batch.size(); ++i)
    j["batch"].push_back({{"action", batch[i].action},
                          {"reward", batch[i].reward},
                          {"terminal", batch[i].terminal},
                          {"delta", res.delta.size() > i ? res.delta[i] : 0.0}});
  std::ofstream(out_dir + "/nan_dump.json") << j.dump(2) << '\n';
}

}  // namespace

TrainResult train(const Architecture& arch, const TrainConfig& cfg, Env& env,
                  const std::string& out_dir) {
  arch.validate();
  const int threads = cfg.n_threads > 0
                          ? cfg.n_threads
                          : static_cast<int>(std::thread::hardware_concurrency());

  TrainResult result;
  result.params = init_params(arch, cfg.seed);
  NetworkParams target = result.params;
  AdamState adam = AdamState::init(result.params);
  adam.clip_norm = cfg.clip_norm;
  ReplayBuffer replay(cfg.replay_capacity);
  Rng rng_policy = derive_rng(cfg.seed, "policy");
  Rng rng_replay = derive_rng(cfg.seed, "replay");

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/metrics.csv");
    csv << kCsvHeader;
  }

  auto eval_env = make_env(env.name());

  std::size_t episode = 0;
  env.reset(derive_seed(cfg.seed, "episode", episode));
  FrameStack stack(arch.input_shape[0]);
  stack.reset(env.observe());
  Tensor state = stack.stacked();
  double ep_return = 0.0;
  double last_loss = 0.0;
  FiringStats ep_stats;
  bool need_stats = true;

  for (std::size_t frame = 1; frame <= cfg.total_frames; ++frame) {
    const double eps = cfg.epsilon_at(frame);

    Tensor q;
    if (need_stats) {
      auto [qv, trace] = forward(state, result.params, arch);
      q = std::move(qv);
      ep_stats = firing_stats(trace);
      need_stats = false;
    } else {
      q = forward_q(state, result.params, arch);
    }
    const std::size_t action = epsilon_greedy(q, eps, rng_policy);

    const StepResult sr = env.step(action);
    stack.push(env.observe());
    Tensor next_state = stack.stacked();
    replay.push(Transition{state, action, sr.reward, next_state, sr.terminal});
    ep_return += sr.reward;
    state = std::move(next_state);

    if (frame >= cfg.learn_start && frame % cfg.train_period == 0 &&
        replay.size() >= cfg.batch_size) {
      const std::vector<Transition> batch = replay.sample(cfg.batch_size, rng_replay);
      ParamGrads grads = ParamGrads::zeros_like(result.params);
      const TdResult res =
          td_loss(batch, result.params, target, cfg.gamma, arch, &grads, threads);
      if (!std::isfinite(res.loss)) {
        dump_nan_batch(out_dir, batch, res, frame);
        throw std::runtime_error("train: non-finite loss at frame " + std::to_string(frame) +
                                 (out_dir.empty() ? "" : ", batch dumped to nan_dump.json"));
      }
      adam_step(result.params, grads, adam, cfg.lr);
      last_loss = res.loss;
    }

    if (cfg.target_sync > 0 && frame % cfg.target_sync == 0) target = result.params;

    if (sr.terminal) {
      if (csv.is_open())
        write_metrics_row(csv, frame, episode, ep_return, last_loss, eps, ep_stats,
                          arch.conv.size());
      ++episode;
      env.reset(derive_seed(cfg.seed, "episode", episode));
      stack.reset(env.observe());
      state = stack.stacked();
      ep_return = 0.0;
      need_stats = true;
    }

    result.frames_run = frame;
    if (cfg.eval_every > 0 && frame % cfg.eval_every == 0) {
      const auto [mean, stdev] = evaluate(result.params, arch, *eval_env, cfg.eval_episodes,
                                          derive_seed(cfg.seed, "eval", frame));
      result.evals.push_back(EvalPoint{frame, mean, stdev});
      if (mean >= cfg.early_stop_return) {
        result.early_stopped = true;
        break;
      }
    }
  }
  result.episodes = episode;
  result.final_loss = last_loss;

  if (!out_dir.empty()) {
    save_checkpoint(out_dir + "/checkpoint.sdqn", arch, result.params);
    nlohmann::json j;
    j["frames_run"] = result.frames_run;
    j["episodes"] = result.episodes;
    j["final_loss"] = result.final_loss;
    j["early_stopped"] = result.early_stopped;
    j["evals"] = nlohmann::json::array();
    for (const auto& e : result.evals)
      j["evals"].push_back(
          {{"frame", e.frame}, {"mean_return", e.mean_return}, {"std_return", e.std_return}});
    std::ofstream(out_dir + "/summary.json") << j.dump(2) << '\n';
  }
  return result;
}

std::pair<double, double> evaluate(const NetworkParams& params, const Architecture& arch,
                                   Env& env, std::size_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(seed, "eval-episode", ep));
    FrameStack stack(arch.input_shape[0]);
    stack.reset(env.observe());
    double ret = 0.0;
    while (true) {
      const Tensor q = forward_q(stack.stacked(), params, arch);
      std::size_t best = 0;
      for (std::size_t i = 1; i < q.numel(); ++i)
        if (q[i] > q[best]) best = i;
      const StepResult sr = env.step(best);
      ret += sr.reward;
      if (sr.terminal) break;
      stack.push(env.observe());
    }
    returns.push_back(ret);
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= static_cast<double>(returns.size());
  return {mean, std::sqrt(var)};
}

}  // namespace sdqn
