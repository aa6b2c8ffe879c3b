#include "sdqn/theory.hpp"

#include <cmath>

#include "sdqn/envs.hpp"
#include "sdqn/rng.hpp"

namespace sdqn {

nlohmann::json TheoryReport::to_json() const {
  return {{"check", check},          {"predicted", predicted},
          {"empirical", empirical},  {"standard_error", standard_error},
          {"pass", pass},            {"config", config}};
}

TheoryReport verify_spike_moments(double p, std::size_t trials, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("verify_spike_moments: p must lie in [0,1]");
  Rng rng = derive_rng(seed, "moments");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double o = rng.bernoulli(p) ? 1.0 : 0.0;
    sum += o;
    sum_sq += o * o;
  }
  const double n = static_cast<double>(trials);
  const double m = sum / n;
  const double m2 = sum_sq / n;
  const double var_emp = m2 - m * m;  // population variance of 0/1 data = m(1-m)

  const double se_m = std::sqrt(p * (1.0 - p) / n);
  // Delta-method band for the variance estimate, with a second-order term so
  // the p = 1/2 case (where the first-order term vanishes) keeps 3-sigma
  // semantics.
  const double se_var = std::abs(1.0 - 2.0 * p) * se_m + 3.0 * se_m * se_m;

  TheoryReport r;
  r.check = "spike-moments";
  r.predicted = p * (1.0 - p);
  r.empirical = var_emp;
  r.standard_error = se_var;
  const bool identity_sq = (m2 == m);  // exact: o^2 = o elementwise
  const bool identity_var = std::abs(var_emp - m * (1.0 - m)) < 1e-12;
  const bool mean_ok = std::abs(m - p) <= 3.0 * se_m + 1e-15;
  const bool var_ok = std::abs(var_emp - r.predicted) <= 3.0 * r.standard_error + 1e-15;
  r.pass = identity_sq && identity_var && mean_ok && var_ok;
  r.config = {{"p", p}, {"trials", trials}, {"seed", seed}};
  return r;
}

namespace {

double psi_sum(double alpha, std::size_t t) {
  // sum_{i=0}^{t} (1-alpha)^2 * alpha^{2(t-i)}
  double acc = 0.0;
  for (std::size_t i = 0; i <= t; ++i)
    acc += (1.0 - alpha) * (1.0 - alpha) * std::pow(alpha, 2.0 * static_cast<double>(t - i));
  return acc;
}

// Subthreshold accumulation of one trial: u_{i+1} = alpha u_i + (1-alpha) x_i
// with x_i the sum of fan_in fresh-weight Bernoulli-gated synapses.
double run_chain(Rng& rng, const LemmaConfig& cfg, double alpha, std::size_t* spike_count) {
  double u = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i <= cfg.t; ++i) {
    double x = 0.0;
    for (std::size_t j = 0; j < cfg.fan_in; ++j) {
      const bool o = rng.bernoulli(cfg.p);
      const double w = rng.uniform(-cfg.k, cfg.k);
      if (o) {
        x += w;
        ++count;
      }
    }
    u = alpha * u + (1.0 - alpha) * x;
  }
  if (spike_count) *spike_count = count;
  return u;
}

nlohmann::json lemma_config_json(const LemmaConfig& cfg) {
  return {{"tau", cfg.tau},       {"k", cfg.k},           {"p", cfg.p},
          {"t", cfg.t},           {"trials", cfg.trials}, {"fan_in", cfg.fan_in},
          {"seed", cfg.seed}};
}

}  // namespace

TheoryReport verify_lemma1(const LemmaConfig& cfg) {
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0) || cfg.tau < 1.0 || cfg.fan_in < 1 || cfg.trials < 1)
    throw std::invalid_argument("verify_lemma1: invalid config");
  const double alpha = 1.0 - 1.0 / cfg.tau;
  const double weight_var = cfg.k * cfg.k / 3.0;
  const double predicted =
      static_cast<double>(cfg.fan_in) * weight_var * cfg.p * psi_sum(alpha, cfg.t);

  std::vector<double> u(cfg.trials);
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    Rng rng = derive_rng(cfg.seed, "lemma-trial", i);
    u[i] = run_chain(rng, cfg, alpha, nullptr);
  }
  const double n = static_cast<double>(cfg.trials);
  double mean = 0.0;
  for (double v : u) mean += v;
  mean /= n;
  double var = 0.0, m4 = 0.0;
  for (double v : u) {
    const double d = v - mean;
    var += d * d;
    m4 += d * d * d * d;
  }
  var /= n;
  m4 /= n;
  // Asymptotic SE of the sample variance.
  const double se = std::sqrt(std::max(0.0, m4 - var * var) / n);

  TheoryReport r;
  r.check = "lemma-potential-variance";
  r.predicted = predicted;
  r.empirical = var;
  r.standard_error = se;
  r.pass = std::abs(predicted - var) <= 3.0 * se + 1e-15;
  r.config = lemma_config_json(cfg);
  return r;
}

TheoryReport verify_theorem1(const LemmaConfig& cfg, double v_th) {
  if (v_th <= 0.0) throw std::invalid_argument("verify_theorem1: v_th must be positive");
  const double alpha = 1.0 - 1.0 / cfg.tau;
  const double weight_var = cfg.k * cfg.k / 3.0;
  const double eps = weight_var / (2.0 * v_th * v_th);

  // Per-trial statistic d = 1{u >= v_th} - eps * (input spike count); the
  // bound holds when E[d] <= 0 within sampling error.
  std::vector<double> d(cfg.trials);
  double spike_rate = 0.0, bound_rhs = 0.0;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    Rng rng = derive_rng(cfg.seed, "theorem-trial", i);
    std::size_t count = 0;
    const double u = run_chain(rng, cfg, alpha, &count);
    const double fired = (u >= v_th) ? 1.0 : 0.0;
    d[i] = fired - eps * static_cast<double>(count);
    spike_rate += fired;
    bound_rhs += eps * static_cast<double>(count);
  }
  const double n = static_cast<double>(cfg.trials);
  spike_rate /= n;
  bound_rhs /= n;
  double mean_d = 0.0;
  for (double v : d) mean_d += v;
  mean_d /= n;
  double var_d = 0.0;
  for (double v : d) var_d += (v - mean_d) * (v - mean_d);
  var_d /= n;
  const double se_d = std::sqrt(var_d / n);

  TheoryReport r;
  r.check = "theorem-spike-bound";
  r.predicted = bound_rhs;
  r.empirical = spike_rate;
  r.standard_error = se_d;
  r.pass = mean_d <= 3.0 * se_d + 1e-15;
  r.config = lemma_config_json(cfg);
  r.config["v_th"] = v_th;
  r.config["eps"] = eps;
  return r;
}

Architecture default_sweep_arch() {
  Architecture arch;
  arch.input_shape = {4, 24, 24};
  arch.conv = {ConvSpec{4, 16, 5, 2, 0}, ConvSpec{16, 32, 3, 1, 0}, ConvSpec{32, 32, 3, 2, 0}};
  arch.fc_width = 128;
  arch.n_actions = 3;
  arch.time_window = 16;
  return arch;
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json j;
  j["with_pbln"] = with_pbln;
  j["config"] = config;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers)
    j["layers"].push_back({{"layer", l.layer},
                           {"mean_active_fraction", l.mean},
                           {"std_active_fraction", l.stdev},
                           {"per_seed", l.per_seed}});
  return j;
}

SweepReport firing_sweep(const SweepConfig& cfg, bool with_pbln) {
  if (cfg.n_seeds < 1) throw std::invalid_argument("firing_sweep: n_seeds must be >= 1");
  Architecture arch = cfg.arch;
  arch.pbln_conv = with_pbln;
  arch.pbln_fc = false;
  arch.validate();

  // Observation set shared by both pbln modes: random-policy episodes.
  auto env = make_env(cfg.env);
  arch.n_actions = env->n_actions();
  std::vector<Tensor> observations;
  Rng policy = derive_rng(cfg.seed, "sweep-policy");
  std::size_t episode = 0;
  while (observations.size() < cfg.n_obs) {
    env->reset(derive_seed(cfg.seed, "sweep-episode", episode));
    FrameStack stack(arch.input_shape[0]);
    stack.reset(env->observe());
    observations.push_back(stack.stacked());
    while (observations.size() < cfg.n_obs) {
      const StepResult sr = env->step(policy.uniform_int(env->n_actions()));
      if (sr.terminal) break;
      stack.push(env->observe());
      observations.push_back(stack.stacked());
    }
    ++episode;
  }

  const std::size_t n_layers = arch.conv.size() + 1;
  SweepReport report;
  report.with_pbln = with_pbln;
  report.layers.resize(n_layers);
  for (std::size_t l = 0; l < arch.conv.size(); ++l)
    report.layers[l].layer = "conv" + std::to_string(l + 1);
  report.layers.back().layer = "fc";

  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    const NetworkParams params =
        init_params(arch, derive_seed(cfg.seed, "sweep-net", s), cfg.init_gain);
    std::vector<double> acc(n_layers, 0.0);
    for (const Tensor& obs : observations) {
      const auto [q, trace] = forward(obs, params, arch);
      const FiringStats stats = firing_stats(trace);
      for (std::size_t l = 0; l < n_layers; ++l) acc[l] += stats.active_fraction[l];
    }
    for (std::size_t l = 0; l < n_layers; ++l)
      report.layers[l].per_seed.push_back(acc[l] / static_cast<double>(observations.size()));
  }

  for (auto& layer : report.layers) {
    double mean = 0.0;
    for (double v : layer.per_seed) mean += v;
    mean /= static_cast<double>(layer.per_seed.size());
    double var = 0.0;
    for (double v : layer.per_seed) var += (v - mean) * (v - mean);
    var /= static_cast<double>(layer.per_seed.size());
    layer.mean = mean;
    layer.stdev = std::sqrt(var);
  }

  report.config = {{"env", cfg.env},
                   {"n_seeds", cfg.n_seeds},
                   {"n_obs", cfg.n_obs},
                   {"init_gain", cfg.init_gain},
                   {"seed", cfg.seed},
                   {"time_window", arch.time_window}};
  return report;
}

}  // namespace sdqn
