#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdqn/qnet.hpp"

// Monte-Carlo checks of the analytical spike-vanishing results: the
// membrane-potential variance formula for the subthreshold accumulation
// window, the Chebyshev spike-expectation bound, the binary-spike moment
// identities, and the layer-wise firing sweep contrasting normalized and
// unnormalized networks.

namespace sdqn {

struct LemmaConfig {
  double tau = 2.0;
  double k = 1.0;          // weights drawn U(-k, k)
  double p = 0.5;          // Bernoulli input spike rate
  std::size_t t = 3;       // accumulation steps before the readout time
  std::size_t trials = 100000;
  std::size_t fan_in = 1;  // >1 scales the prediction; beyond the scalar derivation
  std::uint64_t seed = 1;
};

struct TheoryReport {
  std::string check;
  double predicted = 0.0;
  double empirical = 0.0;
  double standard_error = 0.0;
  bool pass = false;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

// E[o^2] = E[o] and D(o) = E(o)(1-E(o)) for Bernoulli spikes; the identities
// are exact on 0/1 data, the closed forms are matched within 3 SE.
TheoryReport verify_spike_moments(double p, std::size_t trials, std::uint64_t seed = 1);

// Var(u_{t+1}) against D(W) * sum_i (1-alpha)^2 alpha^{2(t-i)} E[o_i] for a
// subthreshold synapse chain with fresh U(-k,k) weights at every step. A
// weight held fixed across the window would correlate the per-step inputs
// and the summed-variance form would no longer apply.
TheoryReport verify_lemma1(const LemmaConfig& cfg);

// P(spike at t+1) <= eps * E[sum_i o_i] with eps = D(W) / (2 v_th^2),
// checked one-sided within 3 SE of the per-trial difference.
TheoryReport verify_theorem1(const LemmaConfig& cfg, double v_th);

struct SweepConfig {
  Architecture arch;
  std::string env = "catch";
  std::size_t n_seeds = 10;
  std::size_t n_obs = 32;  // observations scored per seed
  // Multiplier on the 1/sqrt(fan_in) weight bound. At 1.0 layers past the
  // first are silent outright on sparse frames (the postsynaptic potential
  // cannot reach threshold), so the sweep defaults to a gain that puts the
  // unnormalized network in the partial-activity regime the layer statistics
  // are about.
  double init_gain = 6.0;
  std::uint64_t seed = 1;
};

struct LayerSweepStats {
  std::string layer;
  std::vector<double> per_seed;  // mean active fraction per network seed
  double mean = 0.0;
  double stdev = 0.0;
};

struct SweepReport {
  bool with_pbln = false;
  std::vector<LayerSweepStats> layers;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

// Random-init networks scoring environment observations; per-layer active
// fractions across seeds. Observations depend only on cfg.seed, so reports
// for both pbln modes are paired.
SweepReport firing_sweep(const SweepConfig& cfg, bool with_pbln);

// Three-conv stack sized for 24x24 stacked frames, used by the sweep.
Architecture default_sweep_arch();

}  // namespace sdqn
