#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdqn/lif.hpp"
#include "sdqn/pbln.hpp"
#include "sdqn/tensor.hpp"

// The spiking Q network: a stack of spiking convolutional layers (normalized
// postsynaptic potentials when pbln is enabled), one spiking fully connected
// layer, and a time-averaged weighted-spike readout that produces Q-values.
// Each inference runs a fresh T-step window from resting state; the static
// input frames are presented at every step.

namespace sdqn {

struct Architecture {
  std::vector<ConvSpec> conv;  // may be empty (input flattens straight into fc)
  std::size_t fc_width = 64;
  std::size_t n_actions = 3;
  std::size_t time_window = 16;
  std::vector<std::size_t> input_shape;  // [C,H,W]
  LifParams lif;
  bool pbln_conv = true;  // normalize conv postsynaptic potentials
  bool pbln_fc = false;   // optional ablation switch for the fc layer

  // Per-layer output shapes, conv chain checked end to end.
  std::vector<std::vector<std::size_t>> conv_out_shapes() const;
  std::size_t flat_conv_out() const;
  void validate() const;
};

struct NetworkParams {
  std::vector<Tensor> conv_kernels;  // [O,C,K,K] per conv layer
  std::vector<PbLnParams> pbln;      // per conv layer (present even when disabled)
  std::optional<PbLnParams> pbln_fc;
  Tensor fc_weights;       // [fc_width, flat_conv_out]
  Tensor readout_weights;  // [n_actions, fc_width]
};

// Uniform U(-k, k) with k = 1/sqrt(fan_in) per layer, deterministic in seed.
// init_gain multiplies k; the firing sweep uses it to place the unnormalized
// network in a regime where shallow layers still fire.
NetworkParams init_params(const Architecture& arch, std::uint64_t seed, double init_gain = 1.0);

struct LayerTrace {
  Tensor x;      // postsynaptic potential fed to the membrane (post-pbln)
  Tensor u_pre;  // pre-reset potential, the value compared to threshold
  Tensor o;      // spikes
  std::optional<PbLnCache> pbln;
};

struct ForwardTrace {
  // steps[t][l]: conv layers first, fc layer last.
  std::vector<std::vector<LayerTrace>> steps;
  Tensor frames;
  Tensor q;
};

// Full forward pass with trace capture for training and analysis.
std::pair<Tensor, ForwardTrace> forward(const Tensor& frames, const NetworkParams& params,
                                        const Architecture& arch);

// Q-values only; identical arithmetic, no trace storage.
Tensor forward_q(const Tensor& frames, const NetworkParams& params, const Architecture& arch);

struct FiringStats {
  // One entry per layer (convs then fc).
  std::vector<double> active_fraction;  // neurons with >= 1 spike over the window
  std::vector<double> mean_rate;        // spikes per neuron per step
};

FiringStats firing_stats(const ForwardTrace& trace);

// Checkpoint container: "SDQNCKPT" magic, a JSON architecture header, then
// raw little-endian float64 arrays in declaration order. Layout documented in
// the README; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Architecture& arch,
                     const NetworkParams& params);
std::pair<Architecture, NetworkParams> load_checkpoint(const std::string& path);

}  // namespace sdqn
