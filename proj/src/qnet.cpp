#include "sdqn/qnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "sdqn/rng.hpp"

namespace sdqn {

std::vector<std::vector<std::size_t>> Architecture::conv_out_shapes() const {
  if (input_shape.size() != 3)
    throw std::invalid_argument("Architecture: input_shape must be [C,H,W]");
  std::vector<std::vector<std::size_t>> shapes;
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const ConvSpec& s = conv[l];
    if (s.in_channels != c)
      throw std::invalid_argument("Architecture: conv layer " + std::to_string(l) + " expects " +
                                  std::to_string(s.in_channels) + " input channels, got " +
                                  std::to_string(c));
    h = s.out_extent(h);
    w = s.out_extent(w);
    c = s.out_channels;
    shapes.push_back({c, h, w});
  }
  return shapes;
}

std::size_t Architecture::flat_conv_out() const {
  const auto shapes = conv_out_shapes();
  if (shapes.empty())
    return input_shape[0] * input_shape[1] * input_shape[2];
  const auto& last = shapes.back();
  return last[0] * last[1] * last[2];
}

void Architecture::validate() const {
  lif.validate();
  if (time_window < 1) throw std::invalid_argument("Architecture: time_window must be >= 1");
  if (fc_width < 1 || n_actions < 1)
    throw std::invalid_argument("Architecture: fc_width and n_actions must be >= 1");
  (void)conv_out_shapes();  // throws on an inconsistent chain
}

NetworkParams init_params(const Architecture& arch, std::uint64_t seed, double init_gain) {
  arch.validate();
  Rng rng = derive_rng(seed, "init");
  auto draw = [&](Tensor& t, std::size_t fan_in) {
    const double k = init_gain / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-k, k);
  };

  NetworkParams params;
  for (const ConvSpec& s : arch.conv) {
    Tensor kernels({s.out_channels, s.in_channels, s.kernel_size, s.kernel_size});
    draw(kernels, s.in_channels * s.kernel_size * s.kernel_size);
    params.conv_kernels.push_back(std::move(kernels));
    params.pbln.push_back(pbln_init(arch.lif, s.out_channels));
  }
  if (arch.pbln_fc) params.pbln_fc = pbln_init(arch.lif, arch.fc_width);

  params.fc_weights = Tensor({arch.fc_width, arch.flat_conv_out()});
  draw(params.fc_weights, arch.flat_conv_out());
  params.readout_weights = Tensor({arch.n_actions, arch.fc_width});
  draw(params.readout_weights, arch.fc_width);
  return params;
}

namespace {

Tensor flatten(const Tensor& t) {
  return Tensor({t.numel()}, t.values());
}

Tensor forward_impl(const Tensor& frames, const NetworkParams& params, const Architecture& arch,
                    ForwardTrace* trace) {
  arch.validate();
  if (frames.shape() != arch.input_shape)
    throw std::invalid_argument("forward: frames " + frames.shape_str() + " do not match input " +
                                Tensor::shape_str(arch.input_shape));
  const std::size_t L = arch.conv.size();
  if (params.conv_kernels.size() != L || params.pbln.size() != L)
    throw std::invalid_argument("forward: params hold " +
                                std::to_string(params.conv_kernels.size()) +
                                " conv layers, architecture has " + std::to_string(L));
  const std::size_t T = arch.time_window;
  const LifParams& lif = arch.lif;

  const auto conv_shapes = arch.conv_out_shapes();
  std::vector<Tensor> u(L + 1);
  for (std::size_t l = 0; l < L; ++l) u[l] = Tensor::full(conv_shapes[l], lif.v_reset);
  u[L] = Tensor::full({arch.fc_width}, lif.v_reset);

  if (trace) {
    trace->steps.clear();
    trace->steps.reserve(T);
    trace->frames = frames;
  }

  Tensor q_sum({arch.n_actions});
  std::vector<Tensor> spikes(L + 1);
  for (std::size_t t = 0; t < T; ++t) {
    if (trace) trace->steps.emplace_back();
    const Tensor* in = &frames;
    for (std::size_t l = 0; l <= L; ++l) {
      Tensor x;
      std::optional<PbLnCache> cache;
      if (l < L) {
        Tensor a = conv2d_forward_sparse(*in, params.conv_kernels[l], arch.conv[l]);
        if (arch.pbln_conv) {
          auto [y, c] = pbln_forward(a, params.pbln[l]);
          x = std::move(y);
          cache = std::move(c);
        } else {
          x = std::move(a);
        }
      } else {
        Tensor a = linear_forward_sparse(l == 0 ? flatten(frames) : flatten(spikes[L - 1]),
                                         params.fc_weights);
        if (arch.pbln_fc) {
          auto [y, c] = pbln_forward(a, *params.pbln_fc);
          x = std::move(y);
          cache = std::move(c);
        } else {
          x = std::move(a);
        }
      }
      Tensor u_pre = decay_integrate(u[l], x, lif);
      Tensor o = heaviside_spike(u_pre, lif.v_th);
      u[l] = apply_reset(u_pre, o, lif.v_reset);
      if (trace)
        trace->steps[t].push_back(LayerTrace{std::move(x), std::move(u_pre), o, std::move(cache)});
      spikes[l] = std::move(o);
      if (l < L) in = &spikes[l];
    }
    const Tensor contrib = linear_forward_sparse(spikes[L], params.readout_weights);
    for (std::size_t i = 0; i < q_sum.numel(); ++i) q_sum[i] += contrib[i];
  }

  for (std::size_t i = 0; i < q_sum.numel(); ++i) q_sum[i] /= static_cast<double>(T);
  if (trace) trace->q = q_sum;
  return q_sum;
}

}  // namespace

std::pair<Tensor, ForwardTrace> forward(const Tensor& frames, const NetworkParams& params,
                                        const Architecture& arch) {
  ForwardTrace trace;
  Tensor q = forward_impl(frames, params, arch, &trace);
  return {std::move(q), std::move(trace)};
}

Tensor forward_q(const Tensor& frames, const NetworkParams& params, const Architecture& arch) {
  return forward_impl(frames, params, arch, nullptr);
}

FiringStats firing_stats(const ForwardTrace& trace) {
  FiringStats stats;
  if (trace.steps.empty()) return stats;
  const std::size_t T = trace.steps.size();
  const std::size_t layers = trace.steps[0].size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n = trace.steps[0][l].o.numel();
    std::vector<bool> fired(n, false);
    double total_spikes = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor& o = trace.steps[t][l].o;
      for (std::size_t i = 0; i < n; ++i) {
        if (o[i] != 0.0) {
          fired[i] = true;
          total_spikes += 1.0;
        }
      }
    }
    std::size_t active = 0;
    for (bool f : fired) active += f ? 1 : 0;
    stats.active_fraction.push_back(static_cast<double>(active) / static_cast<double>(n));
    stats.mean_rate.push_back(total_spikes / (static_cast<double>(n) * static_cast<double>(T)));
  }
  return stats;
}

namespace {

constexpr char kCkptMagic[8] = {'S', 'D', 'Q', 'N', 'C', 'K', 'P', 'T'};

nlohmann::json arch_to_json(const Architecture& arch) {
  nlohmann::json j;
  j["conv"] = nlohmann::json::array();
  for (const ConvSpec& s : arch.conv)
    j["conv"].push_back({{"in", s.in_channels},
                         {"out", s.out_channels},
                         {"k", s.kernel_size},
                         {"stride", s.stride},
                         {"pad", s.padding}});
  j["fc_width"] = arch.fc_width;
  j["n_actions"] = arch.n_actions;
  j["time_window"] = arch.time_window;
  j["input_shape"] = arch.input_shape;
  j["lif"] = {{"tau", arch.lif.tau}, {"v_th", arch.lif.v_th}, {"v_reset", arch.lif.v_reset}};
  j["pbln_conv"] = arch.pbln_conv;
  j["pbln_fc"] = arch.pbln_fc;
  return j;
}

Architecture arch_from_json(const nlohmann::json& j) {
  Architecture arch;
  for (const auto& c : j.at("conv"))
    arch.conv.push_back(ConvSpec{c.at("in").get<std::size_t>(), c.at("out").get<std::size_t>(),
                                 c.at("k").get<std::size_t>(), c.at("stride").get<std::size_t>(),
                                 c.at("pad").get<std::size_t>()});
  arch.fc_width = j.at("fc_width");
  arch.n_actions = j.at("n_actions");
  arch.time_window = j.at("time_window");
  arch.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
  arch.lif.tau = j.at("lif").at("tau");
  arch.lif.v_th = j.at("lif").at("v_th");
  arch.lif.v_reset = j.at("lif").at("v_reset");
  arch.pbln_conv = j.at("pbln_conv");
  arch.pbln_fc = j.at("pbln_fc");
  return arch;
}

void write_tensor(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void read_tensor(std::ifstream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const Architecture& arch,
                     const NetworkParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const std::string header = arch_to_json(arch).dump();
  const std::uint64_t header_len = header.size();
  out.write(kCkptMagic, sizeof(kCkptMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (std::size_t l = 0; l < params.conv_kernels.size(); ++l) {
    write_tensor(out, params.conv_kernels[l]);
    write_tensor(out, params.pbln[l].lambda);
    write_tensor(out, params.pbln[l].beta);
  }
  if (params.pbln_fc) {
    write_tensor(out, params.pbln_fc->lambda);
    write_tensor(out, params.pbln_fc->beta);
  }
  write_tensor(out, params.fc_weights);
  write_tensor(out, params.readout_weights);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::pair<Architecture, NetworkParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kCkptMagic, 8))
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  const Architecture arch = arch_from_json(nlohmann::json::parse(header));
  arch.validate();

  NetworkParams params;
  for (const ConvSpec& s : arch.conv) {
    Tensor kernels({s.out_channels, s.in_channels, s.kernel_size, s.kernel_size});
    read_tensor(in, kernels);
    PbLnParams p = pbln_init(arch.lif, s.out_channels);
    read_tensor(in, p.lambda);
    read_tensor(in, p.beta);
    params.conv_kernels.push_back(std::move(kernels));
    params.pbln.push_back(std::move(p));
  }
  if (arch.pbln_fc) {
    PbLnParams p = pbln_init(arch.lif, arch.fc_width);
    read_tensor(in, p.lambda);
    read_tensor(in, p.beta);
    params.pbln_fc = std::move(p);
  }
  params.fc_weights = Tensor({arch.fc_width, arch.flat_conv_out()});
  read_tensor(in, params.fc_weights);
  params.readout_weights = Tensor({arch.n_actions, arch.fc_width});
  read_tensor(in, params.readout_weights);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return {arch, params};
}

}  // namespace sdqn
