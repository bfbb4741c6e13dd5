#include "hgv/gge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hgv/errors.hpp"

namespace hgv::gge {

using tensor::Tensor;
using tensor::Var;

CorrGraph build_corr_graph(const Tensor& dynamic) {
  if (dynamic.rank() != 2) throw StructuralError("build_corr_graph expects an N_d x T matrix");
  const std::size_t nd = dynamic.dim(0), T = dynamic.dim(1);
  std::vector<double> norms(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t n = 0; n < nd; ++n) s += dynamic.at(n, t) * dynamic.at(n, t);
    norms[t] = std::sqrt(s);
  }
  CorrGraph g{Tensor({T, T})};
  for (std::size_t a = 0; a < T; ++a) {
    g.adjacency.at(a, a) = norms[a] > 0.0 ? 1.0 : 0.5;
    for (std::size_t b = a + 1; b < T; ++b) {
      double cosine = 0.0;
      if (norms[a] > 0.0 && norms[b] > 0.0) {
        double dot = 0.0;
        for (std::size_t n = 0; n < nd; ++n) dot += dynamic.at(n, a) * dynamic.at(n, b);
        cosine = std::clamp(dot / (norms[a] * norms[b]), -1.0, 1.0);
      }
      const double v = (cosine + 1.0) / 2.0;
      g.adjacency.at(a, b) = v;
      g.adjacency.at(b, a) = v;
    }
  }
  return g;
}

std::size_t feature_side(std::size_t steps, std::size_t kernel, std::size_t stride, std::size_t layers) {
  std::size_t side = steps;
  for (std::size_t l = 0; l < layers; ++l) {
    if (side < kernel)
      throw StructuralError("GGE: feature map of side " + std::to_string(side) + " is smaller than kernel " +
                            std::to_string(kernel) + " at layer " + std::to_string(l + 1));
    side = (side - kernel) / stride + 1;
  }
  return side;
}

std::size_t flatten_length(const ModelConfig& config) {
  const std::size_t side = feature_side(config.dims.steps, config.kernel, config.stride, config.cnn_layers);
  const std::size_t channels = config.cnn_layers == 1 ? config.lambda1 : config.lambda2;
  return channels * side * side;
}

namespace {
std::string conv_name(std::size_t l, const char* what) { return "gge/conv" + std::to_string(l + 1) + "/" + what; }
}  // namespace

void register_params(tensor::ParamStore& store, const ModelConfig& config, std::uint64_t seed) {
  const std::size_t k = config.kernel;
  std::size_t in_channels = 1;
  for (std::size_t l = 0; l < config.cnn_layers; ++l) {
    const std::size_t out_channels = l == 0 ? config.lambda1 : config.lambda2;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * k * k));
    store.add(conv_name(l, "W"), tensor::uniform_init({out_channels, in_channels, k, k}, bound, seed, conv_name(l, "W")));
    store.add(conv_name(l, "b"), tensor::uniform_init({out_channels}, bound, seed, conv_name(l, "b")));
    in_channels = out_channels;
  }
  const std::size_t flat = flatten_length(config);
  const double bound = 1.0 / std::sqrt(static_cast<double>(flat));
  store.add("gge/fc/W", tensor::uniform_init({config.dg, flat}, bound, seed, "gge/fc/W"));
  store.add("gge/fc/b", tensor::uniform_init({config.dg, 1}, bound, seed, "gge/fc/b"));
}

GGEParams bind(tensor::ParamStore& store, const ModelConfig& config) {
  GGEParams p;
  for (std::size_t l = 0; l < config.cnn_layers; ++l) {
    p.kernels.push_back(&store.get(conv_name(l, "W")));
    p.biases.push_back(&store.get(conv_name(l, "b")));
  }
  p.fc_weight = &store.get("gge/fc/W");
  p.fc_bias = &store.get("gge/fc/b");
  p.stride = config.stride;
  return p;
}

Var gge_forward(tensor::Tape& tape, const CorrGraph& graph, const GGEParams& params) {
  const std::size_t T = graph.steps();
  Var x = tape.constant(graph.adjacency.reshaped({1, T, T}));
  for (std::size_t l = 0; l < params.kernels.size(); ++l) {
    x = tensor::relu(tensor::conv2d(x, tape.param(*params.kernels[l]), tape.param(*params.biases[l]), params.stride));
  }
  const std::size_t flat = x.numel();
  if (params.fc_weight->value.dim(1) != flat)
    throw StructuralError("GGE: flattened map has " + std::to_string(flat) + " values, FC expects " +
                          std::to_string(params.fc_weight->value.dim(1)));
  Var flat_x = tensor::reshape(x, {flat, 1});
  Var z = tensor::add(tensor::matmul(tape.param(*params.fc_weight), flat_x), tape.param(*params.fc_bias));
  return tensor::relu(z);
}

}  // namespace hgv::gge
