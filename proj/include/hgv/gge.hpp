#pragma once

#include <cstdint>
#include <vector>

#include "hgv/autodiff.hpp"
#include "hgv/model_config.hpp"

namespace hgv::gge {

// T x T adjacency of (cos + 1) / 2 between time-step status vectors.
struct CorrGraph {
  tensor::Tensor adjacency;
  std::size_t steps() const { return adjacency.dim(0); }
};

// `dynamic` is N_d x T. Each unordered pair is computed once, so the result is
// exactly symmetric. A zero column has cosine 0 with everything (entry 0.5).
CorrGraph build_corr_graph(const tensor::Tensor& dynamic);

struct GGEParams {
  std::vector<tensor::Parameter*> kernels;  // layer l: lambda_l x lambda_{l-1} x k x k
  std::vector<tensor::Parameter*> biases;   // layer l: lambda_l
  tensor::Parameter* fc_weight = nullptr;   // d_g x flatten_length
  tensor::Parameter* fc_bias = nullptr;     // d_g x 1
  std::size_t stride = 1;
};

// Side of the square feature map after `layers` valid convolutions.
std::size_t feature_side(std::size_t steps, std::size_t kernel, std::size_t stride, std::size_t layers);
std::size_t flatten_length(const ModelConfig& config);

void register_params(tensor::ParamStore& store, const ModelConfig& config, std::uint64_t seed);
GGEParams bind(tensor::ParamStore& store, const ModelConfig& config);

// relu(conv) stack followed by relu(W_fc * flatten + b_fc). Returns d_g x 1.
tensor::Var gge_forward(tensor::Tape& tape, const CorrGraph& graph, const GGEParams& params);

}  // namespace hgv::gge
