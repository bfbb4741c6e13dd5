#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hgv/autodiff.hpp"
#include "hgv/battn.hpp"
#include "hgv/data.hpp"
#include "hgv/gge.hpp"
#include "hgv/model_config.hpp"
#include "hgv/seqenc.hpp"

namespace hgv::fusion {

struct FuseParams {
  tensor::Parameter* static_weight = nullptr;  // d_b x N_b
  tensor::Parameter* static_bias = nullptr;    // d_b x 1
  tensor::Parameter* fuse_weight = nullptr;    // d_1 x (d_b + d_g), or d_1 x d_b without GGE
  tensor::Parameter* fuse_bias = nullptr;      // d_1 x 1
};

struct MultiHeadParams {
  std::vector<tensor::Parameter*> query, key, value;  // per head, d_1 x d_1
  tensor::Parameter* output = nullptr;                // (d_1 * N_H) x d_1
};

struct PredictorParams {
  tensor::Parameter* hidden_weight = nullptr;  // d_1 x d_1
  tensor::Parameter* hidden_bias = nullptr;    // d_1 x 1
  tensor::Parameter* out_weight = nullptr;     // 1 x d_1
  tensor::Parameter* out_bias = nullptr;       // 1 x 1
};

// G_i = W_fuse [relu(W_b f_b + b_b); E_g] + b_fuse. Pass an invalid `graph_embedding`
// to fuse the static embedding alone.
tensor::Var embed_and_fuse(tensor::Tape& tape, std::span<const double> static_features, tensor::Var graph_embedding,
                           const FuseParams& params);

struct MultiHeadOptions {
  bool residual = true;
  double dropout = 0.0;
  bool train = false;
  std::mt19937_64* rng = nullptr;  // required when train && dropout > 0
};

struct MultiHeadResult {
  tensor::Var output;                     // d_1 x (N_d + 1)
  std::vector<tensor::Var> attention;     // per head, (N_d+1) x (N_d+1), rows sum to 1
};

// Token-wise self-attention over the columns of `stack` (d_1 x M).
MultiHeadResult multihead(tensor::Tape& tape, tensor::Var stack, const MultiHeadParams& params,
                          const MultiHeadOptions& options = {});

struct Aggregate {
  tensor::Var representation;  // H_rep, d_1 x 1
  tensor::Var weights;         // mu, M x 1
};

// mu = softmax_m(H_m^T H_last), H_rep = sum_m mu_m H_m (the last column included).
Aggregate global_view_aggregate(tensor::Var refined);

// sigmoid(w2 relu(W1 h + b1) + b2), 1 x 1.
tensor::Var predict(tensor::Tape& tape, tensor::Var representation, const PredictorParams& params);

enum class Mode { train, eval };

struct Trace {
  tensor::Tensor graph;                    // T x T (empty without GGE)
  std::vector<std::vector<double>> alpha;  // per channel, length T
  std::vector<std::vector<double>> beta;   // per channel, length T (empty without harmonic attention)
  std::vector<double> mu;                  // length N_d + 1
  double y_hat = 0.0;
};

struct ForwardResult {
  tensor::Var y_hat;           // 1 x 1
  tensor::Var representation;  // H_rep, d_1 x 1
  Trace trace;
};

// Every sub-network of one HGV model. Copies rebind their parameter pointers
// to their own store.
class HgvModel {
 public:
  HgvModel(ModelConfig config, std::uint64_t seed);
  // Adopts an existing parameter set (e.g. from a checkpoint); names and
  // shapes must match what `config` would register.
  HgvModel(ModelConfig config, tensor::ParamStore params);
  HgvModel(const HgvModel& other);
  HgvModel& operator=(const HgvModel& other);
  HgvModel(HgvModel&&) = delete;
  HgvModel& operator=(HgvModel&&) = delete;

  const ModelConfig& config() const { return config_; }
  tensor::ParamStore& params() { return store_; }
  const tensor::ParamStore& params() const { return store_; }

  const gge::GGEParams& gge() const { return gge_; }
  const std::vector<seqenc::ChannelLSTM>& lstms() const { return lstms_; }
  const battn::BetaAttnParams& attention() const { return battn_; }
  const FuseParams& fuse() const { return fuse_; }
  const MultiHeadParams& heads() const { return heads_; }
  const PredictorParams& predictor() const { return predictor_; }

  static tensor::ParamStore build_params(const ModelConfig& config, std::uint64_t seed);

 private:
  void bind();

  ModelConfig config_;
  tensor::ParamStore store_;
  gge::GGEParams gge_;
  std::vector<seqenc::ChannelLSTM> lstms_;
  battn::BetaAttnParams battn_;
  FuseParams fuse_;
  MultiHeadParams heads_;
  PredictorParams predictor_;
};

// One instance through the full pipeline: correlation graph and GGE, static
// embedding and FuseNet, per-channel LSTM with (harmonic) attention, multi-head
// refinement, global-view aggregation and prediction.
ForwardResult hgv_forward(tensor::Tape& tape, const data::InstanceRecord& record, HgvModel& model, Mode mode,
                          std::mt19937_64* rng = nullptr);

}  // namespace hgv::fusion
