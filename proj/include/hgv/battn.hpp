#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgv/autodiff.hpp"
#include "hgv/seqenc.hpp"

namespace hgv::battn {

// Time-aware decay for 1-based step t of T: 1 - (T - t) / T, computed as t / T.
double time_decay(std::size_t t, std::size_t steps);

// sigmoid(value) / sigmoid(max |row|). Treated as a constant statistic.
double significance(double value, double row_max_abs);
std::vector<double> significance_row(std::span<const double> row);
std::vector<double> decay_row(std::size_t steps);

// Weighted harmonic mean (1 + beta) d o / (beta d + o), beta >= 0.
double harmonic_weight(double decay, double significance, double beta);

struct ChannelParams {
  tensor::Parameter* w_query = nullptr;  // d2 x d1
  tensor::Parameter* w_key = nullptr;    // d2 x d1
  tensor::Parameter* gamma = nullptr;    // scalar, initialized to 1
};

struct BetaAttnParams {
  std::vector<ChannelParams> channels;
  tensor::Parameter* beta_raw = nullptr;  // beta = softplus(beta_raw)
  double c = 1.0;
};

inline constexpr double kDenominatorFloor = 1e-8;

void register_params(tensor::ParamStore& store, std::size_t n_channels, std::size_t d1, std::size_t d2,
                     bool with_harmonic, std::uint64_t seed);
BetaAttnParams bind(tensor::ParamStore& store, std::size_t n_channels, bool with_harmonic, double c);

// softplus(beta_raw) as a 1-element tape node.
tensor::Var trade_off(tensor::Tape& tape, const BetaAttnParams& params);

// Harmonic weights beta_{n,1..T} as a 1 x T node; gradient flows into beta only.
tensor::Var harmonic_weights(tensor::Tape& tape, tensor::Var beta, std::span<const double> decay,
                             std::span<const double> significance);

// theta_t = tanh(s_t / (gamma * log(c + 1 - sigmoid(s_t)) * beta_t * T)),
// s_t = (W_q h_T)^T (W_k h_t); alpha = softmax(theta). Returns 1 x T.
tensor::Var battn_alpha(tensor::Tape& tape, const seqenc::HiddenSeq& hidden, tensor::Var betas,
                        const ChannelParams& params, double c);

// Plain key-query attention, theta_t = tanh(s_t / sqrt(d2)). Returns 1 x T.
tensor::Var plain_alpha(tensor::Tape& tape, const seqenc::HiddenSeq& hidden, const ChannelParams& params);

// sum_t alpha_t h_t as a d x 1 node.
tensor::Var channel_represent(const seqenc::HiddenSeq& hidden, tensor::Var alpha);

}  // namespace hgv::battn
