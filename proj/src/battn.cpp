#include "hgv/battn.hpp"

#include <cmath>
#include <string>

#include "hgv/errors.hpp"

namespace hgv::battn {

using tensor::Tensor;
using tensor::Var;

namespace {
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string channel_prefix(std::size_t n) { return "battn/ch" + std::to_string(n) + "/"; }
}  // namespace

double time_decay(std::size_t t, std::size_t steps) {
  if (t < 1 || t > steps) throw DomainError("time_decay: step " + std::to_string(t) + " outside [1, T]");
  return static_cast<double>(t) / static_cast<double>(steps);
}

double significance(double value, double row_max_abs) { return sigmoid(value) / sigmoid(row_max_abs); }

std::vector<double> significance_row(std::span<const double> row) {
  double mx = 0.0;
  for (double v : row) mx = std::max(mx, std::abs(v));
  std::vector<double> out;
  out.reserve(row.size());
  for (double v : row) out.push_back(significance(v, mx));
  return out;
}

std::vector<double> decay_row(std::size_t steps) {
  std::vector<double> out(steps);
  for (std::size_t t = 1; t <= steps; ++t) out[t - 1] = time_decay(t, steps);
  return out;
}

double harmonic_weight(double decay, double significance, double beta) {
  if (beta < 0.0) throw DomainError("harmonic_weight: beta must be non-negative");
  return decay * ((1.0 + beta) * significance / (beta * decay + significance));
}

void register_params(tensor::ParamStore& store, std::size_t n_channels, std::size_t d1, std::size_t d2,
                     bool with_harmonic, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d1));
  for (std::size_t n = 0; n < n_channels; ++n) {
    const std::string p = channel_prefix(n);
    store.add(p + "Wq", tensor::uniform_init({d2, d1}, bound, seed, p + "Wq"));
    store.add(p + "Wk", tensor::uniform_init({d2, d1}, bound, seed, p + "Wk"));
    if (with_harmonic) store.add(p + "gamma", Tensor::scalar(1.0));
  }
  if (with_harmonic) store.add("battn/beta_raw", Tensor::scalar(0.0));
}

BetaAttnParams bind(tensor::ParamStore& store, std::size_t n_channels, bool with_harmonic, double c) {
  BetaAttnParams p;
  p.c = c;
  for (std::size_t n = 0; n < n_channels; ++n) {
    const std::string prefix = channel_prefix(n);
    ChannelParams ch;
    ch.w_query = &store.get(prefix + "Wq");
    ch.w_key = &store.get(prefix + "Wk");
    if (with_harmonic) ch.gamma = &store.get(prefix + "gamma");
    p.channels.push_back(ch);
  }
  if (with_harmonic) p.beta_raw = &store.get("battn/beta_raw");
  return p;
}

Var trade_off(tensor::Tape& tape, const BetaAttnParams& params) {
  if (!params.beta_raw) throw StructuralError("beta-attention trade-off parameter not registered");
  return tensor::softplus(tape.param(*params.beta_raw));
}

Var harmonic_weights(tensor::Tape& tape, Var beta, std::span<const double> decay, std::span<const double> significance) {
  if (decay.size() != significance.size()) throw StructuralError("harmonic_weights: decay/significance length mismatch");
  const std::size_t T = decay.size();
  Tensor d({1, T}), o({1, T});
  for (std::size_t t = 0; t < T; ++t) {
    d[t] = decay[t];
    o[t] = significance[t];
  }
  Var d_const = tape.constant(d);
  Var o_const = tape.constant(std::move(o));
  Var numerator = tensor::mul(tensor::add_constant(beta, 1.0), o_const);
  Var denominator = tensor::add(tensor::mul(beta, d_const), o_const);
  return tensor::mul(d_const, tensor::div(numerator, denominator));
}

namespace {
// s_t = (W_q h_T)^T (W_k h_t), 1 x T.
Var key_query_scores(tensor::Tape& tape, const seqenc::HiddenSeq& hidden, const ChannelParams& params) {
  Var q = tensor::matmul(tape.param(*params.w_query), hidden.last);
  Var keys = tensor::matmul(tape.param(*params.w_key), hidden.states);
  return tensor::matmul(tensor::transpose(q), keys);
}
}  // namespace

Var battn_alpha(tensor::Tape& tape, const seqenc::HiddenSeq& hidden, Var betas, const ChannelParams& params, double c) {
  if (!params.gamma) throw StructuralError("battn_alpha: channel has no gamma parameter");
  const std::size_t T = hidden.states.shape()[1];
  Var scores = key_query_scores(tape, hidden, params);
  Var log_term = tensor::log(tensor::add_constant(tensor::negate(tensor::sigmoid(scores)), c + 1.0));
  Var denominator = tensor::mul(tensor::mul(tape.param(*params.gamma), log_term), betas);
  denominator = tensor::clamp_abs_min(tensor::scale(denominator, static_cast<double>(T)), kDenominatorFloor);
  Var theta = tensor::tanh(tensor::div(scores, denominator));
  return tensor::softmax(theta, 1);
}

Var plain_alpha(tensor::Tape& tape, const seqenc::HiddenSeq& hidden, const ChannelParams& params) {
  const double d2 = static_cast<double>(params.w_query->value.dim(0));
  Var scores = key_query_scores(tape, hidden, params);
  return tensor::softmax(tensor::tanh(tensor::scale(scores, 1.0 / std::sqrt(d2))), 1);
}

Var channel_represent(const seqenc::HiddenSeq& hidden, Var alpha) {
  const std::size_t T = hidden.states.shape()[1];
  if (alpha.numel() != T) throw StructuralError("channel_represent: alpha length does not match sequence length");
  return tensor::matmul(hidden.states, tensor::reshape(alpha, {T, 1}));
}

}  // namespace hgv::battn
