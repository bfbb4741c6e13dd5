#include "hgv/seqenc.hpp"

#include <cmath>
#include <vector>

#include "hgv/errors.hpp"

namespace hgv::seqenc {

using tensor::Var;

std::string param_prefix(std::size_t channel) { return "lstm/ch" + std::to_string(channel) + "/"; }

void register_params(tensor::ParamStore& store, std::size_t channel, std::size_t hidden, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::string p = param_prefix(channel);
  store.add(p + "W_x", tensor::uniform_init({4 * hidden, 1}, bound, seed, p + "W_x"));
  store.add(p + "W_h", tensor::uniform_init({4 * hidden, hidden}, bound, seed, p + "W_h"));
  store.add(p + "b", tensor::uniform_init({4 * hidden, 1}, bound, seed, p + "b"));
}

ChannelLSTM bind(tensor::ParamStore& store, std::size_t channel) {
  const std::string p = param_prefix(channel);
  ChannelLSTM lstm;
  lstm.w_input = &store.get(p + "W_x");
  lstm.w_hidden = &store.get(p + "W_h");
  lstm.bias = &store.get(p + "b");
  lstm.hidden = lstm.w_hidden->value.dim(1);
  return lstm;
}

HiddenSeq lstm_channel_forward(tensor::Tape& tape, std::span<const double> sequence, const ChannelLSTM& lstm) {
  if (sequence.empty()) throw StructuralError("LSTM input sequence is empty");
  const std::size_t d = lstm.hidden;
  Var w_x = tape.param(*lstm.w_input);
  Var w_h = tape.param(*lstm.w_hidden);
  Var b = tape.param(*lstm.bias);

  std::vector<Var> states;
  states.reserve(sequence.size());
  Var h, c;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    Var z = tensor::add(tensor::mul(w_x, tape.constant(tensor::Tensor::scalar(sequence[t]))), b);
    if (t > 0) z = tensor::add(z, tensor::matmul(w_h, h));
    Var in_gate = tensor::sigmoid(tensor::slice_rows(z, 0, d));
    Var forget_gate = tensor::sigmoid(tensor::slice_rows(z, d, d));
    Var candidate = tensor::tanh(tensor::slice_rows(z, 2 * d, d));
    Var out_gate = tensor::sigmoid(tensor::slice_rows(z, 3 * d, d));
    Var written = tensor::mul(in_gate, candidate);
    c = t > 0 ? tensor::add(tensor::mul(forget_gate, c), written) : written;
    h = tensor::mul(out_gate, tensor::tanh(c));
    states.push_back(h);
  }
  return {tensor::concat_cols(states), h};
}

}  // namespace hgv::seqenc
