#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hgv/autodiff.hpp"

namespace hgv::seqenc {

// Single-layer LSTM over a scalar sequence. Gate blocks are stacked in the
// order input, forget, candidate, output (rows [0,d), [d,2d), [2d,3d), [3d,4d)).
struct ChannelLSTM {
  tensor::Parameter* w_input = nullptr;   // 4d x 1
  tensor::Parameter* w_hidden = nullptr;  // 4d x d
  tensor::Parameter* bias = nullptr;      // 4d x 1
  std::size_t hidden = 0;
};

struct HiddenSeq {
  tensor::Var states;  // d x T, column t is h_t
  tensor::Var last;    // d x 1, h_T
};

std::string param_prefix(std::size_t channel);
void register_params(tensor::ParamStore& store, std::size_t channel, std::size_t hidden, std::uint64_t seed);
ChannelLSTM bind(tensor::ParamStore& store, std::size_t channel);

// Zero initial hidden and cell state.
HiddenSeq lstm_channel_forward(tensor::Tape& tape, std::span<const double> sequence, const ChannelLSTM& lstm);

}  // namespace hgv::seqenc
