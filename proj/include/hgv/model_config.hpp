#pragma once

#include <cstddef>

#include "hgv/data.hpp"

namespace hgv {

// Architecture of one HGV model. Training knobs live in harness::TrainConfig.
struct ModelConfig {
  data::Dims dims{6, 4, 16};
  std::size_t d1 = 64;  // LSTM hidden size and stacked representation width
  std::size_t d2 = 32;  // beta-attention query/key width
  std::size_t db = 64;  // static embedding width
  std::size_t dg = 64;  // graph embedding width
  std::size_t heads = 4;
  std::size_t cnn_layers = 2;
  std::size_t lambda1 = 64;  // output channels of conv layer 1
  std::size_t lambda2 = 128; // output channels of conv layer 2
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t lstm_layers = 1;
  double c = 1.0;        // constant inside the beta-attention log term
  double dropout = 0.5;  // applied to the refined stack in train mode
  bool disable_gge = false;
  bool disable_beta_attn = false;

  // Throws ConfigError on invalid values, StructuralError when the conv stack
  // would shrink the T x T graph below the kernel size.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace hgv
