#pragma once

#include <string>
#include <vector>

#include "support.hpp"

namespace support {

struct OpCase {
  std::string name;
  OpFn op;
  std::function<std::vector<Tensor>(std::mt19937_64&)> inputs;
};

inline std::vector<OpCase> differentiable_ops() {
  namespace t = hgv::tensor;
  auto two = [](Shape a, Shape b, double lo = -1.0, double hi = 1.0) {
    return [=](std::mt19937_64& rng) {
      return std::vector<Tensor>{random_tensor(a, rng, lo, hi), random_tensor(b, rng, lo, hi)};
    };
  };
  auto one = [](Shape a, double lo = -1.0, double hi = 1.0) {
    return [=](std::mt19937_64& rng) { return std::vector<Tensor>{random_tensor(a, rng, lo, hi)}; };
  };
  auto away_from_zero = [](Shape a) {
    return [=](std::mt19937_64& rng) {
      Tensor x = random_tensor(a, rng, 0.5, 2.0);
      std::bernoulli_distribution flip(0.5);
      for (auto& v : x.data())
        if (flip(rng)) v = -v;
      return std::vector<Tensor>{random_tensor(a, rng), x};
    };
  };
  using V = std::vector<Var>;
  std::vector<OpCase> cases = {
      {"add", [](Tape&, const V& x) { return t::add(x[0], x[1]); }, two({3, 4}, {3, 4})},
      {"add_scalar_broadcast", [](Tape&, const V& x) { return t::add(x[0], x[1]); }, two({3, 4}, {1})},
      {"sub", [](Tape&, const V& x) { return t::sub(x[0], x[1]); }, two({2, 5}, {2, 5})},
      {"mul", [](Tape&, const V& x) { return t::mul(x[0], x[1]); }, two({4, 3}, {4, 3})},
      {"mul_scalar_broadcast", [](Tape&, const V& x) { return t::mul(x[1], x[0]); }, two({4, 3}, {1})},
      {"div", [](Tape&, const V& x) { return t::div(x[0], x[1]); }, away_from_zero({3, 3})},
      {"sigmoid", [](Tape&, const V& x) { return t::sigmoid(x[0]); }, one({3, 4}, -3.0, 3.0)},
      {"tanh", [](Tape&, const V& x) { return t::tanh(x[0]); }, one({3, 4}, -2.0, 2.0)},
      {"relu", [](Tape&, const V& x) { return t::relu(x[0]); }, one({4, 4})},
      {"log", [](Tape&, const V& x) { return t::log(x[0]); }, one({3, 4}, 0.5, 3.0)},
      {"negate", [](Tape&, const V& x) { return t::negate(x[0]); }, one({5})},
      {"scale", [](Tape&, const V& x) { return t::scale(x[0], -2.5); }, one({2, 3})},
      {"add_constant", [](Tape&, const V& x) { return t::add_constant(x[0], 0.75); }, one({2, 3})},
      {"softplus", [](Tape&, const V& x) { return t::softplus(x[0]); }, one({3, 3}, -3.0, 3.0)},
      {"clamp", [](Tape&, const V& x) { return t::clamp(x[0], -0.5, 0.5); }, one({4, 4})},
      {"clamp_abs_min", [](Tape&, const V& x) { return t::clamp_abs_min(x[0], 0.2); }, one({4, 4})},
      {"matmul", [](Tape&, const V& x) { return t::matmul(x[0], x[1]); }, two({3, 4}, {4, 2})},
      {"transpose", [](Tape&, const V& x) { return t::transpose(x[0]); }, one({3, 5})},
      {"reshape", [](Tape&, const V& x) { return t::reshape(x[0], {6, 2}); }, one({3, 4})},
      {"conv2d",
       [](Tape&, const V& x) { return t::conv2d(x[0], x[1], x[2], 1); },
       [](std::mt19937_64& rng) {
         return std::vector<Tensor>{random_tensor({2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                                    random_tensor({3}, rng)};
       }},
      {"conv2d_stride2",
       [](Tape&, const V& x) { return t::conv2d(x[0], x[1], x[2], 2); },
       [](std::mt19937_64& rng) {
         return std::vector<Tensor>{random_tensor({1, 7, 7}, rng), random_tensor({2, 1, 3, 3}, rng),
                                    random_tensor({2}, rng)};
       }},
      {"softmax_axis0", [](Tape&, const V& x) { return t::softmax(x[0], 0); }, one({4, 3}, -2.0, 2.0)},
      {"softmax_axis1", [](Tape&, const V& x) { return t::softmax(x[0], 1); }, one({3, 5}, -2.0, 2.0)},
      {"sum", [](Tape&, const V& x) { return t::sum(x[0]); }, one({3, 4})},
      {"mean", [](Tape&, const V& x) { return t::mean(x[0]); }, one({3, 4})},
      {"sum_axis0", [](Tape&, const V& x) { return t::reduce(t::ReduceKind::sum, x[0], 0); }, one({3, 4})},
      {"mean_axis1", [](Tape&, const V& x) { return t::reduce(t::ReduceKind::mean, x[0], 1); }, one({3, 4})},
      {"slice_rows", [](Tape&, const V& x) { return t::slice_rows(x[0], 1, 2); }, one({4, 3})},
      {"concat_cols",
       [](Tape&, const V& x) { return t::concat_cols(std::vector<Var>{x[0], x[1]}); }, two({3, 2}, {3, 4})},
      {"concat_rows",
       [](Tape&, const V& x) { return t::concat_rows(std::vector<Var>{x[0], x[1]}); }, two({2, 3}, {1, 3})},
  };
  return cases;
}

}  // namespace support
