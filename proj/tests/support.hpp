#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "hgv/autodiff.hpp"
#include "hgv/gradcheck.hpp"

namespace support {

using hgv::tensor::Parameter;
using hgv::tensor::Shape;
using hgv::tensor::Tape;
using hgv::tensor::Tensor;
using hgv::tensor::Var;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks op(inputs) contracted with a fixed random cotangent against central
// differences. Returns the report of grad_check.
inline hgv::tensor::GradCheckReport check_op(const OpFn& op, std::vector<Tensor> inputs, std::mt19937_64& rng,
                                             hgv::tensor::GradCheckOptions options = {}) {
  std::vector<std::unique_ptr<Parameter>> owned;
  std::vector<Parameter*> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    owned.push_back(std::make_unique<Parameter>("x" + std::to_string(i), std::move(inputs[i])));
    params.push_back(owned.back().get());
  }
  Tensor cotangent;
  auto f = [&](Tape& tape) {
    std::vector<Var> vars;
    for (auto* p : params) vars.push_back(tape.param(*p));
    Var out = op(tape, vars);
    if (!cotangent.defined()) cotangent = random_tensor(out.shape(), rng, 0.5, 1.5);
    return hgv::tensor::sum(hgv::tensor::mul(out, tape.constant(cotangent)));
  };
  return hgv::tensor::grad_check(f, params, options);
}

}  // namespace support
