#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hgv/autodiff.hpp"

namespace hgv::tensor {

enum class Stencil {
  central2,  // (f(p+h) - f(p-h)) / 2h
  central4,  // (-f(p+2h) + 8f(p+h) - 8f(p-h) + f(p-2h)) / 12h
};

struct GradCheckOptions {
  double step = 1e-5;
  Stencil stencil = Stencil::central2;
  // Coordinates whose +/- step evaluations land on a different piece of a
  // piecewise op (relu, clamp) than the base point are skipped.
  bool skip_kinks = true;
  // Extra per-coordinate exclusion, e.g. an input lying within 1e-9 of a kink.
  std::function<bool(const Parameter&, std::size_t)> skip;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Builds the loss on a fresh tape. Must be deterministic.
using ScalarFn = std::function<Var(Tape&)>;

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares tape gradients of `f` against central differences for every
// coordinate of every parameter in `params`. Throws ProtocolError when two
// evaluations at the same point disagree.
GradCheckReport grad_check(const ScalarFn& f, std::span<Parameter* const> params, const GradCheckOptions& options = {});

}  // namespace hgv::tensor
