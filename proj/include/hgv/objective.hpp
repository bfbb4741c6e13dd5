#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "hgv/autodiff.hpp"

namespace hgv::objective {

// 1/2 (||C||_F^2 - ||diag C||^2) with C the (1/B) batch covariance of the
// columns of `activations` (B x F).
tensor::Var decov_loss(tensor::Var activations);

inline constexpr double kProbabilityClamp = 1e-12;

// -sum_{y=1} log p - sum_{y=0} log(1 - p). `predictions` is B x 1.
tensor::Var ce_loss(tensor::Var predictions, std::span<const int> labels);

// L_C + lambda_d * L_DeCov.
tensor::Var hybrid_loss(tensor::Var classification, tensor::Var decov, double lambda_d);

// Fraction of (positive, negative) pairs ranked correctly, ties counted 1/2.
double auroc(std::span<const double> scores, std::span<const int> labels);
// Average precision over the order (score desc, index asc).
double auprc(std::span<const double> scores, std::span<const int> labels);
// max over thresholds at distinct scores of min(sensitivity, precision).
double min_se_pplus(std::span<const double> scores, std::span<const int> labels);

using Metric = std::function<double(std::span<const double>, std::span<const int>)>;

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;          // population standard deviation over resamples
  std::size_t redrawn = 0;   // single-class resamples that were redrawn
};

// Resample i draws from an engine seeded with seed + i, so results do not
// depend on evaluation order.
BootstrapResult bootstrap(const Metric& metric, std::span<const double> scores, std::span<const int> labels,
                          std::size_t n_boot = 1000, std::uint64_t seed = 0);

struct MetricValue {
  double point = 0.0;
  double mean = 0.0;
  double std = 0.0;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct MetricReport {
  MetricValue auroc, auprc, min_se_pplus;
  std::size_t n_boot = 0;
  std::size_t redrawn = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport metric_report(std::span<const double> scores, std::span<const int> labels, std::size_t n_boot,
                           std::uint64_t seed);

}  // namespace hgv::objective
