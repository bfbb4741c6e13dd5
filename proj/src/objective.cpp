#include "hgv/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hgv/errors.hpp"

namespace hgv::objective {

using tensor::Tensor;
using tensor::Var;

Var decov_loss(Var activations) {
  if (activations.value().rank() != 2) throw StructuralError("decov_loss expects a B x F matrix");
  tensor::Tape& tape = activations.tape();
  const std::size_t B = activations.shape()[0], F = activations.shape()[1];
  const double inv_b = 1.0 / static_cast<double>(B);
  Var column_mean = tensor::scale(tensor::matmul(tape.constant(Tensor({1, B}, 1.0)), activations), inv_b);  // 1 x F
  Var centered = tensor::sub(activations, tensor::matmul(tape.constant(Tensor({B, 1}, 1.0)), column_mean));
  Var cov = tensor::scale(tensor::matmul(tensor::transpose(centered), centered), inv_b);  // F x F
  Tensor off_diagonal({F, F}, 1.0);
  for (std::size_t i = 0; i < F; ++i) off_diagonal.at(i, i) = 0.0;
  Var squared = tensor::mul(cov, cov);
  return tensor::scale(tensor::sum(tensor::mul(squared, tape.constant(std::move(off_diagonal)))), 0.5);
}

Var ce_loss(Var predictions, std::span<const int> labels) {
  const std::size_t B = predictions.numel();
  if (labels.size() != B) throw StructuralError("ce_loss: label count does not match predictions");
  tensor::Tape& tape = predictions.tape();
  Tensor positive(predictions.shape()), negative(predictions.shape());
  for (std::size_t i = 0; i < B; ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw DomainError("ce_loss: label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
    positive[i] = labels[i] == 1 ? 1.0 : 0.0;
    negative[i] = 1.0 - positive[i];
  }
  Var p = tensor::clamp(predictions, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var log_p = tensor::log(p);
  Var log_not_p = tensor::log(tensor::add_constant(tensor::negate(p), 1.0));
  Var total = tensor::add(tensor::sum(tensor::mul(log_p, tape.constant(std::move(positive)))),
                          tensor::sum(tensor::mul(log_not_p, tape.constant(std::move(negative)))));
  return tensor::negate(total);
}

Var hybrid_loss(Var classification, Var decov, double lambda_d) {
  if (lambda_d < 0.0) throw DomainError("hybrid_loss: lambda_d must be non-negative");
  return tensor::add(classification, tensor::scale(decov, lambda_d));
}

namespace {

struct ClassCounts {
  std::size_t pos = 0, neg = 0;
};

ClassCounts count_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw StructuralError("scores and labels differ in length");
  ClassCounts c;
  for (int y : labels) {
    if (y == 1)
      ++c.pos;
    else if (y == 0)
      ++c.neg;
    else
      throw DomainError("label " + std::to_string(y) + " not in {0,1}");
  }
  return c;
}

void require_both(const ClassCounts& c, const char* metric) {
  if (c.pos == 0 || c.neg == 0) throw ProtocolError(std::string(metric) + " needs both classes present");
}

// Indices sorted by score descending, ties by index ascending.
std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = count_classes(scores, labels);
  require_both(counts, "auroc");
  const auto order = ranking(scores);
  // Walk tie groups from the top; every positive beats the negatives below its
  // group and splits the ones tied with it.
  double wins = 0.0;
  std::size_t neg_above = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos_group = 0, neg_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos_group : neg_group)++;
      ++j;
    }
    const std::size_t neg_below = counts.neg - neg_above - neg_group;
    wins += static_cast<double>(pos_group * neg_below) + 0.5 * static_cast<double>(pos_group * neg_group);
    neg_above += neg_group;
    i = j;
  }
  return wins / static_cast<double>(counts.pos * counts.neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = count_classes(scores, labels);
  if (counts.pos == 0) throw ProtocolError("auprc needs at least one positive");
  const auto order = ranking(scores);
  double precision_sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 1) continue;
    ++tp;
    precision_sum += static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  return precision_sum / static_cast<double>(counts.pos);
}

double min_se_pplus(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = count_classes(scores, labels);
  require_both(counts, "min_se_pplus");
  const auto order = ranking(scores);
  double best = 0.0;
  std::size_t tp = 0, predicted = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += static_cast<std::size_t>(labels[order[j]] == 1);
      ++predicted;
      ++j;
    }
    const double sensitivity = static_cast<double>(tp) / static_cast<double>(counts.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    best = std::max(best, std::min(sensitivity, precision));
    i = j;
  }
  return best;
}

BootstrapResult bootstrap(const Metric& metric, std::span<const double> scores, std::span<const int> labels,
                          std::size_t n_boot, std::uint64_t seed) {
  if (n_boot == 0) throw ProtocolError("bootstrap needs n_boot >= 1");
  const auto counts = count_classes(scores, labels);
  require_both(counts, "bootstrap");
  const std::size_t n = scores.size();
  std::vector<double> values;
  values.reserve(n_boot);
  std::vector<double> s(n);
  std::vector<int> y(n);
  BootstrapResult result;
  for (std::size_t b = 0; b < n_boot; ++b) {
    std::mt19937_64 rng(seed + b);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (true) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        s[i] = scores[k];
        y[i] = labels[k];
        pos += static_cast<std::size_t>(y[i]);
      }
      if (pos > 0 && pos < n) break;
      ++result.redrawn;
    }
    values.push_back(metric(s, y));
  }
  double total = 0.0;
  for (double v : values) total += v;
  result.mean = total / static_cast<double>(n_boot);
  double var = 0.0;
  for (double v : values) var += (v - result.mean) * (v - result.mean);
  result.std = std::sqrt(var / static_cast<double>(n_boot));
  return result;
}

MetricReport metric_report(std::span<const double> scores, std::span<const int> labels, std::size_t n_boot,
                           std::uint64_t seed) {
  MetricReport r;
  r.n_boot = n_boot;
  auto fill = [&](MetricValue& v, const Metric& m) {
    v.point = m(scores, labels);
    const auto b = bootstrap(m, scores, labels, n_boot, seed);
    v.mean = b.mean;
    v.std = b.std;
    r.redrawn += b.redrawn;
  };
  fill(r.auroc, auroc);
  fill(r.auprc, auprc);
  fill(r.min_se_pplus, min_se_pplus);
  return r;
}

}  // namespace hgv::objective
