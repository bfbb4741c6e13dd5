#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <span>
#include <vector>

// Brute-force reference metrics. The final accumulation and division follow
// the same arithmetic as the library so results can be compared exactly.
namespace oracle {

inline double auroc_pairs(std::span<const double> s, std::span<const int> y) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
  return wins / static_cast<double>(pos * neg);
}

inline double auprc_cuts(std::span<const double> s, std::span<const int> y) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s[a] != s[b] ? s[a] > s[b] : a < b;
  });
  std::size_t pos = 0;
  for (int v : y) pos += static_cast<std::size_t>(v);
  double area = 0.0;
  std::size_t prev_tp = 0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) tp += static_cast<std::size_t>(y[order[i]]);
    const double precision = static_cast<double>(tp) / static_cast<double>(k);
    area += precision * static_cast<double>(tp - prev_tp);
    prev_tp = tp;
  }
  return area / static_cast<double>(pos);
}

inline double min_se_pplus_sweep(std::span<const double> s, std::span<const int> y) {
  std::size_t pos = 0;
  for (int v : y) pos += static_cast<std::size_t>(v);
  double best = 0.0;
  for (double tau : std::set<double>(s.begin(), s.end())) {
    std::size_t tp = 0, predicted = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= tau) {
        ++predicted;
        tp += static_cast<std::size_t>(y[i]);
      }
    const double se = static_cast<double>(tp) / static_cast<double>(pos);
    const double pp = static_cast<double>(tp) / static_cast<double>(predicted);
    best = std::max(best, std::min(se, pp));
  }
  return best;
}

}  // namespace oracle
