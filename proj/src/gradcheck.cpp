#include "hgv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hgv/errors.hpp"

namespace hgv::tensor {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {
struct Eval {
  double loss;
  std::uint64_t signature;
};

Eval evaluate(const ScalarFn& f) {
  Tape tape;
  Var loss = f(tape);
  return {loss.value().item(), tape.kink_signature()};
}
}  // namespace

GradCheckReport grad_check(const ScalarFn& f, std::span<Parameter* const> params, const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  Eval base;
  {
    Tape tape;
    Var loss = f(tape);
    base = {loss.value().item(), tape.kink_signature()};
    tape.backward(loss);
  }
  const Eval rerun = evaluate(f);
  if (rerun.loss != base.loss || rerun.signature != base.signature)
    throw ProtocolError("grad_check: function is not deterministic (" + std::to_string(base.loss) + " vs " +
                        std::to_string(rerun.loss) + ")");

  GradCheckReport report;
  const double h = options.step;
  for (auto* p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      if (options.skip && options.skip(*p, i)) {
        ++entry.skipped;
        continue;
      }
      const double original = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = original + offset;
        const Eval e = evaluate(f);
        p->value[i] = original;
        return e;
      };
      const Eval plus = at(h), minus = at(-h);
      bool crossed = plus.signature != base.signature || minus.signature != base.signature;
      double numeric = (plus.loss - minus.loss) / (2.0 * h);
      if (options.stencil == Stencil::central4) {
        const Eval plus2 = at(2.0 * h), minus2 = at(-2.0 * h);
        crossed = crossed || plus2.signature != base.signature || minus2.signature != base.signature;
        numeric = (8.0 * (plus.loss - minus.loss) - (plus2.loss - minus2.loss)) / (12.0 * h);
      }
      if (options.skip_kinks && crossed) {
        ++entry.skipped;
        continue;
      }
      const double err = relative_error(analytic[i], numeric);
      ++entry.checked;
      if (err > entry.max_rel_error || entry.checked == 1) {
        entry.max_rel_error = std::max(entry.max_rel_error, err);
        if (err >= entry.max_rel_error) {
          entry.worst_index = i;
          entry.analytic = analytic[i];
          entry.numeric = numeric;
        }
      }
    }
    report.checked += entry.checked;
    report.skipped += entry.skipped;
    if (entry.max_rel_error > report.max_rel_error || report.worst_param.empty()) {
      if (entry.max_rel_error >= report.max_rel_error) {
        report.max_rel_error = entry.max_rel_error;
        report.worst_param = entry.name;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hgv::tensor
