#include "dlf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dlf {

namespace {

double eval_loss(const LossBuilder& loss_fn) {
  Forward fwd(/*training=*/false);
  ValueId loss = loss_fn(fwd);
  return fwd.tape.value(loss).item();
}

// Deterministic index sample: all indices if they fit, else an even stride.
std::vector<int64_t> pick_indices(int64_t numel, int max_per_param) {
  std::vector<int64_t> out;
  if (max_per_param <= 0 || numel <= max_per_param) {
    out.resize(size_t(numel));
    for (int64_t i = 0; i < numel; ++i) out[size_t(i)] = i;
    return out;
  }
  out.reserve(size_t(max_per_param));
  for (int i = 0; i < max_per_param; ++i) {
    out.push_back(i * numel / max_per_param);
  }
  return out;
}

}  // namespace

GradCheckReport grad_check(ParameterStore& store, const LossBuilder& loss_fn,
                           const GradCheckOptions& opts) {
  if (precision() != Precision::Bits64) {
    throw NumericError("grad_check requires 64-bit precision mode");
  }
  if (opts.epsilon < 1e-7 || opts.epsilon > 1e-3) {
    throw NumericError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }

  // Determinism probe: a stochastic forward invalidates finite differences.
  const double l0 = eval_loss(loss_fn);
  const double l1 = eval_loss(loss_fn);
  if (std::memcmp(&l0, &l1, sizeof(double)) != 0) {
    throw NumericError(
        "grad_check: two forward evaluations differ; disable stochastic layers "
        "(dropout) before checking gradients");
  }

  // Analytic gradients at theta.
  {
    Forward fwd(/*training=*/false);
    ValueId loss = loss_fn(fwd);
    fwd.backward_into_params(loss, store);
  }

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  for (const auto& p : store.all()) {
    GradCheckEntry entry;
    entry.name = p->name;
    const auto indices = pick_indices(p->value.size(), opts.max_scalars_per_param);
    for (int64_t idx : indices) {
      const double saved = p->value[idx];
      p->value[idx] = saved + opts.epsilon;
      const double lp = eval_loss(loss_fn);
      p->value[idx] = saved - opts.epsilon;
      const double lm = eval_loss(loss_fn);
      p->value[idx] = saved;
      const double fd = (lp - lm) / (2.0 * opts.epsilon);
      const double an = p->grad[idx];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      const double rel = std::abs(fd - an) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked;
    }
    entry.pass = entry.max_rel_err < opts.tolerance;
    if (entry.max_rel_err > report.worst) {
      report.worst = entry.max_rel_err;
      report.worst_name = entry.name;
    }
    report.pass = report.pass && entry.pass;
    report.per_parameter.push_back(std::move(entry));
  }
  return report;
}

}  // namespace dlf
