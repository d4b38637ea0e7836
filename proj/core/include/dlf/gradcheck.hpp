#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dlf/params.hpp"

namespace dlf {

// Builds the scalar loss on the given Forward. Must be a pure, deterministic
// function of the parameter store (no dropout, no RNG consumption).
using LossBuilder = std::function<ValueId(Forward&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;         // central-difference step, in [1e-7, 1e-3]
  double tolerance = 1e-4;       // max relative error allowed
  int max_scalars_per_param = 16;  // <= 0 checks every scalar
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_parameter;
  double worst = 0.0;
  std::string worst_name;
  double tolerance = 0.0;
  bool pass = true;
};

// Central-difference check of d(loss)/d(theta) for every parameter in the
// store against the tape's reverse-mode gradients.
//
// Relative error per scalar: |fd - analytic| / max(|fd|, |analytic|, 1e-3);
// the floor keeps noise-dominated near-zero gradients from blowing up the
// ratio while still catching sign and scale errors on meaningful ones.
//
// Preconditions (checked): Bits64 precision; epsilon within [1e-7, 1e-3];
// two evaluations of the loss agree bitwise (otherwise a NumericError asks
// for stochastic layers to be disabled).
GradCheckReport grad_check(ParameterStore& store, const LossBuilder& loss_fn,
                           const GradCheckOptions& opts = {});

}  // namespace dlf
