#pragma once

#include <array>
#include <span>

#include "dlf/common.hpp"

namespace dlf {

// Seven sentiment classes, highly negative .. highly positive.
inline constexpr std::array<const char*, 7> kClass7Names = {"HN", "N",  "WN", "NT",
                                                            "WP", "P",  "HP"};

// Round (half away from zero) and clamp to [-3, 3], mapped to 0..6.
int class7(double value);
// Round and clamp to [-2, 2], mapped to 0..4.
int class5(double value);

struct MetricReport {
  double acc7 = 0.0;
  double acc5 = 0.0;
  double acc2 = 0.0;  // negative vs positive, zero labels excluded
  double f1 = 0.0;    // binary F1, positive sentiment is the positive class
  double corr = 0.0;  // Pearson on raw predictions vs raw labels
  double mae = 0.0;

  std::array<std::array<int, 7>, 7> confusion7 = {};  // [true][predicted]
  std::array<double, 7> class_accuracy = {};
  std::array<bool, 7> class_present = {};

  bool corr_defined = true;    // false when labels (or predictions) are constant
  bool acc2_defined = true;    // false when every label is zero
  int acc2_excluded = 0;       // count of zero-label samples left out
};

// All six metrics plus the confusion matrix from raw (prediction, label)
// pairs. Predictions are rounded/clamped only for the class metrics; MAE and
// Corr use raw values.
MetricReport compute_metrics(std::span<const double> predictions,
                             std::span<const double> labels);

}  // namespace dlf
