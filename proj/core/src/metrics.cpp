#include "dlf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dlf {

int class7(double value) {
  const long r = std::lround(value);
  return int(std::clamp(r, -3L, 3L)) + 3;
}

int class5(double value) {
  const long r = std::lround(value);
  return int(std::clamp(r, -2L, 2L)) + 2;
}

MetricReport compute_metrics(std::span<const double> predictions,
                             std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw Error("compute_metrics: prediction/label count mismatch");
  }
  if (predictions.empty()) throw Error("compute_metrics: empty input");
  const size_t n = predictions.size();

  MetricReport rep;
  size_t hit7 = 0, hit5 = 0;
  double abs_err = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const int cp = class7(predictions[i]);
    const int cl = class7(labels[i]);
    if (cp == cl) ++hit7;
    if (class5(predictions[i]) == class5(labels[i])) ++hit5;
    rep.confusion7[size_t(cl)][size_t(cp)] += 1;
    abs_err += std::abs(predictions[i] - labels[i]);
  }
  rep.acc7 = double(hit7) / double(n);
  rep.acc5 = double(hit5) / double(n);
  rep.mae = abs_err / double(n);

  for (int c = 0; c < 7; ++c) {
    int row_sum = 0;
    for (int p = 0; p < 7; ++p) row_sum += rep.confusion7[size_t(c)][size_t(p)];
    rep.class_present[size_t(c)] = row_sum > 0;
    rep.class_accuracy[size_t(c)] =
        row_sum > 0 ? double(rep.confusion7[size_t(c)][size_t(c)]) / row_sum : 0.0;
  }

  // Binary accuracy / F1: zero labels excluded; prediction > 0 is positive.
  int tp = 0, tn = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] == 0.0) {
      ++rep.acc2_excluded;
      continue;
    }
    const bool label_pos = labels[i] > 0.0;
    const bool pred_pos = predictions[i] > 0.0;
    if (label_pos && pred_pos) ++tp;
    else if (!label_pos && !pred_pos) ++tn;
    else if (!label_pos && pred_pos) ++fp;
    else ++fn;
  }
  const int considered = tp + tn + fp + fn;
  if (considered == 0) {
    rep.acc2_defined = false;
    rep.acc2 = 0.0;
    rep.f1 = 0.0;
  } else {
    rep.acc2 = double(tp + tn) / double(considered);
    const double prec = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    rep.f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }

  // Pearson correlation on raw values.
  double mean_p = 0.0, mean_l = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mean_p += predictions[i];
    mean_l += labels[i];
  }
  mean_p /= double(n);
  mean_l /= double(n);
  double cov = 0.0, var_p = 0.0, var_l = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dp = predictions[i] - mean_p;
    const double dl = labels[i] - mean_l;
    cov += dp * dl;
    var_p += dp * dp;
    var_l += dl * dl;
  }
  if (var_p <= 0.0 || var_l <= 0.0) {
    rep.corr_defined = false;
    rep.corr = 0.0;
  } else {
    rep.corr = cov / std::sqrt(var_p * var_l);
  }
  return rep;
}

}  // namespace dlf
