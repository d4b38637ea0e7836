#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "dlf/metrics.hpp"
#include "dlf/model.hpp"

namespace dlf {

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
};

// Adam with bias correction; moment slots follow parameter creation order.
class Adam {
 public:
  explicit Adam(OptimizerConfig cfg) : cfg_(cfg) {}
  void step(ParameterStore& store);

 private:
  OptimizerConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainOptions {
  int batch_size = 16;
  int max_epochs = 500;
  int patience = 10;
  uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossReport train_losses;
  MetricReport valid;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_valid_mae = 0.0;
  MetricReport test_metrics;
  // L_DLF over the train split recomputed from the restored snapshot
  // (eval mode, fixed triplet seed derived from the run seed).
  double final_train_loss = 0.0;
};

// Minimizes L_DLF with early stopping on validation MAE; the best epoch's
// parameters are restored before the final test evaluation. Deterministic in
// (dataset, options, model init) for one build. Non-finite losses raise
// DivergenceError naming the epoch and batch.
TrainResult train(DlfModel& model, const Dataset& dataset, const TrainOptions& opts,
                  const OptimizerConfig& optimizer, std::ostream* progress = nullptr);

// Eval-mode metrics over a split.
MetricReport evaluate(const DlfModel& model, std::span<const Sample> samples);

// Eval-mode L_DLF over a split (dropout off, triplet sampling from the seed).
double compute_split_loss(const DlfModel& model, std::span<const Sample> samples,
                          int batch_size, uint64_t triplet_seed);

// CSV of fused representations: header id,label,class7,f_0..f_{D-1}.
void export_representations(const DlfModel& model, std::span<const Sample> samples,
                            const std::filesystem::path& path);

// One JSON object per epoch (losses and validation metrics).
void write_history_jsonl(const TrainResult& result, const std::filesystem::path& path);

// Deterministic JSON renderings (stable key order, no timestamps).
std::string metrics_json(const MetricReport& report);
std::string confusion_csv(const MetricReport& report);

}  // namespace dlf
