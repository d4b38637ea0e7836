#pragma once

#include <vector>

#include "dlf/encoders.hpp"
#include "dlf/gradcheck.hpp"
#include "dlf/lfa.hpp"
#include "dlf/losses.hpp"

namespace dlf {

// All loss terms of one batch, with the effective weights that combined them.
// decouple and msa satisfy their definitional weighted sums exactly.
struct LossReport {
  double recon = 0.0;     // L_r
  double specific = 0.0;  // L_s
  double triplet = 0.0;   // L_m
  double ortho = 0.0;     // L_o
  double decouple = 0.0;  // L_d
  double final_mae = 0.0;   // L_f
  double shared_mae = 0.0;  // L_Sh
  std::array<double, 3> specific_mae = {0.0, 0.0, 0.0};  // L_Sp per modality
  double msa = 0.0;    // L_MSA
  double total = 0.0;  // L_DLF
  int triplet_count = 0;

  double lambda_r = 0.0, lambda_s = 0.0, lambda_m = 0.0, lambda_o = 0.0;
  double beta_f = 0.0, beta_sh = 0.0;
  std::array<double, 3> beta_sp = {0.0, 0.0, 0.0};
};

struct PredictionSet {
  double final_pred = 0.0;
  double shared_pred = 0.0;
  std::array<double, 3> specific_pred = {0.0, 0.0, 0.0};
};

// The full model: disentangling encoders, attractor, shared pathway, fusion
// and hierarchical heads. Construction is deterministic in (config, seed).
class DlfModel {
 public:
  DlfModel(const ModelConfig& cfg, const DataDims& dims, uint64_t init_seed);

  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const DataDims& dims() const { return dims_; }
  // Fusion output width: one d-slot per present modality plus one for HSh.
  int fused_dim() const { return (cfg_.modalities.count() + 1) * cfg_.model_dim; }

  struct BatchResult {
    ValueId loss;  // L_DLF
    LossReport report;
    std::vector<PredictionSet> predictions;
  };
  // Builds the complete training objective for a batch on fwd's tape.
  BatchResult build_batch_loss(Forward& fwd, const Batch& batch,
                               uint64_t triplet_seed) const;

  struct SampleOutput {
    PredictionSet predictions;
    Tensor fused;  // (1, fused_dim())
  };
  // Deterministic eval-mode forward of a single sample.
  SampleOutput predict_sample(const Sample& sample) const;

  // Per-sample graph pieces, exposed for tests and the loss assembly.
  struct SampleNodes {
    std::array<ValueId, 3> projected{};
    std::array<ValueId, 3> shared{};    // pathway input (Sp when FDM is off)
    std::array<ValueId, 3> specific{};
    std::array<ValueId, 3> reconstructed{};
    std::array<ValueId, 3> respecific{};
    LfaOutput lfa{};
    ValueId hsh{};
    ValueId fused{};
    ValueId pred_final{};
    ValueId pred_shared{};
    std::array<ValueId, 3> pred_specific{};
  };
  SampleNodes run_sample(Forward& fwd, const std::array<Tensor, 3>& features,
                         bool with_reconstruction) const;

  const DisentangleEncoders& encoders() const { return encoders_; }
  const LanguageFocusedAttractor& attractor() const { return lfa_; }

 private:
  ModelConfig cfg_;
  DataDims dims_;
  ParameterStore store_;
  Rng init_rng_;  // consumed during member construction, in declaration order
  DisentangleEncoders encoders_;
  LanguageFocusedAttractor lfa_;
  TransformerLayer shared_path_;
  Linear shared_fc1_, shared_fc2_;
  Linear head_final_fc1_, head_final_fc2_;
  Dropout head_drop_;
  Linear head_shared_;
  std::array<std::optional<Linear>, 3> head_specific_;
};

// Finite-difference check of the complete training objective. The loss is
// evaluated deterministically (eval mode, fixed triplet seed).
GradCheckReport grad_check_model(DlfModel& model, const Batch& batch,
                                 uint64_t triplet_seed,
                                 const GradCheckOptions& opts = {});

// The reference configuration for gradient checking: d=8, depth-1 stacks,
// small sequences. Shapes live in gradcheck_dims().
ModelConfig gradcheck_config();
DataDims gradcheck_dims();
// Two-sample batch with labels +2 and -2 so opposite sentiment buckets exist
// and the triplet path is exercised (T = 6).
Batch gradcheck_batch(const DataDims& dims, uint64_t seed);

}  // namespace dlf
