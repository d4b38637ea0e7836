#pragma once

#include <array>

#include "dlf/common.hpp"
#include "dlf/data.hpp"

namespace dlf {

// Cosine reading of the triplet distance d(.,.): Distance uses 1 - cos,
// Similarity uses cos literally. Distance is the default.
enum class TripletMetric { Distance, Similarity };

// Orthogonality penalty granularity: on mean-pooled vectors or per time step.
enum class OrthoGranularity { Pooled, PerStep };

struct LossWeights {
  double lambda_r = 1.0;
  double lambda_s = 1.0;
  double lambda_m = 0.1;
  double lambda_o = 0.3;
  double margin = 0.2;
};

struct BetaWeights {
  double f = 1.0;
  double sh = 0.3;
  double sp = 0.3;
  // Optional per-modality overrides; negative means "inherit sp".
  std::array<double, 3> sp_override = {-1.0, -1.0, -1.0};

  double sp_for(Modality m) const {
    const double o = sp_override[size_t(index_of(m))];
    return o >= 0.0 ? o : sp;
  }
};

// Everything the model needs beyond the dataset itself. Ablation switches
// mirror the harness variants: modality subsets, per-regularizer disables,
// and component disables.
struct ModelConfig {
  // dims / depths
  int model_dim = 16;
  int heads = 4;
  int encoder_depth = 1;  // 0 is the degenerate identity encoder
  int lfa_depth = 2;
  int ffn_expansion = 2;
  double dropout = 0.1;
  int proj_kernel = 1;
  int decoder_kernel = 1;
  bool pos_embed_sources = true;

  LossWeights weights;
  TripletMetric triplet_metric = TripletMetric::Distance;
  OrthoGranularity ortho_granularity = OrthoGranularity::Pooled;
  BetaWeights beta;

  // ablation switches
  ModalitySet modalities = ModalitySet::all();
  bool use_recon_loss = true;     // lambda_r forced to 0 when false
  bool use_specific_loss = true;  // lambda_s
  bool use_triplet_loss = true;   // lambda_m
  bool use_ortho_loss = true;     // lambda_o
  bool use_fdm = true;            // feature disentanglement module
  bool use_lfa = true;            // language-query attractor vs separate queries
  bool use_hp = true;             // hierarchical predictions (aux heads)

  double effective_lambda_r() const { return use_recon_loss ? weights.lambda_r : 0.0; }
  double effective_lambda_s() const { return use_specific_loss ? weights.lambda_s : 0.0; }
  double effective_lambda_m() const { return use_triplet_loss ? weights.lambda_m : 0.0; }
  double effective_lambda_o() const { return use_ortho_loss ? weights.lambda_o : 0.0; }
  double effective_beta_sh() const { return use_hp ? beta.sh : 0.0; }
  double effective_beta_sp(Modality m) const { return use_hp ? beta.sp_for(m) : 0.0; }

  void validate() const;
};

}  // namespace dlf
