#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "dlf/model_config.hpp"
#include "dlf/params.hpp"

namespace dlf {

// One triplet in the modality-shared space: anchor and negative share a
// modality but differ in sentiment bucket; anchor and positive share a bucket
// but differ in modality (the positive may come from the anchor's own sample).
struct TripletIndex {
  int anchor_sample;
  Modality anchor_modality;
  int positive_sample;
  Modality positive_modality;
  int negative_sample;
  Modality negative_modality;
};

// Sentiment bucket by sign: -1, 0, +1 (neutral is exactly zero).
int sentiment_bucket(double label);

// Deterministic triplet sampling over a batch. For every (sample, modality)
// anchor, one positive and one negative are drawn uniformly from the valid
// candidates; anchors without candidates are skipped. T = result size may be
// 0 in degenerate batches.
std::vector<TripletIndex> sample_triplets(std::span<const double> labels,
                                          ModalitySet modalities, uint64_t seed);

// Mean over pairs of elementwise mean squared error (reconstruction and
// specific losses share this reduction).
ValueId mean_mse(Forward& fwd,
                 std::span<const std::pair<ValueId, ValueId>> pairs);

// (1/T) sum max(0, d(S,P) - d(S,N) + margin) over pooled shared vectors,
// where d is cosine distance (or raw cosine similarity under the literal
// metric reading). Returns a constant 0 when T = 0.
ValueId triplet_loss(Forward& fwd,
                     const std::vector<std::array<ValueId, 3>>& pooled_shared,
                     const std::vector<TripletIndex>& triplets, double margin,
                     TripletMetric metric);

// Squared cosine between shared and specific features, averaged over the
// given (Sh, Sp) matrix pairs; pooled over the sequence axis or per step.
ValueId ortho_loss(Forward& fwd,
                   const std::vector<std::pair<ValueId, ValueId>>& sh_sp,
                   OrthoGranularity granularity);

// lambda_r*L_r + lambda_s*L_s + lambda_m*L_m + lambda_o*L_o.
ValueId decouple_loss(Forward& fwd, ValueId recon, ValueId specific, ValueId triplet,
                      ValueId ortho, const LossWeights& weights);

}  // namespace dlf
