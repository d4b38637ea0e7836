#include "dlf/losses.hpp"

namespace dlf {

int sentiment_bucket(double label) {
  if (label < 0.0) return -1;
  if (label > 0.0) return 1;
  return 0;
}

std::vector<TripletIndex> sample_triplets(std::span<const double> labels,
                                          ModalitySet modalities, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7121e7ULL));
  const auto mods = modalities.list();
  const int n = int(labels.size());
  std::vector<int> bucket(size_t(n), 0);
  for (int i = 0; i < n; ++i) bucket[size_t(i)] = sentiment_bucket(labels[size_t(i)]);

  std::vector<TripletIndex> out;
  for (int i = 0; i < n; ++i) {
    for (Modality anchor_m : mods) {
      // positives: same bucket, different modality (same sample allowed)
      std::vector<std::pair<int, Modality>> positives;
      for (int j = 0; j < n; ++j) {
        if (bucket[size_t(j)] != bucket[size_t(i)]) continue;
        for (Modality pm : mods) {
          if (pm != anchor_m) positives.emplace_back(j, pm);
        }
      }
      // negatives: different bucket, same modality
      std::vector<int> negatives;
      for (int k = 0; k < n; ++k) {
        if (bucket[size_t(k)] != bucket[size_t(i)]) negatives.push_back(k);
      }
      if (positives.empty() || negatives.empty()) continue;
      const auto [pj, pm] = positives[size_t(rng.uniform_int(int(positives.size())))];
      const int nk = negatives[size_t(rng.uniform_int(int(negatives.size())))];
      out.push_back({i, anchor_m, pj, pm, nk, anchor_m});
    }
  }
  return out;
}

ValueId mean_mse(Forward& fwd, std::span<const std::pair<ValueId, ValueId>> pairs) {
  Tape& t = fwd.tape;
  if (pairs.empty()) return t.constant(Tensor::scalar(0.0));
  ValueId acc = t.mse(pairs[0].first, pairs[0].second);
  for (size_t i = 1; i < pairs.size(); ++i) {
    acc = t.add(acc, t.mse(pairs[i].first, pairs[i].second));
  }
  return t.scale(acc, 1.0 / double(pairs.size()));
}

ValueId triplet_loss(Forward& fwd,
                     const std::vector<std::array<ValueId, 3>>& pooled_shared,
                     const std::vector<TripletIndex>& triplets, double margin,
                     TripletMetric metric) {
  Tape& t = fwd.tape;
  if (triplets.empty()) return t.constant(Tensor::scalar(0.0));
  ValueId acc{};
  for (const TripletIndex& tr : triplets) {
    ValueId anchor = pooled_shared[size_t(tr.anchor_sample)][size_t(index_of(tr.anchor_modality))];
    ValueId pos = pooled_shared[size_t(tr.positive_sample)][size_t(index_of(tr.positive_modality))];
    ValueId neg = pooled_shared[size_t(tr.negative_sample)][size_t(index_of(tr.negative_modality))];
    ValueId c_sp = t.cosine_similarity(anchor, pos);
    ValueId c_sn = t.cosine_similarity(anchor, neg);
    // Distance d = 1 - cos, so d(S,P) - d(S,N) reduces to cos(S,N) - cos(S,P).
    ValueId gap = metric == TripletMetric::Distance ? t.sub(c_sn, c_sp)
                                                    : t.sub(c_sp, c_sn);
    ValueId hinge = t.relu(t.add_scalar(gap, margin));
    acc = acc.valid() ? t.add(acc, hinge) : hinge;
  }
  return t.scale(acc, 1.0 / double(triplets.size()));
}

ValueId ortho_loss(Forward& fwd,
                   const std::vector<std::pair<ValueId, ValueId>>& sh_sp,
                   OrthoGranularity granularity) {
  Tape& t = fwd.tape;
  if (sh_sp.empty()) return t.constant(Tensor::scalar(0.0));
  ValueId acc{};
  for (const auto& [sh, sp] : sh_sp) {
    ValueId pair_term{};
    if (granularity == OrthoGranularity::Pooled) {
      ValueId c = t.cosine_similarity(t.mean_rows(sh), t.mean_rows(sp));
      pair_term = t.mul(c, c);
    } else {
      const int rows = t.value(sh).rows();
      ValueId row_acc{};
      for (int r = 0; r < rows; ++r) {
        ValueId c = t.cosine_similarity(t.slice_rows(sh, r, r + 1),
                                        t.slice_rows(sp, r, r + 1));
        ValueId c2 = t.mul(c, c);
        row_acc = row_acc.valid() ? t.add(row_acc, c2) : c2;
      }
      pair_term = t.scale(row_acc, 1.0 / double(rows));
    }
    acc = acc.valid() ? t.add(acc, pair_term) : pair_term;
  }
  return t.scale(acc, 1.0 / double(sh_sp.size()));
}

ValueId decouple_loss(Forward& fwd, ValueId recon, ValueId specific, ValueId triplet,
                      ValueId ortho, const LossWeights& weights) {
  Tape& t = fwd.tape;
  ValueId acc = t.add(t.scale(recon, weights.lambda_r), t.scale(specific, weights.lambda_s));
  acc = t.add(acc, t.scale(triplet, weights.lambda_m));
  return t.add(acc, t.scale(ortho, weights.lambda_o));
}

}  // namespace dlf
