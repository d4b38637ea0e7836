#pragma once

#include <optional>
#include <vector>

#include "dlf/model_config.hpp"
#include "dlf/nn.hpp"

namespace dlf {

// Per-branch enhanced streams and their high-level projections. Slots for
// absent modalities hold invalid ids.
struct LfaOutput {
  std::array<ValueId, 3> stream;
  std::array<ValueId, 3> hsp;  // (1, d) each
};

// Cascaded cross-attention branches over the modality-specific features.
//
// Attractor wiring (the default): every branch's query stream starts from the
// anchor modality (language when present) and its key/value source is the
// branch's own Sp^m at every layer, so information flows X -> anchor only.
//
// Separate-queries wiring (the ablation): branch m queries with its own Sp^m
// over the concatenation of the other modalities' features, so streams keep
// per-modality lengths.
class LanguageFocusedAttractor {
 public:
  LanguageFocusedAttractor(ParameterStore& store, Rng& rng, const ModelConfig& cfg);

  LfaOutput forward(Forward& fwd, const std::array<ValueId, 3>& sp,
                    bool separate_queries) const;

 private:
  struct Branch {
    std::vector<MultimodalLayer> layers;
    std::optional<Linear> hsp;
  };

  ValueId with_positions(Forward& fwd, ValueId x) const;

  ModalitySet present_;
  Modality anchor_;
  bool pos_embed_sources_;
  Dropout input_drop_;
  std::array<std::optional<Branch>, 3> branches_;
};

}  // namespace dlf
