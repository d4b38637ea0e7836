#pragma once

#include <optional>
#include <vector>

#include "dlf/model_config.hpp"
#include "dlf/nn.hpp"

namespace dlf {

// Stack of pre-norm transformer layers; depth 0 is the identity.
class TransformerEncoder {
 public:
  TransformerEncoder(ParameterStore& store, Rng& rng, const std::string& name,
                     int model_dim, int depth, int heads, int ffn_expansion,
                     double dropout);
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  std::vector<TransformerLayer> layers_;
};

// Per-modality projection to the common model dim, the single shared encoder,
// per-modality specific encoders, per-modality reconstruction decoders, and
// specific re-encoding. Modules exist only for the configured modality subset.
class DisentangleEncoders {
 public:
  DisentangleEncoders(ParameterStore& store, Rng& rng, const ModelConfig& cfg,
                      const DataDims& dims);

  // Temporal convolution d_m -> d, sequence length preserved.
  ValueId project(Forward& fwd, ValueId features, Modality m) const;
  // One parameter set serves all three modalities.
  ValueId encode_shared(Forward& fwd, ValueId projected) const;
  ValueId encode_specific(Forward& fwd, ValueId projected, Modality m) const;
  // Decode [Sh (+) Sp] (feature-axis concat, 2d -> d) with the modality's
  // convolution decoder.
  ValueId reconstruct(Forward& fwd, ValueId shared, ValueId specific, Modality m) const;
  // Same parameters as encode_specific, applied to the reconstruction.
  ValueId reencode_specific(Forward& fwd, ValueId reconstructed, Modality m) const;

 private:
  ModalitySet present_;
  std::array<std::optional<Conv1d>, 3> project_;
  std::optional<TransformerEncoder> shared_;
  std::array<std::optional<TransformerEncoder>, 3> specific_;
  std::array<std::optional<Conv1d>, 3> decoder_;
};

}  // namespace dlf
