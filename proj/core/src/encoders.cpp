#include "dlf/encoders.hpp"

namespace dlf {

TransformerEncoder::TransformerEncoder(ParameterStore& store, Rng& rng,
                                       const std::string& name, int model_dim,
                                       int depth, int heads, int ffn_expansion,
                                       double dropout) {
  layers_.reserve(size_t(depth));
  for (int i = 0; i < depth; ++i) {
    layers_.emplace_back(store, rng, name + ".layer" + std::to_string(i), model_dim,
                         heads, ffn_expansion, dropout);
  }
}

ValueId TransformerEncoder::forward(Forward& fwd, ValueId x) const {
  for (const auto& layer : layers_) x = layer.forward(fwd, x);
  return x;
}

DisentangleEncoders::DisentangleEncoders(ParameterStore& store, Rng& rng,
                                         const ModelConfig& cfg, const DataDims& dims)
    : present_(cfg.modalities) {
  const int d = cfg.model_dim;
  for (Modality m : present_.list()) {
    const auto i = size_t(index_of(m));
    const std::string letter(1, modality_letter(m));
    project_[i].emplace(store, rng, "proj." + letter, dims.feat(m), d, cfg.proj_kernel);
  }
  shared_.emplace(store, rng, "enc_shared", d, cfg.encoder_depth, cfg.heads,
                  cfg.ffn_expansion, cfg.dropout);
  for (Modality m : present_.list()) {
    const auto i = size_t(index_of(m));
    const std::string letter(1, modality_letter(m));
    specific_[i].emplace(store, rng, "enc_specific." + letter, d, cfg.encoder_depth,
                         cfg.heads, cfg.ffn_expansion, cfg.dropout);
    decoder_[i].emplace(store, rng, "dec." + letter, 2 * d, d, cfg.decoder_kernel);
  }
}

ValueId DisentangleEncoders::project(Forward& fwd, ValueId features, Modality m) const {
  const auto& conv = project_[size_t(index_of(m))];
  if (!conv) throw Error(std::string("modality not configured: ") + modality_name(m));
  return conv->forward(fwd, features);
}

ValueId DisentangleEncoders::encode_shared(Forward& fwd, ValueId projected) const {
  return shared_->forward(fwd, projected);
}

ValueId DisentangleEncoders::encode_specific(Forward& fwd, ValueId projected,
                                             Modality m) const {
  const auto& enc = specific_[size_t(index_of(m))];
  if (!enc) throw Error(std::string("modality not configured: ") + modality_name(m));
  return enc->forward(fwd, projected);
}

ValueId DisentangleEncoders::reconstruct(Forward& fwd, ValueId shared, ValueId specific,
                                         Modality m) const {
  const auto& dec = decoder_[size_t(index_of(m))];
  if (!dec) throw Error(std::string("modality not configured: ") + modality_name(m));
  const std::array<ValueId, 2> parts = {shared, specific};
  return dec->forward(fwd, fwd.tape.concat_cols(parts));
}

ValueId DisentangleEncoders::reencode_specific(Forward& fwd, ValueId reconstructed,
                                               Modality m) const {
  return encode_specific(fwd, reconstructed, m);
}

}  // namespace dlf
