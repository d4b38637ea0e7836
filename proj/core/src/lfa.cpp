#include "dlf/lfa.hpp"

namespace dlf {

LanguageFocusedAttractor::LanguageFocusedAttractor(ParameterStore& store, Rng& rng,
                                                   const ModelConfig& cfg)
    : present_(cfg.modalities),
      anchor_(cfg.modalities.anchor()),
      pos_embed_sources_(cfg.pos_embed_sources),
      input_drop_(cfg.dropout) {
  if (cfg.lfa_depth < 1) throw ConfigError("lfa_depth must be >= 1");
  for (Modality m : present_.list()) {
    const auto i = size_t(index_of(m));
    const std::string prefix = std::string("lfa.branch_") + modality_letter(m);
    Branch branch;
    for (int l = 0; l < cfg.lfa_depth; ++l) {
      branch.layers.emplace_back(store, rng, prefix + ".layer" + std::to_string(l),
                                 cfg.model_dim, cfg.heads, cfg.ffn_expansion,
                                 cfg.dropout);
    }
    branch.hsp.emplace(store, rng, prefix + ".hsp", cfg.model_dim, cfg.model_dim);
    branches_[i].emplace(std::move(branch));
  }
}

ValueId LanguageFocusedAttractor::with_positions(Forward& fwd, ValueId x) const {
  const Tensor& v = fwd.tape.value(x);
  return fwd.tape.add(x, fwd.tape.constant(sinusoidal_positions(v.rows(), v.cols())));
}

LfaOutput LanguageFocusedAttractor::forward(Forward& fwd,
                                            const std::array<ValueId, 3>& sp,
                                            bool separate_queries) const {
  Tape& t = fwd.tape;
  LfaOutput out;
  const auto mods = present_.list();
  for (Modality m : mods) {
    const auto i = size_t(index_of(m));
    const Branch& branch = *branches_[i];

    const Modality query_m = separate_queries ? m : anchor_;
    ValueId stream = input_drop_.forward(
        fwd, with_positions(fwd, sp[size_t(index_of(query_m))]));

    ValueId source;
    if (!separate_queries) {
      source = sp[i];
      if (pos_embed_sources_) source = with_positions(fwd, source);
    } else {
      // MulT-style: query m against the other present modalities.
      std::vector<ValueId> others;
      for (Modality o : mods) {
        if (o == m) continue;
        ValueId s = sp[size_t(index_of(o))];
        others.push_back(pos_embed_sources_ ? with_positions(fwd, s) : s);
      }
      if (others.empty()) {
        // Single-modality fallback: self-attention.
        source = pos_embed_sources_ ? with_positions(fwd, sp[i]) : sp[i];
      } else if (others.size() == 1) {
        source = others[0];
      } else {
        source = t.concat_rows(others);
      }
    }

    for (const MultimodalLayer& layer : branch.layers) {
      stream = layer.forward(fwd, stream, source);
    }
    out.stream[i] = stream;
    out.hsp[i] = branch.hsp->forward(fwd, t.mean_rows(stream));
  }
  return out;
}

}  // namespace dlf
