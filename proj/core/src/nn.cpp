#include "dlf/nn.hpp"

#include <cmath>

namespace dlf {

Tensor sinusoidal_positions(int len, int dim) {
  Tensor out({len, dim});
  for (int pos = 0; pos < len; ++pos) {
    for (int j = 0; j < dim; ++j) {
      const double angle = pos / std::pow(10000.0, double(2 * (j / 2)) / dim);
      out.at(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return out;
}

Linear::Linear(ParameterStore& store, Rng& rng, const std::string& name, int in, int out)
    : in_(in), out_(out) {
  w_ = &store.create(name + ".weight", {in, out});
  b_ = &store.create(name + ".bias", {1, out});
  init_xavier(w_->value, rng, in, out);
}

ValueId Linear::forward(Forward& fwd, ValueId x) const {
  // Bias add via conv machinery would be overkill; broadcast by hand.
  ValueId xw = fwd.tape.matmul(x, fwd.use(*w_));
  const int n = fwd.tape.value(xw).rows();
  ValueId b = fwd.use(*b_);
  if (n == 1) return fwd.tape.add(xw, b);
  std::vector<ValueId> rows(size_t(n), b);
  ValueId bb = fwd.tape.concat_rows(rows);
  return fwd.tape.add(xw, bb);
}

Conv1d::Conv1d(ParameterStore& store, Rng& rng, const std::string& name, int in,
               int out, int kernel)
    : kernel_(kernel) {
  w_ = &store.create(name + ".weight", {kernel * in, out});
  b_ = &store.create(name + ".bias", {1, out});
  init_xavier(w_->value, rng, kernel * in, out);
}

ValueId Conv1d::forward(Forward& fwd, ValueId x) const {
  return fwd.tape.conv1d_same(x, fwd.use(*w_), fwd.use(*b_), kernel_);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int dim) {
  gain_ = &store.create(name + ".gain", {1, dim});
  bias_ = &store.create(name + ".bias", {1, dim});
  gain_->value.fill(1.0);
}

ValueId LayerNorm::forward(Forward& fwd, ValueId x) const {
  return fwd.tape.layer_norm(x, fwd.use(*gain_), fwd.use(*bias_));
}

ValueId Dropout::forward(Forward& fwd, ValueId x) const {
  if (!fwd.training || rate_ <= 0.0) return x;
  if (!fwd.rng) throw Error("dropout in training mode requires an RNG");
  const Tensor& v = fwd.tape.value(x);
  Tensor mask(v.shape());
  const double keep_scale = 1.0 / (1.0 - rate_);
  for (int64_t i = 0; i < mask.size(); ++i) {
    mask[i] = (fwd.rng->uniform() >= rate_) ? keep_scale : 0.0;
  }
  return fwd.tape.dropout_mask(x, std::move(mask));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, Rng& rng,
                                       const std::string& name, int model_dim,
                                       int heads)
    : wq_(store, rng, name + ".wq", model_dim, model_dim),
      wk_(store, rng, name + ".wk", model_dim, model_dim),
      wv_(store, rng, name + ".wv", model_dim, model_dim),
      wo_(store, rng, name + ".wo", model_dim, model_dim),
      heads_(heads),
      model_dim_(model_dim) {
  if (model_dim % heads != 0) {
    throw ConfigError("attention: model_dim " + std::to_string(model_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
}

ValueId MultiHeadAttention::forward(Forward& fwd, ValueId query, ValueId source) const {
  Tape& t = fwd.tape;
  ValueId q = wq_.forward(fwd, query);
  ValueId k = wk_.forward(fwd, source);
  ValueId v = wv_.forward(fwd, source);
  const int dh = model_dim_ / heads_;
  std::vector<ValueId> head_outs;
  head_outs.reserve(size_t(heads_));
  for (int h = 0; h < heads_; ++h) {
    const int lo = h * dh, hi = (h + 1) * dh;
    ValueId qh = t.slice_cols(q, lo, hi);
    ValueId kh = t.slice_cols(k, lo, hi);
    ValueId vh = t.slice_cols(v, lo, hi);
    ValueId scores = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(double(dh)));
    ValueId weights = t.softmax_rows(scores);
    head_outs.push_back(t.matmul(weights, vh));
  }
  ValueId concat = heads_ == 1 ? head_outs[0] : t.concat_cols(head_outs);
  return wo_.forward(fwd, concat);
}

FeedForward::FeedForward(ParameterStore& store, Rng& rng, const std::string& name,
                         int dim, int expansion)
    : fc1_(store, rng, name + ".fc1", dim, dim * expansion),
      fc2_(store, rng, name + ".fc2", dim * expansion, dim) {}

ValueId FeedForward::forward(Forward& fwd, ValueId x) const {
  return fc2_.forward(fwd, fwd.tape.relu(fc1_.forward(fwd, x)));
}

TransformerLayer::TransformerLayer(ParameterStore& store, Rng& rng,
                                   const std::string& name, int model_dim, int heads,
                                   int ffn_expansion, double dropout)
    : ln1_(store, name + ".ln1", model_dim),
      ln2_(store, name + ".ln2", model_dim),
      attn_(store, rng, name + ".attn", model_dim, heads),
      ffn_(store, rng, name + ".ffn", model_dim, ffn_expansion),
      drop_(dropout) {}

ValueId TransformerLayer::forward(Forward& fwd, ValueId x) const {
  ValueId normed = ln1_.forward(fwd, x);
  x = fwd.tape.add(x, drop_.forward(fwd, attn_.forward(fwd, normed, normed)));
  x = fwd.tape.add(x, drop_.forward(fwd, ffn_.forward(fwd, ln2_.forward(fwd, x))));
  return x;
}

MultimodalLayer::MultimodalLayer(ParameterStore& store, Rng& rng,
                                 const std::string& name, int model_dim, int heads,
                                 int ffn_expansion, double dropout)
    : attn_(store, rng, name + ".attn", model_dim, heads),
      ffn_(store, rng, name + ".ffn", model_dim, ffn_expansion),
      ln1_(store, name + ".ln1", model_dim),
      ln2_(store, name + ".ln2", model_dim),
      drop_(dropout) {}

ValueId MultimodalLayer::forward(Forward& fwd, ValueId stream, ValueId source) const {
  Tape& t = fwd.tape;
  ValueId h = ln1_.forward(
      fwd, t.add(stream, drop_.forward(fwd, attn_.forward(fwd, stream, source))));
  return ln2_.forward(fwd, t.add(h, ffn_.forward(fwd, h)));
}

}  // namespace dlf
