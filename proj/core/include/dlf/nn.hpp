#pragma once

#include <string>
#include <vector>

#include "dlf/params.hpp"

namespace dlf {

// Fixed sinusoidal position table, (len, dim).
Tensor sinusoidal_positions(int len, int dim);

// y = x W + b, x: (n, in) -> (n, out).
class Linear {
 public:
  Linear(ParameterStore& store, Rng& rng, const std::string& name, int in, int out);
  ValueId forward(Forward& fwd, ValueId x) const;
  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

 private:
  Parameter* w_;
  Parameter* b_;
  int in_, out_;
};

// 1-D temporal convolution with same padding, (n, in) -> (n, out).
class Conv1d {
 public:
  Conv1d(ParameterStore& store, Rng& rng, const std::string& name, int in, int out,
         int kernel);
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  Parameter* w_;
  Parameter* b_;
  int kernel_;
};

class LayerNorm {
 public:
  LayerNorm(ParameterStore& store, const std::string& name, int dim);
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  Parameter* gain_;
  Parameter* bias_;
};

// Inverted dropout; identity in eval mode or at rate 0.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  double rate_;
};

// Scaled dot-product attention with a query stream and a (possibly different)
// key/value source. Heads split the model dim; scores use 1/sqrt(d_head).
class MultiHeadAttention {
 public:
  MultiHeadAttention(ParameterStore& store, Rng& rng, const std::string& name,
                     int model_dim, int heads);
  // query: (n_q, d), source: (n_s, d) -> (n_q, d)
  ValueId forward(Forward& fwd, ValueId query, ValueId source) const;

 private:
  Linear wq_, wk_, wv_, wo_;
  int heads_;
  int model_dim_;
};

// Two-layer position-wise feed-forward with ReLU, d -> expansion*d -> d.
class FeedForward {
 public:
  FeedForward(ParameterStore& store, Rng& rng, const std::string& name, int dim,
              int expansion);
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  Linear fc1_, fc2_;
};

// Pre-norm self-attention block:
//   x = x + Drop(Attn(LN(x)))
//   x = x + Drop(FFN(LN(x)))
class TransformerLayer {
 public:
  TransformerLayer(ParameterStore& store, Rng& rng, const std::string& name,
                   int model_dim, int heads, int ffn_expansion, double dropout);
  ValueId forward(Forward& fwd, ValueId x) const;

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
  Dropout drop_;
};

// Post-norm cross-attention block over a fixed source:
//   h = LN(h + Drop(MCA(h, source)))
//   h = LN(h + FFN(h))
class MultimodalLayer {
 public:
  MultimodalLayer(ParameterStore& store, Rng& rng, const std::string& name,
                  int model_dim, int heads, int ffn_expansion, double dropout);
  ValueId forward(Forward& fwd, ValueId stream, ValueId source) const;
  const MultiHeadAttention& attention() const { return attn_; }

 private:
  MultiHeadAttention attn_;
  FeedForward ffn_;
  LayerNorm ln1_, ln2_;
  Dropout drop_;
};

}  // namespace dlf
