#include <doctest.h>

#include "dlf/encoders.hpp"
#include "dlf/gradcheck.hpp"

using namespace dlf;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.model_dim = 16;
  cfg.heads = 4;
  cfg.encoder_depth = 1;
  cfg.lfa_depth = 1;
  cfg.dropout = 0.0;
  return cfg;
}

Tensor random_matrix(int n, int d, Rng& rng) {
  Tensor t({n, d});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("projection maps d_m to the model dim, preserving sequence length") {
  ParameterStore store;
  Rng rng(0);
  DataDims dims;  // language (12, 16), vision (10, 8)
  DisentangleEncoders enc(store, rng, small_cfg(), dims);

  Forward fwd;
  ValueId x = fwd.tape.constant(random_matrix(10, 8, rng));
  ValueId p = enc.project(fwd, x, Modality::Vision);
  CHECK(fwd.tape.value(p).rows() == 10);
  CHECK(fwd.tape.value(p).cols() == 16);
}

TEST_CASE("projection with identity weight and d_m = d is the identity") {
  ModelConfig cfg = small_cfg();
  cfg.model_dim = 8;
  ParameterStore store;
  Rng rng(0);
  DisentangleEncoders enc(store, rng, cfg, DataDims{});  // audio feat_dim = 8

  Tensor eye({8, 8});
  for (int i = 0; i < 8; ++i) eye.at(i, i) = 1.0;
  store.find("proj.A.weight")->value = eye;
  store.find("proj.A.bias")->value = Tensor({1, 8});

  Forward fwd;
  Tensor input = random_matrix(10, 8, rng);
  ValueId p = enc.project(fwd, fwd.tape.constant(input), Modality::Audio);
  CHECK(max_abs_diff(fwd.tape.value(p), input) == 0.0);
}

TEST_CASE("encoders preserve shape and are deterministic in eval mode") {
  ParameterStore store;
  Rng rng(1);
  DisentangleEncoders enc(store, rng, small_cfg(), DataDims{});

  Forward fwd;
  Tensor input = random_matrix(12, 16, rng);
  ValueId a = enc.encode_shared(fwd, fwd.tape.constant(input));
  ValueId b = enc.encode_shared(fwd, fwd.tape.constant(input));
  CHECK(fwd.tape.value(a).rows() == 12);
  CHECK(fwd.tape.value(a).cols() == 16);
  CHECK(max_abs_diff(fwd.tape.value(a), fwd.tape.value(b)) == 0.0);

  ValueId s = enc.encode_specific(fwd, fwd.tape.constant(input), Modality::Language);
  CHECK(fwd.tape.value(s).rows() == 12);
}

TEST_CASE("one shared-encoder parameter set serves all three modalities") {
  ParameterStore store;
  Rng rng(2);
  DisentangleEncoders enc(store, rng, small_cfg(), DataDims{});

  // Exactly one enc_shared parameter family exists.
  CHECK(store.find("enc_shared.layer0.attn.wq.weight") != nullptr);
  CHECK(store.find("enc_shared.L.layer0.attn.wq.weight") == nullptr);

  // Mutating the shared weights changes the encoding of every modality input.
  Rng data_rng(3);
  std::array<Tensor, 3> inputs = {random_matrix(12, 16, data_rng),
                                  random_matrix(10, 16, data_rng),
                                  random_matrix(10, 16, data_rng)};
  auto encode_all = [&]() {
    std::array<Tensor, 3> out;
    for (int m = 0; m < 3; ++m) {
      Forward fwd;
      out[size_t(m)] =
          fwd.tape.value(enc.encode_shared(fwd, fwd.tape.constant(inputs[size_t(m)])));
    }
    return out;
  };
  auto before = encode_all();
  Parameter* w = store.find("enc_shared.layer0.attn.wv.weight");
  for (int64_t i = 0; i < w->value.size(); ++i) w->value[i] += 0.05;
  auto after = encode_all();
  for (int m = 0; m < 3; ++m) {
    CHECK(max_abs_diff(before[size_t(m)], after[size_t(m)]) > 0.0);
  }
}

TEST_CASE("depth 0 encoders are the identity, reducing to a pure decoder test") {
  ModelConfig cfg = small_cfg();
  cfg.encoder_depth = 0;
  cfg.model_dim = 1;
  cfg.heads = 1;
  ParameterStore store;
  Rng rng(4);
  DataDims dims;
  dims.feat_dim = {1, 1, 1};
  DisentangleEncoders enc(store, rng, cfg, dims);

  Forward fwd;
  Tensor input = random_matrix(5, 1, rng);
  ValueId x = fwd.tape.constant(input);
  CHECK(max_abs_diff(fwd.tape.value(enc.encode_shared(fwd, x)), input) == 0.0);
  CHECK(max_abs_diff(
            fwd.tape.value(enc.encode_specific(fwd, x, Modality::Language)), input) ==
        0.0);

  // Decoder with weight [1, 1]^T: sh = [[2]], sp = [[3]] -> [[5]].
  store.find("dec.L.weight")->value = Tensor::matrix(2, 1, {1.0, 1.0});
  store.find("dec.L.bias")->value = Tensor({1, 1});
  ValueId rec = enc.reconstruct(fwd, fwd.tape.constant(Tensor::matrix(1, 1, {2.0})),
                                fwd.tape.constant(Tensor::matrix(1, 1, {3.0})),
                                Modality::Language);
  CHECK(fwd.tape.value(rec).item() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("reconstruct outputs N x d and zero inputs with zero bias give zero") {
  ParameterStore store;
  Rng rng(5);
  DisentangleEncoders enc(store, rng, small_cfg(), DataDims{});
  Forward fwd;
  ValueId sh = fwd.tape.constant(Tensor({10, 16}));
  ValueId sp = fwd.tape.constant(Tensor({10, 16}));
  ValueId rec = enc.reconstruct(fwd, sh, sp, Modality::Vision);
  CHECK(fwd.tape.value(rec).rows() == 10);
  CHECK(fwd.tape.value(rec).cols() == 16);
  for (int64_t i = 0; i < fwd.tape.value(rec).size(); ++i) {
    CHECK(fwd.tape.value(rec)[i] == 0.0);
  }
}

TEST_CASE("reencode_specific is the same function as encode_specific") {
  ParameterStore store;
  Rng rng(6);
  DisentangleEncoders enc(store, rng, small_cfg(), DataDims{});
  Forward fwd;
  Tensor input = random_matrix(10, 16, rng);
  ValueId a = enc.encode_specific(fwd, fwd.tape.constant(input), Modality::Audio);
  ValueId b = enc.reencode_specific(fwd, fwd.tape.constant(input), Modality::Audio);
  CHECK(max_abs_diff(fwd.tape.value(a), fwd.tape.value(b)) == 0.0);
}

TEST_CASE("specific-loss gradient reaches E_Sp through both call sites") {
  PrecisionGuard guard(Precision::Bits64);
  ModelConfig cfg = small_cfg();
  cfg.model_dim = 4;
  cfg.heads = 2;
  ParameterStore store;
  Rng rng(7);
  DataDims dims;
  dims.seq_len = {3, 3, 3};
  dims.feat_dim = {4, 4, 4};
  DisentangleEncoders enc(store, rng, cfg, dims);
  Tensor input = random_matrix(3, 4, rng);

  LossBuilder loss_fn = [&](Forward& fwd) {
    ValueId x = fwd.tape.constant(input);
    ValueId proj = enc.project(fwd, x, Modality::Language);
    ValueId sh = enc.encode_shared(fwd, proj);
    ValueId sp = enc.encode_specific(fwd, proj, Modality::Language);
    ValueId rec = enc.reconstruct(fwd, sh, sp, Modality::Language);
    ValueId sp_re = enc.reencode_specific(fwd, rec, Modality::Language);
    return fwd.tape.mse(sp, sp_re);
  };
  GradCheckReport report = grad_check(store, loss_fn, {});
  CHECK(report.pass);

  // And the specific encoder parameters do receive gradient.
  Forward fwd;
  fwd.backward_into_params(loss_fn(fwd), store);
  const Tensor& g = store.find("enc_specific.L.layer0.attn.wv.weight")->grad;
  double norm = 0.0;
  for (int64_t i = 0; i < g.size(); ++i) norm += g[i] * g[i];
  CHECK(norm > 0.0);
}

TEST_CASE("vision-specific encoder gets zero gradient from a language-only loss") {
  ParameterStore store;
  Rng rng(8);
  DisentangleEncoders enc(store, rng, small_cfg(), DataDims{});
  Rng data_rng(9);

  Forward fwd;
  ValueId xl = fwd.tape.constant(random_matrix(12, 16, data_rng));
  ValueId xv = fwd.tape.constant(random_matrix(10, 16, data_rng));
  ValueId sp_l = enc.encode_specific(fwd, xl, Modality::Language);
  ValueId sp_v = enc.encode_specific(fwd, xv, Modality::Vision);
  (void)sp_v;  // computed but untouched by the loss
  ValueId loss = fwd.tape.mean_all(fwd.tape.mul(sp_l, sp_l));
  fwd.backward_into_params(loss, store);

  const Tensor& gv = store.find("enc_specific.V.layer0.attn.wq.weight")->grad;
  for (int64_t i = 0; i < gv.size(); ++i) CHECK(gv[i] == 0.0);
  const Tensor& gl = store.find("enc_specific.L.layer0.attn.wq.weight")->grad;
  double norm = 0.0;
  for (int64_t i = 0; i < gl.size(); ++i) norm += gl[i] * gl[i];
  CHECK(norm > 0.0);
}
