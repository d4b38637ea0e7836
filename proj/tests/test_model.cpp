#include <doctest.h>

#include <chrono>
#include <cmath>

#include "dlf/model.hpp"

using namespace dlf;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg = gradcheck_config();
  return cfg;
}

Batch two_sample_batch(uint64_t seed = 0) {
  return gradcheck_batch(gradcheck_dims(), seed);
}

}  // namespace

TEST_CASE("batch forward emits five scalars per sample and consistent report") {
  DlfModel model(tiny_cfg(), gradcheck_dims(), /*init_seed=*/1);
  Batch batch = two_sample_batch();

  Forward fwd;
  auto result = model.build_batch_loss(fwd, batch, /*triplet_seed=*/7);
  REQUIRE(result.predictions.size() == 2);
  const LossReport& rep = result.report;

  // Hand-recomputed MAE of the final head over the batch.
  double mae = 0.0;
  for (size_t b = 0; b < result.predictions.size(); ++b) {
    mae += std::abs(result.predictions[b].final_pred - batch.labels[b]);
  }
  mae /= double(result.predictions.size());
  CHECK(rep.final_mae == doctest::Approx(mae).epsilon(1e-9));

  // Definitional identities, exact within 1e-6.
  const double ld = rep.lambda_r * rep.recon + rep.lambda_s * rep.specific +
                    rep.lambda_m * rep.triplet + rep.lambda_o * rep.ortho;
  CHECK(rep.decouple == doctest::Approx(ld).epsilon(1e-6));
  double msa = rep.beta_f * rep.final_mae + rep.beta_sh * rep.shared_mae;
  for (int m = 0; m < 3; ++m) msa += rep.beta_sp[size_t(m)] * rep.specific_mae[size_t(m)];
  CHECK(rep.msa == doctest::Approx(msa).epsilon(1e-6));
  CHECK(rep.total == doctest::Approx(rep.decouple + rep.msa).epsilon(1e-6));
  CHECK(rep.triplet_count == 6);

  // All loss terms are nonnegative.
  for (double v : {rep.recon, rep.specific, rep.triplet, rep.ortho, rep.decouple,
                   rep.final_mae, rep.shared_mae, rep.msa, rep.total}) {
    CHECK(v >= 0.0);
  }
}

TEST_CASE("fusion is the ordered concat of HSp_L, HSp_V, HSp_A, HSh") {
  DlfModel model(tiny_cfg(), gradcheck_dims(), 2);
  Batch batch = two_sample_batch();
  Forward fwd;
  std::array<Tensor, 3> features;
  for (Modality m : kAllModalities) {
    features[size_t(index_of(m))] = batch.sample_matrix(0, m).to_tensor();
  }
  auto nodes = model.run_sample(fwd, features, true);
  const Tensor& fused = fwd.tape.value(nodes.fused);
  const int d = model.config().model_dim;
  REQUIRE(fused.cols() == model.fused_dim());
  for (Modality m : kAllModalities) {
    const Tensor& hsp = fwd.tape.value(nodes.lfa.hsp[size_t(index_of(m))]);
    for (int j = 0; j < d; ++j) {
      CHECK(fused.at(0, index_of(m) * d + j) == hsp.at(0, j));
    }
  }
  const Tensor& hsh = fwd.tape.value(nodes.hsh);
  for (int j = 0; j < d; ++j) CHECK(fused.at(0, 3 * d + j) == hsh.at(0, j));
}

TEST_CASE("shared pathway consumes the time-axis concat of all modalities") {
  // Default synthetic dims 12+10+10 = 32 rows entering the shared layer; the
  // pooled vector and HSh stay d-wide.
  ModelConfig cfg = tiny_cfg();
  cfg.model_dim = 16;
  DlfModel model(cfg, DataDims{}, 3);
  SyntheticSpec spec;
  spec.n_train = 1;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  auto out = model.predict_sample(ds.train[0]);
  CHECK(out.fused.cols() == 4 * 16);
  CHECK(std::isfinite(out.predictions.final_pred));
}

TEST_CASE("specific head with unit weight passes its HSp component through") {
  DlfModel model(tiny_cfg(), gradcheck_dims(), 4);
  Tensor w({tiny_cfg().model_dim, 1});
  w.at(0, 0) = 1.0;
  model.params().find("head_specific.L.weight")->value = w;
  model.params().find("head_specific.L.bias")->value = Tensor({1, 1});

  Batch batch = two_sample_batch();
  Forward fwd;
  std::array<Tensor, 3> features;
  for (Modality m : kAllModalities) {
    features[size_t(index_of(m))] = batch.sample_matrix(0, m).to_tensor();
  }
  auto nodes = model.run_sample(fwd, features, false);
  CHECK(fwd.tape.value(nodes.pred_specific[0]).item() ==
        doctest::Approx(fwd.tape.value(nodes.lfa.hsp[0]).at(0, 0)).epsilon(1e-12));
}

TEST_CASE("disabling hierarchical predictions reduces MSA to the final loss") {
  ModelConfig cfg = tiny_cfg();
  cfg.use_hp = false;
  DlfModel model(cfg, gradcheck_dims(), 5);
  Forward fwd;
  auto result = model.build_batch_loss(fwd, two_sample_batch(), 7);
  CHECK(result.report.msa ==
        doctest::Approx(result.report.beta_f * result.report.final_mae).epsilon(1e-9));
  CHECK(result.report.beta_sh == 0.0);
}

TEST_CASE("disabling the FDM zeroes the whole decoupling loss") {
  ModelConfig cfg = tiny_cfg();
  cfg.use_fdm = false;
  DlfModel model(cfg, gradcheck_dims(), 6);
  Forward fwd;
  auto result = model.build_batch_loss(fwd, two_sample_batch(), 7);
  CHECK(result.report.decouple == 0.0);
  CHECK(result.report.recon == 0.0);
  CHECK(result.report.triplet == 0.0);
  CHECK(result.report.total ==
        doctest::Approx(result.report.msa).epsilon(1e-12));
}

TEST_CASE("modality subsets build standalone single-modality pipelines") {
  ModelConfig cfg = tiny_cfg();
  cfg.modalities = ModalitySet::parse("A");
  DlfModel model(cfg, gradcheck_dims(), 7);
  CHECK(model.fused_dim() == 2 * cfg.model_dim);
  CHECK(model.params().find("enc_specific.L.layer0.attn.wq.weight") == nullptr);
  CHECK(model.params().find("head_specific.A.weight") != nullptr);

  Batch batch = two_sample_batch();
  Forward fwd;
  auto result = model.build_batch_loss(fwd, batch, 7);
  CHECK(result.report.triplet_count == 0);  // no cross-modal positives
  CHECK(std::isfinite(result.report.total));
}

TEST_CASE("gradient isolation: only the vision specific loss is active") {
  ModelConfig cfg = tiny_cfg();
  cfg.weights.lambda_r = 0.0;
  cfg.weights.lambda_s = 0.0;
  cfg.weights.lambda_m = 0.0;
  cfg.weights.lambda_o = 0.0;
  cfg.beta.f = 0.0;
  cfg.beta.sh = 0.0;
  cfg.beta.sp = 0.0;
  cfg.beta.sp_override[size_t(index_of(Modality::Vision))] = 1.0;
  DlfModel model(cfg, gradcheck_dims(), 8);

  Forward fwd;
  auto result = model.build_batch_loss(fwd, two_sample_batch(), 7);
  fwd.backward_into_params(result.loss, model.params());

  auto grad_norm = [&](const std::string& prefix) {
    double norm = 0.0;
    for (const auto& p : model.params().all()) {
      if (p->name.rfind(prefix, 0) != 0) continue;
      for (int64_t i = 0; i < p->grad.size(); ++i) norm += p->grad[i] * p->grad[i];
    }
    return norm;
  };

  CHECK(grad_norm("lfa.branch_V") > 0.0);
  CHECK(grad_norm("lfa.branch_L") == 0.0);
  CHECK(grad_norm("lfa.branch_A") == 0.0);
  CHECK(grad_norm("head_specific.V") > 0.0);
  CHECK(grad_norm("head_final") == 0.0);
  CHECK(grad_norm("head_shared") == 0.0);
  CHECK(grad_norm("enc_shared") == 0.0);
  // The vision branch queries the language stream, so E_Sp^L is reachable.
  CHECK(grad_norm("enc_specific.L") > 0.0);
  CHECK(grad_norm("enc_specific.V") > 0.0);
  CHECK(grad_norm("enc_specific.A") == 0.0);
}

TEST_CASE("complete objective passes the finite-difference oracle") {
  PrecisionGuard guard(Precision::Bits64);
  DlfModel model(tiny_cfg(), gradcheck_dims(), 9);
  Batch batch = two_sample_batch(9);

  const auto t0 = std::chrono::steady_clock::now();
  GradCheckOptions opts;
  opts.max_scalars_per_param = 8;  // the acceptance suite samples more
  GradCheckReport report = grad_check_model(model, batch, /*triplet_seed=*/3, opts);
  const auto elapsed = std::chrono::steady_clock::now() - t0;

  CHECK(report.pass);
  CHECK(report.worst < 1e-4);
  CHECK(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count() < 60);
}

TEST_CASE("separate-query ablation trains the same parameter set") {
  ModelConfig a = tiny_cfg();
  ModelConfig b = tiny_cfg();
  b.use_lfa = false;
  DlfModel ma(a, gradcheck_dims(), 10);
  DlfModel mb(b, gradcheck_dims(), 10);
  CHECK(ma.params().scalar_count() == mb.params().scalar_count());

  Forward fwd;
  auto result = mb.build_batch_loss(fwd, two_sample_batch(), 7);
  CHECK(std::isfinite(result.report.total));
}
