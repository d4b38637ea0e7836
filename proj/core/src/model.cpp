#include "dlf/model.hpp"

#include <cmath>

namespace dlf {

void ModelConfig::validate() const {
  if (model_dim < 1) throw ConfigError("model_dim must be >= 1");
  if (heads < 1 || model_dim % heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) +
                      " must be divisible by heads " + std::to_string(heads));
  }
  if (encoder_depth < 0) throw ConfigError("encoder_depth must be >= 0");
  if (lfa_depth < 1) throw ConfigError("lfa_depth must be >= 1");
  if (ffn_expansion < 1) throw ConfigError("ffn_expansion must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (proj_kernel < 1 || proj_kernel % 2 == 0 || decoder_kernel < 1 ||
      decoder_kernel % 2 == 0) {
    throw ConfigError("kernel sizes must be odd and positive");
  }
  const double lams[] = {weights.lambda_r, weights.lambda_s, weights.lambda_m,
                         weights.lambda_o, weights.margin, beta.f, beta.sh, beta.sp};
  for (double v : lams) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("loss weights and margin must be finite and >= 0");
    }
  }
  if (modalities.empty()) throw ConfigError("at least one modality is required");
}

DlfModel::DlfModel(const ModelConfig& cfg, const DataDims& dims, uint64_t init_seed)
    : cfg_((cfg.validate(), cfg)),
      dims_(dims),
      init_rng_(mix_seed(init_seed, 0x1417ULL)),
      encoders_(store_, init_rng_, cfg_, dims_),
      lfa_(store_, init_rng_, cfg_),
      shared_path_(store_, init_rng_, "shared_path.layer0", cfg_.model_dim, cfg_.heads,
                   cfg_.ffn_expansion, cfg_.dropout),
      shared_fc1_(store_, init_rng_, "shared_path.fc1", cfg_.model_dim, cfg_.model_dim),
      shared_fc2_(store_, init_rng_, "shared_path.fc2", cfg_.model_dim, cfg_.model_dim),
      head_final_fc1_(store_, init_rng_, "head_final.fc1", fused_dim(), cfg_.model_dim),
      head_final_fc2_(store_, init_rng_, "head_final.fc2", cfg_.model_dim, 1),
      head_drop_(cfg_.dropout),
      head_shared_(store_, init_rng_, "head_shared", cfg_.model_dim, 1) {
  for (Modality m : cfg_.modalities.list()) {
    head_specific_[size_t(index_of(m))].emplace(
        store_, init_rng_, std::string("head_specific.") + modality_letter(m),
        cfg_.model_dim, 1);
  }
}

DlfModel::SampleNodes DlfModel::run_sample(Forward& fwd,
                                           const std::array<Tensor, 3>& features,
                                           bool with_reconstruction) const {
  Tape& t = fwd.tape;
  SampleNodes n;
  const auto mods = cfg_.modalities.list();

  for (Modality m : mods) {
    const auto i = size_t(index_of(m));
    ValueId x = t.constant(features[i]);
    n.projected[i] = encoders_.project(fwd, x, m);
    n.specific[i] = encoders_.encode_specific(fwd, n.projected[i], m);
    if (cfg_.use_fdm) {
      n.shared[i] = encoders_.encode_shared(fwd, n.projected[i]);
      if (with_reconstruction) {
        n.reconstructed[i] =
            encoders_.reconstruct(fwd, n.shared[i], n.specific[i], m);
        n.respecific[i] = encoders_.reencode_specific(fwd, n.reconstructed[i], m);
      }
    } else {
      // Disentanglement off: the specific encoding serves both pathways.
      n.shared[i] = n.specific[i];
    }
  }

  n.lfa = lfa_.forward(fwd, n.specific, /*separate_queries=*/!cfg_.use_lfa);

  // Shared pathway: time-axis concat, one transformer layer, mean pooling,
  // two fully connected layers.
  std::vector<ValueId> shared_seqs;
  for (Modality m : mods) shared_seqs.push_back(n.shared[size_t(index_of(m))]);
  ValueId seq = shared_seqs.size() == 1 ? shared_seqs[0] : t.concat_rows(shared_seqs);
  ValueId pooled = t.mean_rows(shared_path_.forward(fwd, seq));
  n.hsh = shared_fc2_.forward(fwd, t.relu(shared_fc1_.forward(fwd, pooled)));

  // Fusion: concat(HSp^L, HSp^V, HSp^A, HSh) over present modalities.
  std::vector<ValueId> fusion_parts;
  for (Modality m : mods) fusion_parts.push_back(n.lfa.hsp[size_t(index_of(m))]);
  fusion_parts.push_back(n.hsh);
  n.fused = t.concat_cols(fusion_parts);

  n.pred_final = head_final_fc2_.forward(
      fwd, head_drop_.forward(fwd, t.relu(head_final_fc1_.forward(fwd, n.fused))));
  n.pred_shared = head_shared_.forward(fwd, n.hsh);
  for (Modality m : mods) {
    const auto i = size_t(index_of(m));
    n.pred_specific[i] = head_specific_[i]->forward(fwd, n.lfa.hsp[i]);
  }
  return n;
}

namespace {

// Mean absolute error of per-sample scalar prediction nodes against labels.
ValueId batch_mae(Forward& fwd, const std::vector<ValueId>& preds,
                  std::span<const double> labels) {
  Tape& t = fwd.tape;
  ValueId acc{};
  for (size_t b = 0; b < preds.size(); ++b) {
    ValueId err = t.abs(t.add_scalar(preds[b], -labels[b]));
    acc = acc.valid() ? t.add(acc, err) : err;
  }
  return t.scale(acc, 1.0 / double(preds.size()));
}

}  // namespace

DlfModel::BatchResult DlfModel::build_batch_loss(Forward& fwd, const Batch& batch,
                                                 uint64_t triplet_seed) const {
  if (batch.batch_size < 1) throw Error("build_batch_loss: empty batch");
  Tape& t = fwd.tape;
  const auto mods = cfg_.modalities.list();

  std::vector<SampleNodes> samples;
  samples.reserve(size_t(batch.batch_size));
  for (int b = 0; b < batch.batch_size; ++b) {
    std::array<Tensor, 3> features;
    for (Modality m : mods) {
      features[size_t(index_of(m))] = batch.sample_matrix(b, m).to_tensor();
    }
    samples.push_back(run_sample(fwd, features, /*with_reconstruction=*/cfg_.use_fdm));
  }

  BatchResult result;
  LossReport& rep = result.report;
  rep.lambda_r = cfg_.effective_lambda_r();
  rep.lambda_s = cfg_.effective_lambda_s();
  rep.lambda_m = cfg_.effective_lambda_m();
  rep.lambda_o = cfg_.effective_lambda_o();
  rep.beta_f = cfg_.beta.f;
  rep.beta_sh = cfg_.effective_beta_sh();
  for (Modality m : mods) {
    rep.beta_sp[size_t(index_of(m))] = cfg_.effective_beta_sp(m);
  }

  ValueId decouple;
  if (cfg_.use_fdm) {
    // L_r and L_s: elementwise MSE, averaged over the batch inside each
    // modality (equal element counts), then over modalities.
    ValueId recon{}, specific{};
    for (Modality m : mods) {
      const auto i = size_t(index_of(m));
      std::vector<std::pair<ValueId, ValueId>> rec_pairs, spe_pairs;
      for (const auto& s : samples) {
        rec_pairs.emplace_back(s.projected[i], s.reconstructed[i]);
        spe_pairs.emplace_back(s.specific[i], s.respecific[i]);
      }
      ValueId r = mean_mse(fwd, rec_pairs);
      ValueId sline = mean_mse(fwd, spe_pairs);
      recon = recon.valid() ? t.add(recon, r) : r;
      specific = specific.valid() ? t.add(specific, sline) : sline;
    }
    recon = t.scale(recon, 1.0 / double(mods.size()));
    specific = t.scale(specific, 1.0 / double(mods.size()));

    // Triplets over pooled shared vectors.
    std::vector<std::array<ValueId, 3>> pooled(samples.size());
    for (size_t b = 0; b < samples.size(); ++b) {
      for (Modality m : mods) {
        const auto i = size_t(index_of(m));
        pooled[b][i] = t.mean_rows(samples[b].shared[i]);
      }
    }
    const auto triplets = sample_triplets(batch.labels, cfg_.modalities, triplet_seed);
    ValueId triplet = triplet_loss(fwd, pooled, triplets, cfg_.weights.margin,
                                   cfg_.triplet_metric);
    rep.triplet_count = int(triplets.size());

    std::vector<std::pair<ValueId, ValueId>> sh_sp;
    for (const auto& s : samples) {
      for (Modality m : mods) {
        const auto i = size_t(index_of(m));
        sh_sp.emplace_back(s.shared[i], s.specific[i]);
      }
    }
    ValueId ortho = ortho_loss(fwd, sh_sp, cfg_.ortho_granularity);

    LossWeights effective = cfg_.weights;
    effective.lambda_r = rep.lambda_r;
    effective.lambda_s = rep.lambda_s;
    effective.lambda_m = rep.lambda_m;
    effective.lambda_o = rep.lambda_o;
    decouple = decouple_loss(fwd, recon, specific, triplet, ortho, effective);

    rep.recon = t.value(recon).item();
    rep.specific = t.value(specific).item();
    rep.triplet = t.value(triplet).item();
    rep.ortho = t.value(ortho).item();
  } else {
    decouple = t.constant(Tensor::scalar(0.0));
  }
  rep.decouple = t.value(decouple).item();

  // Hierarchical MSA losses: MAE per head.
  std::vector<ValueId> finals, shareds;
  std::array<std::vector<ValueId>, 3> specifics;
  for (const auto& s : samples) {
    finals.push_back(s.pred_final);
    shareds.push_back(s.pred_shared);
    for (Modality m : mods) {
      const auto i = size_t(index_of(m));
      specifics[i].push_back(s.pred_specific[i]);
    }
  }
  ValueId l_f = batch_mae(fwd, finals, batch.labels);
  ValueId l_sh = batch_mae(fwd, shareds, batch.labels);
  ValueId msa = t.add(t.scale(l_f, rep.beta_f), t.scale(l_sh, rep.beta_sh));
  rep.final_mae = t.value(l_f).item();
  rep.shared_mae = t.value(l_sh).item();
  for (Modality m : mods) {
    const auto i = size_t(index_of(m));
    ValueId l_sp = batch_mae(fwd, specifics[i], batch.labels);
    rep.specific_mae[i] = t.value(l_sp).item();
    msa = t.add(msa, t.scale(l_sp, rep.beta_sp[i]));
  }
  rep.msa = t.value(msa).item();

  result.loss = t.add(decouple, msa);
  rep.total = t.value(result.loss).item();

  result.predictions.reserve(samples.size());
  for (const auto& s : samples) {
    PredictionSet p;
    p.final_pred = t.value(s.pred_final).item();
    p.shared_pred = t.value(s.pred_shared).item();
    for (Modality m : mods) {
      const auto i = size_t(index_of(m));
      p.specific_pred[i] = t.value(s.pred_specific[i]).item();
    }
    result.predictions.push_back(p);
  }
  return result;
}

GradCheckReport grad_check_model(DlfModel& model, const Batch& batch,
                                 uint64_t triplet_seed, const GradCheckOptions& opts) {
  LossBuilder loss_fn = [&](Forward& fwd) {
    return model.build_batch_loss(fwd, batch, triplet_seed).loss;
  };
  return grad_check(model.params(), loss_fn, opts);
}

ModelConfig gradcheck_config() {
  ModelConfig cfg;
  cfg.model_dim = 8;
  cfg.heads = 4;
  cfg.encoder_depth = 1;
  cfg.lfa_depth = 1;
  cfg.ffn_expansion = 2;
  cfg.dropout = 0.0;  // checks run in eval mode anyway
  return cfg;
}

DataDims gradcheck_dims() {
  DataDims dims;
  dims.seq_len = {4, 3, 3};
  dims.feat_dim = {6, 5, 5};
  return dims;
}

Batch gradcheck_batch(const DataDims& dims, uint64_t seed) {
  SyntheticSpec spec;
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  spec.dims = dims;
  spec.seed = seed;
  Dataset ds = gen_synthetic(spec);
  ds.train[0].label = 2.0f;
  ds.train[1].label = -2.0f;
  return make_batches(ds.train, dims, 2, seed, /*shuffle=*/false).at(0);
}

DlfModel::SampleOutput DlfModel::predict_sample(const Sample& sample) const {
  Forward fwd(/*training=*/false);
  std::array<Tensor, 3> features;
  for (Modality m : cfg_.modalities.list()) {
    features[size_t(index_of(m))] = sample.features[size_t(index_of(m))].to_tensor();
  }
  SampleNodes n = run_sample(fwd, features, /*with_reconstruction=*/false);
  SampleOutput out;
  out.fused = fwd.tape.value(n.fused);
  out.predictions.final_pred = fwd.tape.value(n.pred_final).item();
  out.predictions.shared_pred = fwd.tape.value(n.pred_shared).item();
  for (Modality m : cfg_.modalities.list()) {
    const auto i = size_t(index_of(m));
    out.predictions.specific_pred[i] = fwd.tape.value(n.pred_specific[i]).item();
  }
  return out;
}

}  // namespace dlf
