#include "dlf/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace dlf {

namespace {

using nlohmann::ordered_json;

constexpr uint64_t kShuffleSalt = 0x5f5fULL;
constexpr uint64_t kDropoutSalt = 0xd0d0ULL;
constexpr uint64_t kTripletSalt = 0x3713ULL;
constexpr uint64_t kFinalLossSalt = 0xf1a1ULL;

void accumulate(LossReport& acc, const LossReport& part, double weight) {
  acc.recon += weight * part.recon;
  acc.specific += weight * part.specific;
  acc.triplet += weight * part.triplet;
  acc.ortho += weight * part.ortho;
  acc.decouple += weight * part.decouple;
  acc.final_mae += weight * part.final_mae;
  acc.shared_mae += weight * part.shared_mae;
  for (int m = 0; m < 3; ++m) {
    acc.specific_mae[size_t(m)] += weight * part.specific_mae[size_t(m)];
  }
  acc.msa += weight * part.msa;
  acc.total += weight * part.total;
  acc.triplet_count += part.triplet_count;
}

ordered_json losses_json(const LossReport& r) {
  ordered_json j;
  j["recon"] = r.recon;
  j["specific"] = r.specific;
  j["triplet"] = r.triplet;
  j["ortho"] = r.ortho;
  j["decouple"] = r.decouple;
  j["final_mae"] = r.final_mae;
  j["shared_mae"] = r.shared_mae;
  j["specific_mae_l"] = r.specific_mae[0];
  j["specific_mae_v"] = r.specific_mae[1];
  j["specific_mae_a"] = r.specific_mae[2];
  j["msa"] = r.msa;
  j["total"] = r.total;
  j["triplet_count"] = r.triplet_count;
  return j;
}

ordered_json metrics_to_ordered_json(const MetricReport& m) {
  ordered_json j;
  j["acc7"] = m.acc7;
  j["acc5"] = m.acc5;
  j["acc2"] = m.acc2;
  j["f1"] = m.f1;
  j["corr"] = m.corr;
  j["mae"] = m.mae;
  j["corr_defined"] = m.corr_defined;
  j["acc2_defined"] = m.acc2_defined;
  j["acc2_excluded_zero_labels"] = m.acc2_excluded;
  j["acc2_convention"] = "negative-vs-positive, zero labels excluded";
  j["confusion7"] = m.confusion7;
  j["class_accuracy"] = m.class_accuracy;
  j["class_present"] = m.class_present;
  return j;
}

}  // namespace

void Adam::step(ParameterStore& store) {
  const auto& params = store.all();
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw Error("Adam: parameter count changed");

  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double norm = std::sqrt(store.grad_sq_norm());
    if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p.value[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
    p.value.round_to_precision();
  }
}

MetricReport evaluate(const DlfModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw Error("evaluate: empty split");
  std::vector<double> preds, labels;
  preds.reserve(samples.size());
  labels.reserve(samples.size());
  for (const Sample& s : samples) {
    preds.push_back(model.predict_sample(s).predictions.final_pred);
    labels.push_back(double(s.label));
  }
  return compute_metrics(preds, labels);
}

double compute_split_loss(const DlfModel& model, std::span<const Sample> samples,
                          int batch_size, uint64_t triplet_seed) {
  if (samples.empty()) throw Error("compute_split_loss: empty split");
  const auto batches =
      make_batches(samples, model.dims(), batch_size, /*seed=*/0, /*shuffle=*/false);
  double total = 0.0;
  int count = 0;
  for (size_t bi = 0; bi < batches.size(); ++bi) {
    Forward fwd(/*training=*/false);
    auto result = model.build_batch_loss(
        fwd, batches[bi], mix_seed(triplet_seed, kTripletSalt, bi));
    total += result.report.total * batches[bi].batch_size;
    count += batches[bi].batch_size;
  }
  return total / double(count);
}

TrainResult train(DlfModel& model, const Dataset& dataset, const TrainOptions& opts,
                  const OptimizerConfig& optimizer, std::ostream* progress) {
  if (dataset.train.empty() || dataset.valid.empty()) {
    throw Error("train: train and valid splits must be non-empty");
  }
  if (opts.batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (opts.patience < 1) throw Error("train: patience must be >= 1");

  Adam adam(optimizer);
  Rng dropout_rng(mix_seed(opts.seed, kDropoutSalt));

  TrainResult result;
  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_snapshot = model.params().snapshot_values();
  int best_epoch = 0;
  int since_improve = 0;

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const auto batches = make_batches(dataset.train, model.dims(), opts.batch_size,
                                      mix_seed(opts.seed, kShuffleSalt, uint64_t(epoch)),
                                      /*shuffle=*/true);
    LossReport epoch_losses;
    int seen = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      try {
        Forward fwd(/*training=*/true, &dropout_rng);
        auto out = model.build_batch_loss(
            fwd, batch, mix_seed(opts.seed, kTripletSalt, uint64_t(epoch), bi));
        if (!std::isfinite(out.report.total)) {
          throw NumericError("loss is not finite");
        }
        fwd.backward_into_params(out.loss, model.params());
        adam.step(model.params());
        accumulate(epoch_losses, out.report, double(batch.batch_size));
        seen += batch.batch_size;
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(bi) + ": " + e.what());
      }
    }
    const double inv = 1.0 / double(seen);
    LossReport avg = epoch_losses;
    avg.recon *= inv;
    avg.specific *= inv;
    avg.triplet *= inv;
    avg.ortho *= inv;
    avg.decouple *= inv;
    avg.final_mae *= inv;
    avg.shared_mae *= inv;
    for (int m = 0; m < 3; ++m) avg.specific_mae[size_t(m)] *= inv;
    avg.msa *= inv;
    avg.total *= inv;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_losses = avg;
    rec.valid = evaluate(model, dataset.valid);
    rec.improved = rec.valid.mae < best_mae;
    if (rec.improved) {
      best_mae = rec.valid.mae;
      best_epoch = epoch;
      best_snapshot = model.params().snapshot_values();
      since_improve = 0;
    } else {
      ++since_improve;
    }
    if (progress) {
      (*progress) << "epoch " << epoch << " train_loss " << avg.total << " valid_mae "
                  << rec.valid.mae << (rec.improved ? " *" : "") << "\n";
    }
    result.history.push_back(std::move(rec));
    if (since_improve >= opts.patience) break;
  }

  model.params().restore_values(best_snapshot);
  result.best_epoch = best_epoch;
  result.best_valid_mae = best_mae;
  result.test_metrics = evaluate(model, dataset.test);
  result.final_train_loss = compute_split_loss(model, dataset.train, opts.batch_size,
                                               mix_seed(opts.seed, kFinalLossSalt));
  return result;
}

void export_representations(const DlfModel& model, std::span<const Sample> samples,
                            const std::filesystem::path& path) {
  if (samples.empty()) throw Error("export_representations: empty split");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());

  const int dim = model.fused_dim();
  os << "id,label,class7";
  for (int j = 0; j < dim; ++j) os << ",f_" << j;
  os << "\n";

  char buf[64];
  for (const Sample& s : samples) {
    auto out = model.predict_sample(s);
    std::snprintf(buf, sizeof buf, "%.9g", double(s.label));
    os << s.id << ',' << buf << ',' << class7(double(s.label));
    for (int j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", out.fused.at(0, j));
      os << ',' << buf;
    }
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_history_jsonl(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const EpochRecord& rec : result.history) {
    ordered_json j;
    j["epoch"] = rec.epoch;
    j["losses"] = losses_json(rec.train_losses);
    j["valid"] = metrics_to_ordered_json(rec.valid);
    j["improved"] = rec.improved;
    os << j.dump() << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::string metrics_json(const MetricReport& report) {
  return metrics_to_ordered_json(report).dump(2) + "\n";
}

std::string confusion_csv(const MetricReport& report) {
  std::string out = "true\\pred";
  for (const char* name : kClass7Names) {
    out += ',';
    out += name;
  }
  out += ",class_accuracy\n";
  char buf[32];
  for (int c = 0; c < 7; ++c) {
    out += kClass7Names[size_t(c)];
    for (int p = 0; p < 7; ++p) {
      out += ',' + std::to_string(report.confusion7[size_t(c)][size_t(p)]);
    }
    std::snprintf(buf, sizeof buf, "%.6g", report.class_accuracy[size_t(c)]);
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

}  // namespace dlf
