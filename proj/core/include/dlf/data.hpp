#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dlf/common.hpp"
#include "dlf/tensor.hpp"

namespace dlf {

// One modality's feature sequence, N x d row-major. Storage is float to match
// the on-disk container exactly.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> v;

  float at(int r, int c) const { return v[size_t(r) * size_t(cols) + size_t(c)]; }
  float& at(int r, int c) { return v[size_t(r) * size_t(cols) + size_t(c)]; }
  Tensor to_tensor() const;
};

struct Sample {
  std::string id;
  std::array<FeatureMatrix, 3> features;  // indexed by Modality, (L, V, A)
  float label = 0.0f;                     // in [-3, 3]
};

// Per-modality sequence length and feature dimension, shared by all samples.
struct DataDims {
  std::array<int, 3> seq_len = {12, 10, 10};
  std::array<int, 3> feat_dim = {16, 8, 8};

  int seq(Modality m) const { return seq_len[size_t(index_of(m))]; }
  int feat(Modality m) const { return feat_dim[size_t(index_of(m))]; }
  friend bool operator==(const DataDims&, const DataDims&) = default;
};

enum class Split { Train, Valid, Test };
inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Valid,
                                                    Split::Test};
const char* split_name(Split s);

struct Dataset {
  DataDims dims;
  std::vector<Sample> train, valid, test;
  int clamped_label_count = 0;  // labels pulled into range at load time

  const std::vector<Sample>& split(Split s) const;
  std::vector<Sample>& split(Split s);
};

// --- synthetic data ---------------------------------------------------------

// Labels are uniform in [-3, 3]. Every row of modality m is
// snr_m * (label/3) * b_m + unit Gaussian noise, with b_m a fixed unit
// direction drawn from the seed, so the modality with the higher SNR carries
// the stronger linear signal. Pure function of the spec.
struct SyntheticSpec {
  int n_train = 64;
  int n_valid = 16;
  int n_test = 16;
  DataDims dims;
  uint64_t seed = 0;
  double language_snr = 4.0;
  double other_snr = 0.5;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

// --- container I/O ----------------------------------------------------------
//
// Binary split container (little-endian):
//   magic "DLF1" | version u32 | sample count u32 |
//   per sample: id length u16, id bytes, label f32,
//     then for each modality in (L, V, A): N u32, d u32, N*d f32 row-major.
// meta.json declares per-modality dims, split file names and the label range.
// A split file ending in .jsonl is parsed as one JSON object per line with
// keys id, label, language, vision, audio (nested arrays).

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// --- batching ----------------------------------------------------------------

// A batch stacks each modality into (B x N_m x d_m) plus a label vector.
struct Batch {
  int batch_size = 0;
  DataDims dims;
  std::array<std::vector<float>, 3> features;  // [b][n][d] row-major per modality
  std::vector<double> labels;
  std::vector<std::string> ids;

  // Copy of sample b's modality-m matrix.
  FeatureMatrix sample_matrix(int b, Modality m) const;
};

// Deterministic shuffle from the seed; the final partial batch is kept.
std::vector<Batch> make_batches(std::span<const Sample> samples, const DataDims& dims,
                                int batch_size, uint64_t seed, bool shuffle);

}  // namespace dlf
