#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dlf/data.hpp"

using namespace dlf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("dlf_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return s;
}

bool samples_equal(const Sample& a, const Sample& b) {
  if (a.id != b.id || a.label != b.label) return false;
  for (int m = 0; m < 3; ++m) {
    const auto& fa = a.features[size_t(m)];
    const auto& fb = b.features[size_t(m)];
    if (fa.rows != fb.rows || fa.cols != fb.cols || fa.v != fb.v) return false;
  }
  return true;
}

// Ordinary least squares fit of label on mean-pooled modality features, used
// as an independent probe of which modality carries the signal.
double probe_mae(const Dataset& ds, Modality m) {
  const int d = ds.dims.feat(m) + 1;  // + intercept
  const auto& train = ds.train;
  std::vector<std::vector<double>> xtx(size_t(d), std::vector<double>(size_t(d), 0.0));
  std::vector<double> xty(size_t(d), 0.0);
  auto pooled = [&](const Sample& s) {
    std::vector<double> x(size_t(d), 0.0);
    const auto& f = s.features[size_t(index_of(m))];
    for (int r = 0; r < f.rows; ++r)
      for (int c = 0; c < f.cols; ++c) x[size_t(c)] += double(f.at(r, c)) / f.rows;
    x[size_t(d - 1)] = 1.0;
    return x;
  };
  for (const Sample& s : train) {
    const auto x = pooled(s);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) xtx[size_t(i)][size_t(j)] += x[size_t(i)] * x[size_t(j)];
      xty[size_t(i)] += x[size_t(i)] * double(s.label);
    }
  }
  for (int i = 0; i < d; ++i) xtx[size_t(i)][size_t(i)] += 1e-6;  // ridge for stability
  // Gaussian elimination.
  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(xtx[size_t(r)][size_t(col)]) > std::abs(xtx[size_t(pivot)][size_t(col)]))
        pivot = r;
    }
    std::swap(xtx[size_t(col)], xtx[size_t(pivot)]);
    std::swap(xty[size_t(col)], xty[size_t(pivot)]);
    const double diag = xtx[size_t(col)][size_t(col)];
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = xtx[size_t(r)][size_t(col)] / diag;
      for (int c = col; c < d; ++c) xtx[size_t(r)][size_t(c)] -= f * xtx[size_t(col)][size_t(c)];
      xty[size_t(r)] -= f * xty[size_t(col)];
    }
  }
  std::vector<double> w(size_t(d), 0.0);
  for (int i = 0; i < d; ++i) w[size_t(i)] = xty[size_t(i)] / xtx[size_t(i)][size_t(i)];

  double mae = 0.0;
  for (const Sample& s : ds.test) {
    const auto x = pooled(s);
    double pred = 0.0;
    for (int i = 0; i < d; ++i) pred += w[size_t(i)] * x[size_t(i)];
    mae += std::abs(pred - double(s.label));
  }
  return mae / double(ds.test.size());
}

}  // namespace

TEST_CASE("synthetic generation is a pure function of its spec") {
  SyntheticSpec spec;
  spec.n_train = 8;
  spec.n_valid = 2;
  spec.n_test = 2;
  spec.seed = 0;
  Dataset a = gen_synthetic(spec);
  Dataset b = gen_synthetic(spec);
  REQUIRE(a.train.size() == 8);
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(samples_equal(a.train[i], b.train[i]));
  CHECK(a.train[0].features[0].rows == 12);
  CHECK(a.train[0].features[0].cols == 16);
  CHECK(a.train[0].features[1].rows == 10);
  CHECK(a.train[0].features[2].cols == 8);
}

TEST_CASE("synthetic labels cover all seven rounded classes") {
  SyntheticSpec spec;
  spec.n_train = 1200;
  spec.n_valid = 1;
  spec.n_test = 1;
  spec.seed = 3;
  Dataset ds = gen_synthetic(spec);
  std::set<int> classes;
  for (const Sample& s : ds.train) {
    classes.insert(int(std::lround(double(s.label))));
    CHECK(s.label >= -3.0f);
    CHECK(s.label <= 3.0f);
  }
  CHECK(classes.size() == 7);
}

TEST_CASE("synthetic rejects degenerate specs") {
  SyntheticSpec spec;
  spec.n_train = 0;
  CHECK_THROWS_AS(gen_synthetic(spec), Error);
  spec.n_train = 4;
  spec.dims.feat_dim[1] = 0;
  CHECK_THROWS_AS(gen_synthetic(spec), Error);
}

TEST_CASE("language probe beats vision probe when language snr dominates") {
  SyntheticSpec spec;
  spec.n_train = 256;
  spec.n_valid = 8;
  spec.n_test = 64;
  spec.seed = 1;
  spec.language_snr = 4.0;
  spec.other_snr = 0.5;
  Dataset ds = gen_synthetic(spec);
  const double mae_l = probe_mae(ds, Modality::Language);
  const double mae_v = probe_mae(ds, Modality::Vision);
  CHECK(mae_l < mae_v);
}

TEST_CASE("dataset write then read is the identity") {
  SyntheticSpec spec;
  spec.n_train = 3;
  spec.n_valid = 1;
  spec.n_test = 1;
  spec.seed = 7;
  Dataset ds = gen_synthetic(spec);
  const auto dir = temp_dir("roundtrip");
  save_dataset(ds, dir);
  Dataset back = load_dataset(dir);
  CHECK(back.dims == ds.dims);
  CHECK(back.clamped_label_count == 0);
  REQUIRE(back.train.size() == ds.train.size());
  for (size_t i = 0; i < ds.train.size(); ++i)
    CHECK(samples_equal(ds.train[i], back.train[i]));
  for (size_t i = 0; i < ds.valid.size(); ++i)
    CHECK(samples_equal(ds.valid[i], back.valid[i]));
}

TEST_CASE("save is byte-identical across runs") {
  SyntheticSpec spec;
  spec.n_train = 4;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  const auto d1 = temp_dir("bytes1");
  const auto d2 = temp_dir("bytes2");
  save_dataset(ds, d1);
  save_dataset(ds, d2);
  CHECK(read_file(d1 / "train.dlf") == read_file(d2 / "train.dlf"));
  CHECK(read_file(d1 / "meta.json") == read_file(d2 / "meta.json"));
}

TEST_CASE("bad magic bytes raise FormatError") {
  SyntheticSpec spec;
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  const auto dir = temp_dir("badmagic");
  save_dataset(ds, dir);
  {
    std::fstream f(dir / "train.dlf", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_dataset(dir), FormatError);
}

TEST_CASE("record count mismatch raises CorruptError") {
  SyntheticSpec spec;
  spec.n_train = 5;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  const auto dir = temp_dir("corrupt");
  save_dataset(ds, dir);
  // Truncate the train container: header still promises 5 records.
  const auto path = dir / "train.dlf";
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 64);
  CHECK_THROWS_AS(load_dataset(dir), CorruptError);
}

TEST_CASE("missing modality in meta raises SchemaError") {
  SyntheticSpec spec;
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  const auto dir = temp_dir("schema");
  save_dataset(ds, dir);
  std::string meta = read_file(dir / "meta.json");
  const auto pos = meta.find("\"audio\"");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 7, "\"hidden\"");
  std::ofstream(dir / "meta.json") << meta;
  CHECK_THROWS_AS(load_dataset(dir), SchemaError);
}

TEST_CASE("jsonl fixtures load with pad and truncate and label clamping") {
  const auto dir = temp_dir("jsonl");
  std::ofstream(dir / "meta.json") << R"({
    "format": 1,
    "label_range": [-3.0, 3.0],
    "modalities": {
      "language": {"seq_len": 3, "feat_dim": 2},
      "vision":   {"seq_len": 2, "feat_dim": 2},
      "audio":    {"seq_len": 2, "feat_dim": 1}
    },
    "splits": {"train": "train.jsonl", "valid": "valid.jsonl", "test": "test.jsonl"}
  })";
  // language has 2 rows (padded to 3), vision has 3 rows (truncated to 2),
  // label 4.5 clamps to 3.
  const char* line =
      R"({"id":"a","label":4.5,"language":[[1,2],[3,4]],"vision":[[1,1],[2,2],[3,3]],"audio":[[1],[2]]})";
  std::ofstream(dir / "train.jsonl") << line << "\n";
  std::ofstream(dir / "valid.jsonl") << line << "\n";
  std::ofstream(dir / "test.jsonl") << line << "\n";

  Dataset ds = load_dataset(dir);
  CHECK(ds.clamped_label_count == 3);
  REQUIRE(ds.train.size() == 1);
  const Sample& s = ds.train[0];
  CHECK(s.label == 3.0f);
  CHECK(s.features[0].rows == 3);
  CHECK(s.features[0].at(2, 0) == 0.0f);  // padded row
  CHECK(s.features[1].rows == 2);
  CHECK(s.features[1].at(1, 1) == 2.0f);  // tail dropped
}

TEST_CASE("batches cover the split with the partial batch kept") {
  SyntheticSpec spec;
  spec.n_train = 10;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);

  auto batches = make_batches(ds.train, ds.dims, 4, /*seed=*/0, /*shuffle=*/true);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].batch_size == 4);
  CHECK(batches[1].batch_size == 4);
  CHECK(batches[2].batch_size == 2);
  CHECK(batches[0].labels.size() == 4);
  CHECK(batches[0].features[0].size() == size_t(4 * 12 * 16));

  std::set<std::string> seen;
  for (const auto& b : batches)
    for (const auto& id : b.ids) seen.insert(id);
  CHECK(seen.size() == 10);
}

TEST_CASE("batch order is deterministic in the seed and storage-ordered unshuffled") {
  SyntheticSpec spec;
  spec.n_train = 6;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);

  auto a = make_batches(ds.train, ds.dims, 2, 5, true);
  auto b = make_batches(ds.train, ds.dims, 2, 5, true);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].ids == b[i].ids);

  auto plain = make_batches(ds.train, ds.dims, 4, 5, false);
  CHECK(plain[0].ids[0] == "train_0");
  CHECK(plain[0].ids[3] == "train_3");

  CHECK_THROWS_AS(make_batches(std::span<const Sample>(), ds.dims, 4, 0, false), Error);
}

TEST_CASE("batch sample_matrix slices the stacked block back out") {
  SyntheticSpec spec;
  spec.n_train = 3;
  spec.n_valid = 1;
  spec.n_test = 1;
  Dataset ds = gen_synthetic(spec);
  auto batches = make_batches(ds.train, ds.dims, 3, 0, false);
  const FeatureMatrix back = batches[0].sample_matrix(1, Modality::Vision);
  CHECK(back.v == ds.train[1].features[1].v);
}
