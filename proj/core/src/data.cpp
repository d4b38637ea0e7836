#include "dlf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dlf {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr char kMagic[4] = {'D', 'L', 'F', '1'};
constexpr uint32_t kVersion = 1;

// --- little-endian primitives (bit-exact container contract) ---------------

void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
}

void put_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  put_bytes(os, b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  put_bytes(os, b, 4);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

bool get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  return size_t(is.gcount()) == n;
}

uint16_t get_u16(std::istream& is, const char* what) {
  unsigned char b[2];
  if (!get_bytes(is, b, 2)) throw CorruptError(std::string("truncated container: ") + what);
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) throw CorruptError(std::string("truncated container: ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is, const char* what) {
  const uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// --- container split files ---------------------------------------------------

void write_split(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  put_bytes(os, kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, uint32_t(samples.size()));
  for (const Sample& s : samples) {
    put_u16(os, uint16_t(s.id.size()));
    put_bytes(os, s.id.data(), s.id.size());
    put_f32(os, s.label);
    for (Modality m : kAllModalities) {
      const FeatureMatrix& f = s.features[size_t(index_of(m))];
      put_u32(os, uint32_t(f.rows));
      put_u32(os, uint32_t(f.cols));
      for (float x : f.v) put_f32(os, x);
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<Sample> read_split_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  if (!get_bytes(is, magic, 4)) {
    throw FormatError("container too short for magic: " + path.string());
  }
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic bytes in " + path.string() + " (expected \"DLF1\")");
  }
  const uint32_t version = get_u32(is, "version");
  if (version != kVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  const uint32_t count = get_u32(is, "sample count");
  std::vector<Sample> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Sample s;
    const uint16_t id_len = get_u16(is, "id length");
    s.id.resize(id_len);
    if (id_len && !get_bytes(is, s.id.data(), id_len)) {
      throw CorruptError("truncated container: sample id");
    }
    s.label = get_f32(is, "label");
    for (Modality m : kAllModalities) {
      FeatureMatrix& f = s.features[size_t(index_of(m))];
      f.rows = int(get_u32(is, "sequence length"));
      f.cols = int(get_u32(is, "feature dim"));
      if (f.rows < 1 || f.cols < 1) {
        throw CorruptError("non-positive matrix dims in " + path.string());
      }
      f.v.resize(size_t(f.rows) * size_t(f.cols));
      for (float& x : f.v) x = get_f32(is, "feature value");
    }
    out.push_back(std::move(s));
  }
  // The header count is authoritative; trailing bytes mean a bad file.
  is.peek();
  if (!is.eof()) {
    throw CorruptError("container holds more data than header count " +
                       std::to_string(count) + ": " + path.string());
  }
  return out;
}

FeatureMatrix matrix_from_json(const json& arr, const char* modality) {
  if (!arr.is_array() || arr.empty() || !arr[0].is_array()) {
    throw SchemaError(std::string("jsonl: '") + modality +
                      "' must be a non-empty array of arrays");
  }
  FeatureMatrix f;
  f.rows = int(arr.size());
  f.cols = int(arr[0].size());
  f.v.reserve(size_t(f.rows) * size_t(f.cols));
  for (const auto& row : arr) {
    if (int(row.size()) != f.cols) {
      throw SchemaError(std::string("jsonl: ragged rows in '") + modality + "'");
    }
    for (const auto& x : row) f.v.push_back(x.get<float>());
  }
  return f;
}

std::vector<Sample> read_split_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  std::vector<Sample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Sample s;
    if (!j.contains("id") || !j.contains("label")) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                        ": sample needs 'id' and 'label'");
    }
    s.id = j["id"].get<std::string>();
    s.label = j["label"].get<float>();
    for (Modality m : kAllModalities) {
      const char* key = modality_name(m);
      if (!j.contains(key)) {
        throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                          ": missing modality '" + key + "'");
      }
      s.features[size_t(index_of(m))] = matrix_from_json(j[key], key);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Pad with trailing zero rows or drop the tail to reach `len` rows.
void fit_rows(FeatureMatrix& f, int len) {
  if (f.rows == len) return;
  f.v.resize(size_t(len) * size_t(f.cols), 0.0f);
  f.rows = len;
}

}  // namespace

Tensor FeatureMatrix::to_tensor() const {
  Tensor t({rows, cols});
  for (size_t i = 0; i < v.size(); ++i) t[int64_t(i)] = double(v[i]);
  return t;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

const std::vector<Sample>& Dataset::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    case Split::Test: return test;
  }
  throw Error("bad split");
}

std::vector<Sample>& Dataset::split(Split s) {
  switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    case Split::Test: return test;
  }
  throw Error("bad split");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_train < 1 || spec.n_valid < 1 || spec.n_test < 1) {
    throw Error("gen_synthetic: every split needs at least one sample");
  }
  if (spec.language_snr < 0.0 || spec.other_snr < 0.0) {
    throw Error("gen_synthetic: snr values must be >= 0");
  }
  for (Modality m : kAllModalities) {
    if (spec.dims.seq(m) < 1 || spec.dims.feat(m) < 1) {
      throw Error(std::string("gen_synthetic: zero-dimensional modality ") +
                  modality_name(m));
    }
  }

  Rng rng(mix_seed(spec.seed, 0x5d1fda7aULL));

  // Fixed unit direction per modality: the linear subspace carrying the label.
  std::array<std::vector<double>, 3> dir;
  for (Modality m : kAllModalities) {
    auto& b = dir[size_t(index_of(m))];
    b.resize(size_t(spec.dims.feat(m)));
    double norm2 = 0.0;
    for (auto& x : b) {
      x = rng.normal();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : b) x *= inv;
  }

  Dataset ds;
  ds.dims = spec.dims;
  const std::array<int, 3> counts = {spec.n_train, spec.n_valid, spec.n_test};
  for (Split sp : kAllSplits) {
    auto& samples = ds.split(sp);
    const int n = counts[size_t(sp)];
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.id = std::string(split_name(sp)) + "_" + std::to_string(i);
      const double label = rng.uniform(-3.0, 3.0);
      s.label = float(label);
      for (Modality m : kAllModalities) {
        const double snr = m == Modality::Language ? spec.language_snr : spec.other_snr;
        FeatureMatrix& f = s.features[size_t(index_of(m))];
        f.rows = spec.dims.seq(m);
        f.cols = spec.dims.feat(m);
        f.v.resize(size_t(f.rows) * size_t(f.cols));
        const auto& b = dir[size_t(index_of(m))];
        for (int r = 0; r < f.rows; ++r) {
          for (int c = 0; c < f.cols; ++c) {
            f.at(r, c) = float(snr * (label / 3.0) * b[size_t(c)] + rng.normal());
          }
        }
      }
      samples.push_back(std::move(s));
    }
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  ordered_json meta;
  meta["format"] = 1;
  meta["label_range"] = {-3.0, 3.0};
  for (Modality m : kAllModalities) {
    meta["modalities"][modality_name(m)] = {{"seq_len", ds.dims.seq(m)},
                                            {"feat_dim", ds.dims.feat(m)}};
  }
  for (Split sp : kAllSplits) {
    meta["splits"][split_name(sp)] = std::string(split_name(sp)) + ".dlf";
  }
  std::ofstream os(dir / "meta.json");
  if (!os) throw IoError("cannot write meta.json in " + dir.string());
  os << meta.dump(2) << "\n";
  for (Split sp : kAllSplits) {
    write_split(ds.split(sp), dir / (std::string(split_name(sp)) + ".dlf"));
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream is(meta_path);
  if (!is) throw IoError("cannot open " + meta_path.string());
  json meta;
  try {
    is >> meta;
  } catch (const json::exception& e) {
    throw FormatError("meta.json: " + std::string(e.what()));
  }

  Dataset ds;
  if (!meta.contains("modalities")) throw SchemaError("meta.json: missing 'modalities'");
  for (Modality m : kAllModalities) {
    const char* key = modality_name(m);
    if (!meta["modalities"].contains(key)) {
      throw SchemaError(std::string("meta.json: missing modality '") + key + "'");
    }
    const auto& jm = meta["modalities"][key];
    ds.dims.seq_len[size_t(index_of(m))] = jm.at("seq_len").get<int>();
    ds.dims.feat_dim[size_t(index_of(m))] = jm.at("feat_dim").get<int>();
  }
  double lo = -3.0, hi = 3.0;
  if (meta.contains("label_range")) {
    lo = meta["label_range"][0].get<double>();
    hi = meta["label_range"][1].get<double>();
  }
  if (!meta.contains("splits")) throw SchemaError("meta.json: missing 'splits'");

  for (Split sp : kAllSplits) {
    const char* name = split_name(sp);
    if (!meta["splits"].contains(name)) {
      throw SchemaError(std::string("meta.json: missing split '") + name + "'");
    }
    const auto file = dir / meta["splits"][name].get<std::string>();
    std::vector<Sample> samples = file.extension() == ".jsonl"
                                      ? read_split_jsonl(file)
                                      : read_split_binary(file);
    for (Sample& s : samples) {
      for (Modality m : kAllModalities) {
        FeatureMatrix& f = s.features[size_t(index_of(m))];
        if (f.cols != ds.dims.feat(m)) {
          throw SchemaError(std::string("sample '") + s.id + "' " + modality_name(m) +
                            " feature dim " + std::to_string(f.cols) +
                            " does not match declared " +
                            std::to_string(ds.dims.feat(m)));
        }
        fit_rows(f, ds.dims.seq(m));
        for (float x : f.v) {
          if (!std::isfinite(x)) {
            throw CorruptError("non-finite feature in sample '" + s.id + "'");
          }
        }
      }
      if (s.label < lo || s.label > hi) {
        s.label = float(std::clamp(double(s.label), lo, hi));
        ++ds.clamped_label_count;
      }
    }
    ds.split(sp) = std::move(samples);
  }
  return ds;
}

FeatureMatrix Batch::sample_matrix(int b, Modality m) const {
  FeatureMatrix f;
  f.rows = dims.seq(m);
  f.cols = dims.feat(m);
  const auto& src = features[size_t(index_of(m))];
  const size_t stride = size_t(f.rows) * size_t(f.cols);
  f.v.assign(src.begin() + long(stride) * b, src.begin() + long(stride) * (b + 1));
  return f;
}

std::vector<Batch> make_batches(std::span<const Sample> samples, const DataDims& dims,
                                int batch_size, uint64_t seed, bool shuffle) {
  if (samples.empty()) throw Error("make_batches: empty split");
  if (batch_size < 1) throw Error("make_batches: batch_size must be >= 1");

  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  if (shuffle) {
    Rng rng(mix_seed(seed, 0xba7cULL));
    for (int i = int(order.size()) - 1; i > 0; --i) {
      std::swap(order[size_t(i)], order[size_t(rng.uniform_int(i + 1))]);
    }
  }

  std::vector<Batch> out;
  for (size_t start = 0; start < order.size(); start += size_t(batch_size)) {
    const size_t end = std::min(order.size(), start + size_t(batch_size));
    Batch b;
    b.batch_size = int(end - start);
    b.dims = dims;
    for (size_t k = start; k < end; ++k) {
      const Sample& s = samples[size_t(order[k])];
      b.labels.push_back(double(s.label));
      b.ids.push_back(s.id);
      for (Modality m : kAllModalities) {
        const FeatureMatrix& f = s.features[size_t(index_of(m))];
        if (f.rows != dims.seq(m) || f.cols != dims.feat(m)) {
          throw ShapeError("sample '" + s.id + "' does not match dataset dims");
        }
        auto& dst = b.features[size_t(index_of(m))];
        dst.insert(dst.end(), f.v.begin(), f.v.end());
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace dlf
