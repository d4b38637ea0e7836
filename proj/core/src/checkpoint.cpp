#include "dlf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace dlf {

namespace {

constexpr char kMagic[4] = {'D', 'L', 'F', 'C'};
constexpr uint32_t kVersion = 1;

void put_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  return size_t(is.gcount()) == n;
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!get_bytes(is, b, 2)) throw CorruptError("truncated checkpoint");
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) throw CorruptError("truncated checkpoint");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!get_bytes(is, b, 8)) throw CorruptError("truncated checkpoint");
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, uint32_t(store.all().size()));
  for (const auto& p : store.all()) {
    put_u16(os, uint16_t(p->name.size()));
    os.write(p->name.data(), std::streamsize(p->name.size()));
    const Shape& shape = p->value.shape();
    put_u32(os, uint32_t(shape.size()));
    for (int d : shape) put_u32(os, uint32_t(d));
    for (int64_t i = 0; i < p->value.size(); ++i) put_f64(os, p->value[i]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  if (!get_bytes(is, magic, 4)) throw FormatError("checkpoint too short for magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic in " + path.string() +
                      " (expected \"DLFC\")");
  }
  const uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = get_u32(is);
  if (count != store.all().size()) {
    throw CorruptError("checkpoint has " + std::to_string(count) +
                       " parameters, model has " + std::to_string(store.all().size()));
  }
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    if (name_len && !get_bytes(is, name.data(), name_len)) {
      throw CorruptError("truncated checkpoint");
    }
    const uint32_t rank = get_u32(is);
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = int(get_u32(is));
    Parameter* p = store.find(name);
    if (!p) throw CorruptError("checkpoint parameter '" + name + "' not in model");
    if (!seen.insert(name).second) {
      throw CorruptError("duplicate checkpoint parameter '" + name + "'");
    }
    if (p->value.shape() != shape) {
      throw CorruptError("shape mismatch for '" + name + "': checkpoint " +
                         shape_str(shape) + " vs model " +
                         shape_str(p->value.shape()));
    }
    for (int64_t k = 0; k < p->value.size(); ++k) p->value[k] = get_f64(is);
    p->value.round_to_precision();
  }
  is.peek();
  if (!is.eof()) throw CorruptError("checkpoint holds trailing data");
}

}  // namespace dlf
