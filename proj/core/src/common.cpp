#include "dlf/common.hpp"

#include <cctype>
#include <cmath>

namespace dlf {

namespace {
Precision g_precision = Precision::Bits32;
}

Precision precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Language: return "language";
    case Modality::Vision: return "vision";
    case Modality::Audio: return "audio";
  }
  return "?";
}

char modality_letter(Modality m) {
  switch (m) {
    case Modality::Language: return 'L';
    case Modality::Vision: return 'V';
    case Modality::Audio: return 'A';
  }
  return '?';
}

ModalitySet ModalitySet::parse(std::string_view text) {
  ModalitySet s;
  for (char c : text) {
    Modality m;
    switch (std::toupper(static_cast<unsigned char>(c))) {
      case 'L': m = Modality::Language; break;
      case 'V': m = Modality::Vision; break;
      case 'A': m = Modality::Audio; break;
      default:
        throw ConfigError("modalities: unknown letter '" + std::string(1, c) +
                          "' (expected a subset of \"LVA\")");
    }
    if (s.contains(m)) {
      throw ConfigError("modalities: duplicate letter '" + std::string(1, c) + "'");
    }
    s.add(m);
  }
  if (s.empty()) throw ConfigError("modalities: at least one of L, V, A is required");
  return s;
}

int ModalitySet::count() const {
  int n = 0;
  for (Modality m : kAllModalities) n += contains(m) ? 1 : 0;
  return n;
}

Modality ModalitySet::anchor() const {
  for (Modality m : kAllModalities) {
    if (contains(m)) return m;
  }
  throw Error("ModalitySet::anchor on empty set");
}

std::vector<Modality> ModalitySet::list() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

std::string ModalitySet::to_string() const {
  std::string out;
  for (Modality m : kAllModalities) {
    if (contains(m)) out.push_back(modality_letter(m));
  }
  return out;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw Error("Rng::uniform_int: n must be positive");
  return int(next_u64() % uint64_t(n));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

uint64_t mix_seed(uint64_t base, uint64_t salt, uint64_t a, uint64_t b) {
  auto splitmix = [](uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  uint64_t h = splitmix(base);
  h = splitmix(h ^ salt);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  return h;
}

}  // namespace dlf
