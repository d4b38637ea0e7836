#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dlf {

// ---------------------------------------------------------------------------
// Error hierarchy. Every failure surfaces as one of these so callers (and the
// CLI exit-code map) can distinguish usage, format and numeric problems.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for a primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A primitive produced NaN/Inf, or numeric preconditions were violated.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad magic bytes / unsupported container version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally valid header but inconsistent payload (truncated, wrong counts).
class CorruptError : public Error {
 public:
  using Error::Error;
};

// Required field/modality missing from a dataset description.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite training loss; carries the offending epoch/batch in the message.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Global precision mode. Storage is always double; in Bits32 mode every
// primitive output is rounded through IEEE single precision, which emulates a
// float32 pipeline deterministically. Gradient checking requires Bits64.
// ---------------------------------------------------------------------------

enum class Precision { Bits32, Bits64 };

Precision precision();
void set_precision(Precision p);

// RAII guard for tests that flip the mode.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(Precision p) : saved_(precision()) { set_precision(p); }
  ~PrecisionGuard() { set_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  Precision saved_;
};

// ---------------------------------------------------------------------------
// Modalities. Order (L, V, A) is fixed everywhere: file formats, fusion
// concatenation, iteration.
// ---------------------------------------------------------------------------

enum class Modality : int { Language = 0, Vision = 1, Audio = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {
    Modality::Language, Modality::Vision, Modality::Audio};

constexpr int index_of(Modality m) { return static_cast<int>(m); }
const char* modality_name(Modality m);   // "language", "vision", "audio"
char modality_letter(Modality m);        // 'L', 'V', 'A'

// A subset of the three modalities, iterated in (L, V, A) order.
class ModalitySet {
 public:
  ModalitySet() = default;
  static ModalitySet all() {
    ModalitySet s;
    s.bits_ = 0b111;
    return s;
  }
  // Parses strings like "LVA", "L", "la". Throws ConfigError on anything else.
  static ModalitySet parse(std::string_view text);

  void add(Modality m) { bits_ |= uint8_t(1u << index_of(m)); }
  bool contains(Modality m) const { return (bits_ >> index_of(m)) & 1u; }
  int count() const;
  bool empty() const { return bits_ == 0; }

  // The modality that anchors attention queries: language when present,
  // otherwise the first present modality in (L, V, A) order.
  Modality anchor() const;

  std::vector<Modality> list() const;
  std::string to_string() const;  // canonical subset of "LVA"

  friend bool operator==(ModalitySet a, ModalitySet b) { return a.bits_ == b.bits_; }

 private:
  uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. Transforms are hand-rolled on top of mt19937_64 so that
// streams are reproducible regardless of standard-library distribution
// implementations.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  int uniform_int(int n);
  // Standard normal via Box-Muller (cached spare kept for determinism).
  double normal();

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable seed derivation for independent streams (splitmix64 mixing).
uint64_t mix_seed(uint64_t base, uint64_t salt, uint64_t a = 0, uint64_t b = 0);

}  // namespace dlf
