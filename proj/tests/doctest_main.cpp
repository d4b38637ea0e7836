#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "dlf/common.hpp"

// Numeric oracle tests run in 64-bit mode; cases that exercise the 32-bit
// path flip the mode themselves with PrecisionGuard.
int main(int argc, char** argv) {
  dlf::set_precision(dlf::Precision::Bits64);
  return doctest::Context(argc, argv).run();
}
