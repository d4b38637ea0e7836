#include <doctest.h>

#include <cmath>

#include "dlf/tape.hpp"

using namespace dlf;

TEST_CASE("softmax of equal scores is uniform") {
  Tape t;
  ValueId x = t.constant(Tensor::row({0.0, 0.0}));
  ValueId y = t.softmax_rows(x);
  CHECK(t.value(y).at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.value(y).at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> vals(6);
    for (auto& v : vals) v = rng.normal();
    std::vector<double> shifted = vals;
    const double c = rng.uniform(-5.0, 5.0);
    for (auto& v : shifted) v += c;
    Tape t;
    ValueId a = t.softmax_rows(t.constant(Tensor::matrix(2, 3, vals)));
    ValueId b = t.softmax_rows(t.constant(Tensor::matrix(2, 3, shifted)));
    CHECK(max_abs_diff(t.value(a), t.value(b)) < 1e-12);
  }
}

TEST_CASE("softmax([ln 2, 0]) = [2/3, 1/3]") {
  Tape t;
  ValueId y = t.softmax_rows(t.constant(Tensor::row({std::log(2.0), 0.0})));
  CHECK(t.value(y).at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.value(y).at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows are probability distributions") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> vals(12);
    for (auto& v : vals) v = rng.normal() * 4.0;
    Tape t;
    ValueId y = t.softmax_rows(t.constant(Tensor::matrix(3, 4, vals)));
    const Tensor& out = t.value(y);
    for (int i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) {
        CHECK(out.at(i, j) >= 0.0);
        sum += out.at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("layer norm of a constant row is the bias") {
  Tape t;
  ValueId x = t.constant(Tensor::matrix(2, 3, {5.0, 5.0, 5.0, -1.0, -1.0, -1.0}));
  ValueId gain = t.constant(Tensor::row({2.0, 3.0, 4.0}));

  SUBCASE("zero bias gives zero") {
    ValueId bias = t.constant(Tensor::row({0.0, 0.0, 0.0}));
    ValueId y = t.layer_norm(x, gain, bias);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j) CHECK(t.value(y).at(i, j) == 0.0);
  }
  SUBCASE("bias vector is returned verbatim") {
    ValueId bias = t.constant(Tensor::row({0.5, -0.5, 1.5}));
    ValueId y = t.layer_norm(x, gain, bias);
    for (int i = 0; i < 2; ++i) {
      CHECK(t.value(y).at(i, 0) == 0.5);
      CHECK(t.value(y).at(i, 1) == -0.5);
      CHECK(t.value(y).at(i, 2) == 1.5);
    }
  }
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  Tape t;
  ValueId a = t.constant(Tensor({2, 3}));
  ValueId b = t.constant(Tensor({4, 5}));
  CHECK_THROWS_WITH_AS(t.matmul(a, b),
                       "matmul: inner dimensions disagree (2x3) vs (4x5)", ShapeError);
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
}

TEST_CASE("non-finite input is a hard numeric error") {
  Tape t;
  CHECK_THROWS_AS(t.constant(Tensor::row({std::nan("")})), NumericError);
  ValueId a = t.constant(Tensor::row({1e308}));
  ValueId b = t.constant(Tensor::row({1e308}));
  CHECK_THROWS_AS(t.add(a, b), NumericError);  // overflow to inf
}

TEST_CASE("conv1d with k=1 acts per time step") {
  Tape t;
  // weight [[2]], input [[3],[5]] -> [[6],[10]]
  ValueId x = t.constant(Tensor::matrix(2, 1, {3.0, 5.0}));
  ValueId w = t.constant(Tensor::matrix(1, 1, {2.0}));
  ValueId b = t.constant(Tensor::row({0.0}));
  ValueId y = t.conv1d_same(x, w, b, 1);
  CHECK(t.value(y).at(0, 0) == 6.0);
  CHECK(t.value(y).at(1, 0) == 10.0);
}

TEST_CASE("conv1d identity weight passes input through") {
  Tape t;
  ValueId x = t.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  ValueId w = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  ValueId b = t.constant(Tensor::row({0.0, 0.0}));
  ValueId y = t.conv1d_same(x, w, b, 1);
  CHECK(max_abs_diff(t.value(y), t.value(x)) == 0.0);
}

TEST_CASE("conv1d k=3 zero-pads the boundary") {
  // y_i = w0*x[i-1] + w1*x[i] + w2*x[i+1], zeros outside.
  Tape t;
  ValueId x = t.constant(Tensor::matrix(3, 1, {1.0, 2.0, 3.0}));
  ValueId w = t.constant(Tensor::matrix(3, 1, {10.0, 1.0, 0.1}));
  ValueId b = t.constant(Tensor::row({0.0}));
  ValueId y = t.conv1d_same(x, w, b, 3);
  CHECK(t.value(y).at(0, 0) == doctest::Approx(1.0 + 0.2).epsilon(1e-12));
  CHECK(t.value(y).at(1, 0) == doctest::Approx(10.0 + 2.0 + 0.3).epsilon(1e-12));
  CHECK(t.value(y).at(2, 0) == doctest::Approx(20.0 + 3.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity basics") {
  Tape t;
  SUBCASE("orthogonal vectors") {
    ValueId c = t.cosine_similarity(t.constant(Tensor::row({1, 0})),
                                    t.constant(Tensor::row({0, 1})));
    CHECK(t.value(c).item() == 0.0);
  }
  SUBCASE("parallel vectors") {
    ValueId c = t.cosine_similarity(t.constant(Tensor::row({1, 1})),
                                    t.constant(Tensor::row({2, 2})));
    CHECK(t.value(c).item() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero norm yields 0, not an error") {
    ValueId c = t.cosine_similarity(t.constant(Tensor::row({0, 0})),
                                    t.constant(Tensor::row({1, 2})));
    CHECK(t.value(c).item() == 0.0);
  }
}

TEST_CASE("concat and slice round-trip") {
  Tape t;
  ValueId a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  ValueId b = t.constant(Tensor::matrix(2, 1, {5, 6}));
  std::vector<ValueId> parts = {a, b};
  ValueId c = t.concat_cols(parts);
  CHECK(t.value(c).rows() == 2);
  CHECK(t.value(c).cols() == 3);
  ValueId back = t.slice_cols(c, 0, 2);
  CHECK(max_abs_diff(t.value(back), t.value(a)) == 0.0);

  std::vector<ValueId> rows = {a, a};
  ValueId r = t.concat_rows(rows);
  CHECK(t.value(r).rows() == 4);
}

TEST_CASE("mean and sum reductions") {
  Tape t;
  ValueId a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 6}));
  CHECK(t.value(t.mean_all(a)).item() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(t.value(t.sum_all(a)).item() == doctest::Approx(12.0).epsilon(1e-12));
  ValueId m = t.mean_rows(a);
  CHECK(t.value(m).at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t.value(m).at(0, 1) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("32-bit mode rounds primitive outputs through float") {
  PrecisionGuard guard(Precision::Bits32);
  Tape t;
  ValueId a = t.constant(Tensor::row({0.1}));
  ValueId b = t.constant(Tensor::row({0.2}));
  const double sum = t.value(t.add(a, b)).item();
  CHECK(sum == double(float(0.1 + 0.2)));
  CHECK(sum != 0.1 + 0.2);
}
