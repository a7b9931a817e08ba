#include <gtest/gtest.h>

#include "fgdfpn/ops.hpp"
#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

using namespace fgdfpn;

TEST(Shape, BasicsAndValidation) {
  Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.rank(), 4);
  EXPECT_EQ(s.numel(), 120);
  EXPECT_EQ(s.n(), 2);
  EXPECT_EQ(s.w(), 5);
  EXPECT_EQ(s.str(), "(2,3,4,5)");
  EXPECT_THROW((Shape{2, 0, 4}), std::invalid_argument);
  EXPECT_EQ(Shape{}.numel(), 1);
}

TEST(Tensor, InvariantProductShapeEqualsDataLength) {
  Tensor<float> t(Shape{2, 2});
  EXPECT_EQ(t.numel(), 4);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, {1.f, 2.f, 3.f}), std::invalid_argument);
}

TEST(Tensor, Rank4IndexingIsRowMajorWidthFastest) {
  Tensor<float> t(Shape{1, 2, 3, 4});
  t.at(0, 1, 2, 3) = 7.f;
  EXPECT_EQ(t[1 * 12 + 2 * 4 + 3], 7.f);
}

TEST(Rng, DeterministicAndStateRestorable) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  auto st = a.state();
  double x = a.uniform();
  Rng c(7);
  c.set_state(st);
  EXPECT_EQ(c.uniform(), x);
  Rng d(43);
  EXPECT_NE(d.next_u64(), b.next_u64());
}

TEST(Rng, UniformBounds) {
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
    EXPECT_LT(r.below(17), 17u);
  }
}

TEST(Tape, SumBackwardGivesOnes) {
  Tape<double> tape;
  Parameter<double> p("p", Tensor<double>(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  Var<double> loss = sum_all(tape, p.var);
  tape.backward(loss);
  for (int64_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(p.grad()[i], 1.0);
}

TEST(Tape, QuadraticBackwardGivesTwoP) {
  Tape<double> tape;
  Parameter<double> p("p", Tensor<double>(Shape{4}, {1, -2, 3, 0.5}));
  Var<double> loss = sum_all(tape, mul(tape, p.var, p.var));
  tape.backward(loss);
  for (int64_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p.grad()[i], 2.0 * p.value()[i]);
}

TEST(Tape, NonScalarLossRejected) {
  Tape<double> tape;
  Parameter<double> p("p", Tensor<double>(Shape{2}, {1, 2}));
  Var<double> y = mul(tape, p.var, p.var);
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
}

TEST(Tape, SecondBackwardOnSameTapeIsError) {
  Tape<double> tape;
  Parameter<double> p("p", Tensor<double>(Shape{2}, {1, 2}));
  Var<double> loss = sum_all(tape, p.var);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), std::logic_error);
}

TEST(Tape, UnreachableParameterKeepsZeroGrad) {
  Tape<double> tape;
  Parameter<double> p("p", Tensor<double>(Shape{2}, {1, 2}));
  Parameter<double> q("q", Tensor<double>(Shape{2}, {3, 4}));
  Var<double> loss = sum_all(tape, p.var);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(q.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(q.grad()[1], 0.0);
}

TEST(Tape, GradAccumulatesAcrossTapes) {
  Parameter<double> p("p", Tensor<double>(Shape{2}, {1, 2}));
  for (int rep = 0; rep < 2; ++rep) {
    Tape<double> tape;
    tape.backward(sum_all(tape, p.var));
  }
  EXPECT_DOUBLE_EQ(p.grad()[0], 2.0);
  p.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Tape, NonRecordingTapeTracksNothing) {
  Tape<float> tape(false);
  Parameter<float> p("p", Tensor<float>(Shape{2}, {1, 2}));
  Var<float> y = mul(tape, p.var, p.var);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}
