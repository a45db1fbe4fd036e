#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "cmig/autodiff/adam.hpp"
#include "cmig/autodiff/checkpoint.hpp"
#include "cmig/autodiff/grad_check.hpp"
#include "cmig/autodiff/value.hpp"
#include "cmig/errors.hpp"

using namespace cmig;
using ad::Value;

namespace {

Value random_param(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Value::parameter({r, c}, v);
}

ad::GradCheckReport check(const std::function<Value()>& f, std::vector<Value> inputs) {
  return ad::grad_check(f, inputs);
}

}  // namespace

TEST(Value, DataLengthMustMatchShape) {
  EXPECT_THROW(Value::matrix(2, 2, {1, 2, 3}), ContractViolation);
  EXPECT_EQ(Value::zeros(3, 4).size(), 12u);
}

TEST(Value, MatmulShapeContract) {
  const Value a = Value::full(2, 3, 1.0), b = Value::full(3, 4, 2.0);
  const Value c = ad::matmul(a, b);
  EXPECT_EQ(c.rows(), 2u);
  EXPECT_EQ(c.cols(), 4u);
  EXPECT_DOUBLE_EQ(c(1, 3), 6.0);
}

TEST(Value, ShapeMismatchNamesBothShapes) {
  try {
    ad::matmul(Value::zeros(2, 3), Value::zeros(2, 3));
    FAIL() << "expected a contract violation";
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Value, SoftmaxOfZerosIsUniform) {
  const Value s = ad::softmax(Value::zeros(1, 3));
  for (double x : s.data()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(Value, GatherIdentityPermutation) {
  const Value a = random_param(4, 3, 1);
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const Value g = ad::gather_rows(a, idx);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(g.data()[i], a.data()[i]);
}

TEST(Value, LogOfNonPositiveIsDomainError) {
  EXPECT_THROW(ad::log(Value::matrix(1, 2, {1.0, 0.0})), DomainError);
  EXPECT_THROW(ad::log(Value::matrix(1, 1, {-2.0})), DomainError);
}

TEST(Backward, SquareAtThree) {
  Value x = Value::parameter({1, 1}, {3.0});
  ad::backward(ad::square(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Value x = random_param(1, 6, 2);
  ad::backward(ad::sum_all(ad::softmax(x)));
  for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, L2NormGradientIsUnitVector) {
  Value x = random_param(1, 5, 3);
  ad::backward(ad::l2norm(x, 1));
  double n = 0.0;
  for (double v : x.data()) n += v * v;
  n = std::sqrt(n);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x.grad()[i], x.data()[i] / n, 1e-14);
}

TEST(Backward, L2NormAtZeroHasZeroGradient) {
  Value x = Value::parameter({1, 3}, {0.0, 0.0, 0.0});
  ad::backward(ad::l2norm(x, 1));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, NonScalarRootIsRejected) {
  Value x = random_param(2, 2, 4);
  EXPECT_THROW(ad::backward(ad::square(x)), ContractViolation);
}

TEST(Backward, SecondCallAccumulates) {
  Value x = Value::parameter({1, 1}, {2.0});
  const Value y = ad::square(x);
  ad::backward(y);
  ad::backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  ad::backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Backward, SharedSubexpressionSumsAllPaths) {
  // f = a*b + a*c + (a*b)*c over scalars; every path from f to a is
  // enumerated by hand: df/da = b + c + b*c.
  Value a = Value::parameter({1, 1}, {0.7});
  Value b = Value::parameter({1, 1}, {-1.3});
  Value c = Value::parameter({1, 1}, {2.1});
  const Value ab = ad::mul(a, b);
  const Value f = ad::add(ad::add(ab, ad::mul(a, c)), ad::mul(ab, c));
  ad::backward(f);
  EXPECT_NEAR(a.grad()[0], -1.3 + 2.1 + (-1.3 * 2.1), 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.7 + 0.7 * 2.1, 1e-15);
  EXPECT_NEAR(c.grad()[0], 0.7 + 0.7 * -1.3, 1e-15);
}

TEST(Backward, MaxTieRoutesToLowestIndex) {
  Value x = Value::parameter({1, 4}, {1.0, 3.0, 3.0, 2.0});
  ad::backward(ad::sum_all(ad::max_reduce(x, 1)));
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
  EXPECT_EQ(ad::argmax(x, 1)[0], 1u);
}

TEST(Backward, GatherScatterAddsRepeatedRows) {
  Value x = random_param(3, 2, 5);
  const std::vector<std::size_t> idx = {2, 0, 2};
  ad::backward(ad::sum_all(ad::gather_rows(x, idx)));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
  EXPECT_EQ(x.grad()[4], 2.0);
}

TEST(Backward, ConstantsGetNoGradient) {
  Value x = random_param(2, 2, 6);
  const Value k = Value::full(2, 2, 3.0);
  ad::backward(ad::sum_all(ad::mul(x, k)));
  EXPECT_FALSE(k.has_grad());
  EXPECT_TRUE(x.has_grad());
}

TEST(Backward, DetachStopsGradient) {
  Value x = Value::parameter({1, 1}, {2.0});
  ad::backward(ad::add(ad::square(x), ad::square(x.detach())));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(GradCheck, SumOfSquaresIsExact) {
  Value x = random_param(3, 4, 7);
  const auto r = check([&] { return ad::sum_all(ad::square(x)); }, {x});
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.probed, 12u);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  Value x = random_param(1, 3, 8, 0.5, 1.0);
  auto broken = [&] {
    auto node = std::make_shared<ad::Node>();
    node->shape = {1, 1};
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    node->data = {s};
    node->parents = {x.ptr()};
    node->requires_grad = true;
    node->backward_fn = [](ad::Node& self) {
      auto& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += self.grad[0] * 3.0 * p.data[i];
    };
    return Value(node);
  };
  const auto r = check(broken, {x});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, NondeterministicFunctionIsRejected) {
  Value x = random_param(1, 2, 9);
  int calls = 0;
  auto f = [&] { return ad::add_scalar(ad::sum_all(x), 1e-3 * ++calls); };
  EXPECT_THROW(check(f, {x}), ContractViolation);
}

TEST(GradCheck, KeepsPerElementTable) {
  Value x = random_param(2, 2, 10);
  ad::GradCheckOptions o;
  o.keep_table = true;
  std::vector<Value> in = {x};
  const auto r = ad::grad_check([&] { return ad::sum_all(ad::exp(x)); }, in, o);
  ASSERT_TRUE(r.per_element_table.has_value());
  ASSERT_EQ(r.per_element_table->size(), 4u);
  for (const auto& e : *r.per_element_table) EXPECT_NEAR(e.analytic, std::exp(x.data()[e.index]), 1e-12);
}

// Every primitive against central differences on inputs in [-1, 1]. Kinks
// (relu, clamp, max) are kept away from the probe step by construction.
TEST(GradCheck, Primitives) {
  Value a = random_param(3, 4, 11), b = random_param(4, 2, 12), c = random_param(3, 4, 13);
  Value row = random_param(1, 4, 14), pos = random_param(3, 4, 15, 0.2, 1.0);
  const std::vector<std::size_t> rows = {2, 0, 1, 2};
  const std::vector<std::size_t> flat = {0, 5, 11, 5};
  struct Case {
    const char* name;
    std::function<Value()> f;
    std::vector<Value> in;
  };
  const std::vector<Case> cases = {
      {"matmul", [&] { return ad::sum_all(ad::square(ad::matmul(a, b))); }, {a, b}},
      {"transpose", [&] { return ad::sum_all(ad::mul(ad::transpose(a), ad::transpose(c))); }, {a, c}},
      {"reshape", [&] { return ad::sum_all(ad::square(ad::matmul(ad::reshape(a, 2, 6), ad::reshape(c, 6, 2)))); }, {a, c}},
      {"add_broadcast", [&] { return ad::sum_all(ad::square(ad::add(a, row))); }, {a, row}},
      {"sub", [&] { return ad::sum_all(ad::square(ad::sub(a, c))); }, {a, c}},
      {"mul", [&] { return ad::sum_all(ad::mul(ad::mul(a, c), a)); }, {a, c}},
      {"div", [&] { return ad::sum_all(ad::div(a, pos)); }, {a, pos}},
      {"exp", [&] { return ad::sum_all(ad::exp(a)); }, {a}},
      {"log", [&] { return ad::sum_all(ad::log(pos)); }, {pos}},
      {"sigmoid", [&] { return ad::sum_all(ad::mul(ad::sigmoid(a), c)); }, {a, c}},
      {"leaky_relu", [&] { return ad::sum_all(ad::mul(ad::leaky_relu(a, 0.2), c)); }, {a, c}},
      {"relu", [&] { return ad::sum_all(ad::mul(ad::relu(a), c)); }, {a, c}},
      {"clamp", [&] { return ad::sum_all(ad::mul(ad::clamp(a, -0.5, 0.5), c)); }, {a, c}},
      {"broadcast_to", [&] { return ad::sum_all(ad::mul(ad::broadcast_to(row, 3, 4), c)); }, {row, c}},
      {"concat0", [&] { return ad::sum_all(ad::square(ad::concat({a, row}, 0))); }, {a, row}},
      {"concat1", [&] { return ad::sum_all(ad::exp(ad::concat({a, c}, 1))); }, {a, c}},
      {"gather_rows", [&] { return ad::sum_all(ad::square(ad::gather_rows(a, rows))); }, {a}},
      {"gather_elements", [&] { return ad::sum_all(ad::exp(ad::gather_elements(a, flat))); }, {a}},
      {"sum_axis", [&] { return ad::sum_all(ad::square(ad::add(ad::sum(a, 0), ad::sum(c, 0).detach()))); }, {a}},
      {"mean_axis", [&] { return ad::sum_all(ad::exp(ad::mean(a, 1))); }, {a}},
      {"max_reduce", [&] { return ad::sum_all(ad::square(ad::max_reduce(a, 0))); }, {a}},
      {"softmax", [&] { return ad::sum_all(ad::mul(ad::softmax(a, 1), c)); }, {a, c}},
      {"l2norm", [&] { return ad::sum_all(ad::l2norm(a, 1)); }, {a}},
      {"scale_neg", [&] { return ad::sum_all(ad::exp(ad::neg(ad::scale(ad::add_scalar(a, 0.3), 1.7)))); }, {a}},
  };
  for (const auto& cs : cases) {
    const auto r = check(cs.f, cs.in);
    EXPECT_TRUE(r.passed) << cs.name << " max_rel " << r.max_rel_error;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> g = {0.3, -7.0, 1e-3};
  ad::AdamState st;
  ad::adam_step(p, g, st, ad::AdamConfig{});
  // Bias-corrected step 1: m_hat = g, v_hat = g^2, so the move is
  // lr * g / (|g| + eps), i.e. lr * sign(g) up to eps.
  EXPECT_NEAR(p[0], 1.0 - 1e-4 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 1e-4 * 7.0 / (7.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[2], 0.5 - 1e-4 * 1e-3 / (1e-3 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> p = {1.0, 2.0};
  const std::vector<double> g = {0.0, 0.0};
  ad::AdamState st;
  ad::adam_step(p, g, st, ad::AdamConfig{});
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 2.0);
}

TEST(Adam, ShapeMismatchIsContractViolation) {
  std::vector<double> p = {1.0, 2.0};
  const std::vector<double> g = {0.0};
  ad::AdamState st;
  EXPECT_THROW(ad::adam_step(p, g, st, ad::AdamConfig{}), ContractViolation);
}

TEST(Adam, SecondStepMatchesHandRecursion) {
  std::vector<double> p = {0.0};
  ad::AdamState st;
  const ad::AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  const std::vector<double> g1 = {1.0}, g2 = {-0.5};
  ad::adam_step(p, g1, st, cfg);
  ad::adam_step(p, g2, st, cfg);
  double m = 0.1, v = 0.001;
  double x = -0.01 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  m = 0.9 * m + 0.1 * -0.5;
  v = 0.999 * v + 0.001 * 0.25;
  x -= 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p[0], x, 1e-15);
}

TEST(Schedule, HalvesAtMilestones) {
  const std::vector<std::size_t> ms = {50, 75};
  EXPECT_DOUBLE_EQ(ad::scheduled_lr(1e-4, 0, ms, 0.5), 1e-4);
  EXPECT_DOUBLE_EQ(ad::scheduled_lr(1e-4, 49, ms, 0.5), 1e-4);
  EXPECT_DOUBLE_EQ(ad::scheduled_lr(1e-4, 60, ms, 0.5), 5e-5);
  EXPECT_DOUBLE_EQ(ad::scheduled_lr(1e-4, 80, ms, 0.5), 2.5e-5);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::vector<ad::NamedTensor> in = {
      {"a.w", {2, 3}, {1.0, -0.0, 1e-310, 3.141592653589793, -7.5, 1e300}},
      {"scalar", {}, {42.0}},
      {"cube", {2, 1, 2}, {1, 2, 3, 4}},
  };
  const auto bytes = ad::encode_checkpoint(in);
  const auto out = ad::decode_checkpoint(bytes);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t t = 0; t < in.size(); ++t) {
    EXPECT_EQ(out[t].name, in[t].name);
    EXPECT_EQ(out[t].shape, in[t].shape);
    ASSERT_EQ(out[t].data.size(), in[t].data.size());
    EXPECT_EQ(std::memcmp(out[t].data.data(), in[t].data.data(), in[t].data.size() * 8), 0);
  }
}

TEST(Checkpoint, HeaderLayout) {
  const std::vector<ad::NamedTensor> one = {{"w", {1, 1}, {1.0}}};
  const auto bytes = ad::encode_checkpoint(one);
  // "CMIG", u32 1, u32 1, u16 1, "w", u8 2, u64 1, u64 1, f64 1.0
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 1 + 1 + 16 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CMIG");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 1);
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 2);
  EXPECT_EQ(bytes[bytes.size() - 1], 0x3f);  // 1.0 = 0x3ff0000000000000, little endian
  EXPECT_EQ(bytes[bytes.size() - 2], static_cast<std::uint8_t>(0xf0));
}

TEST(Checkpoint, CorruptInputIsParseError) {
  const std::vector<ad::NamedTensor> one = {{"w", {2}, {1.0, 2.0}}};
  auto bytes = ad::encode_checkpoint(one);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(ad::decode_checkpoint(bad_magic), ParseError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(ad::decode_checkpoint(truncated), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(ad::decode_checkpoint(trailing), ParseError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(ad::decode_checkpoint(version), ParseError);
}
