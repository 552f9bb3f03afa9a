#include "gart/tensor.hpp"

#include <gtest/gtest.h>

#include "gart/fdcheck.hpp"
#include "gart/ops.hpp"
#include "gart/rng.hpp"

namespace gart {
namespace {

Tensor64 random_tensor(Rng& rng, const Shape& s, double scale = 1.0,
                       double offset = 0.0) {
  std::vector<double> v((size_t)shape_numel(s));
  for (auto& x : v) x = rng.gaussian() * scale + offset;
  return Tensor64::from_data(s, v);
}

// Weighted-sum functional keeps per-coordinate gradients well away from
// zero so the fd relative-error metric is meaningful.
Tensor64 weighted_sum(const Tensor64& x, const Tensor64& w) {
  return sum_all(mul(x, w));
}

TEST(TensorCore, FactoryAndItem) {
  auto z = Tensor64::zeros({2, 3});
  EXPECT_EQ(z.numel(), 6);
  EXPECT_EQ(z.rank(), 2);
  auto s = Tensor64::scalar(4.25);
  EXPECT_EQ(s.item(), 4.25);
  EXPECT_THROW(z.item(), ContractError);
  EXPECT_THROW(Tensor64::from_data({2, 2}, {1.0, 2.0, 3.0}), ContractError);
}

TEST(TensorCore, BackwardRequiresScalar) {
  auto x = Tensor64::zeros({3});
  x.set_requires_grad(true);
  auto y = add(x, x);
  EXPECT_THROW(backward(y), ContractError);
}

TEST(TensorCore, BackwardTwiceAccumulatesLeafGrads) {
  auto x = Tensor64::from_data({2}, {3.0, 4.0});
  x.set_requires_grad(true);
  auto loss = sum_all(mul(x, x));
  backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
  backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 16.0);
  x.zero_grad();
  backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(TensorCore, SharedSubexpressionGradient) {
  // f(x) = sum((x + x) * x) = 2 * sum(x^2), df/dx = 4x.
  auto x = Tensor64::from_data({3}, {1.0, -2.0, 0.5});
  x.set_requires_grad(true);
  backward(sum_all(mul(add(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -8.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 2.0);
}

TEST(TensorCore, MatmulForwardFrozen) {
  auto a = Tensor64::from_data({2, 2}, {1, 2, 3, 4});
  auto b = Tensor64::from_data({2, 2}, {5, 6, 7, 8});
  auto c = matmul(a, b);
  EXPECT_EQ(c.data()[0], 19);
  EXPECT_EQ(c.data()[1], 22);
  EXPECT_EQ(c.data()[2], 43);
  EXPECT_EQ(c.data()[3], 50);
  EXPECT_THROW(matmul(a, Tensor64::zeros({3, 2})), ContractError);
}

TEST(TensorCore, DeterministicReplay) {
  for (int trial = 0; trial < 2; ++trial) {
    Rng rng(2024);
    auto x = random_tensor(rng, {4, 4});
    x.set_requires_grad(true);
    auto y = softmax_lastdim(matmul(x, transpose2d(x)));
    auto loss = sum_all(mul(y, y));
    backward(loss);
    static std::vector<double> first_loss, first_grad;
    if (trial == 0) {
      first_loss = loss.vec();
      first_grad = x.grad();
    } else {
      EXPECT_EQ(loss.vec(), first_loss);
      EXPECT_EQ(x.grad(), first_grad);
    }
  }
}

TEST(TensorGrad, FdCheckRejectsZeroStep) {
  auto x = Tensor64::from_data({1}, {1.0});
  EXPECT_THROW(
      fd_check([](const Tensor64& t) { return sum_all(t); }, x, 0.0),
      ContractError);
}

struct UnaryCase {
  const char* name;
  std::function<Tensor64(const Tensor64&)> op;
  double offset;  // shifts samples into the op's domain
  double scale;
};

TEST(TensorGrad, UnaryOpsVsFiniteDifferences) {
  const UnaryCase cases[] = {
      {"exp", [](const Tensor64& x) { return exp_t(x); }, 0.0, 1.0},
      {"log", [](const Tensor64& x) { return log_t(x); }, 3.0, 0.5},
      {"sqrt", [](const Tensor64& x) { return sqrt_t(x); }, 4.0, 0.5},
      {"abs", [](const Tensor64& x) { return abs_t(x); }, 2.0, 0.25},
      {"gelu", [](const Tensor64& x) { return gelu(x); }, 0.0, 1.5},
      {"neg", [](const Tensor64& x) { return neg(x); }, 0.0, 1.0},
      {"acos", [](const Tensor64& x) { return acos_clamped(x); }, 0.0, 0.4},
      {"clamp_min",
       [](const Tensor64& x) { return clamp_min(x, -0.9); }, 1.0, 0.3},
      {"mul_const",
       [](const Tensor64& x) { return mul_const(x, -2.5); }, 0.0, 1.0},
      {"add_const",
       [](const Tensor64& x) { return add_const(x, 1.5); }, 0.0, 1.0},
      {"softmax",
       [](const Tensor64& x) { return softmax_lastdim(x); }, 0.0, 1.0},
  };
  Rng rng(31337);
  for (const auto& c : cases) {
    for (int inst = 0; inst < 20; ++inst) {
      auto x = random_tensor(rng, {6}, c.scale, c.offset);
      auto w = random_tensor(rng, {6}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) { return weighted_sum(c.op(t), w); };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6) << c.name << " inst " << inst;
    }
  }
}

TEST(TensorGrad, BinaryOpsVsFiniteDifferences) {
  Rng rng(555);
  for (int inst = 0; inst < 20; ++inst) {
    auto a = random_tensor(rng, {5}, 1.0, 0.0);
    auto b = random_tensor(rng, {5}, 0.5, 3.0);  // away from zero for div
    auto w = random_tensor(rng, {5}, 1.0, 2.0);
    for (int which = 0; which < 2; ++which) {
      auto fa = [&](const Tensor64& t) {
        return weighted_sum(which ? div(t, b) : mul(t, b), w);
      };
      EXPECT_LT(fd_check(fa, a, 1e-6), 1e-6) << "lhs which=" << which;
      auto fb = [&](const Tensor64& t) {
        return weighted_sum(which ? div(a, t) : mul(a, t), w);
      };
      EXPECT_LT(fd_check(fb, b, 1e-6), 1e-6) << "rhs which=" << which;
    }
    auto fadd = [&](const Tensor64& t) { return weighted_sum(add(t, b), w); };
    EXPECT_LT(fd_check(fadd, a, 1e-6), 1e-6);
    auto fsub = [&](const Tensor64& t) { return weighted_sum(sub(b, t), w); };
    EXPECT_LT(fd_check(fsub, a, 1e-6), 1e-6);
  }
}

TEST(TensorGrad, MatmulVsFiniteDifferences) {
  Rng rng(777);
  for (int inst = 0; inst < 20; ++inst) {
    auto a = random_tensor(rng, {3, 4});
    auto b = random_tensor(rng, {4, 2});
    auto w = random_tensor(rng, {3, 2}, 1.0, 2.0);
    auto fa = [&](const Tensor64& t) { return weighted_sum(matmul(t, b), w); };
    EXPECT_LT(fd_check(fa, a, 1e-6), 1e-6);
    auto fb = [&](const Tensor64& t) { return weighted_sum(matmul(a, t), w); };
    EXPECT_LT(fd_check(fb, b, 1e-6), 1e-6);
  }
}

TEST(TensorGrad, ShapeOpsVsFiniteDifferences) {
  Rng rng(888);
  for (int inst = 0; inst < 20; ++inst) {
    auto x = random_tensor(rng, {6, 3});
    {
      auto w = random_tensor(rng, {3, 6}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(transpose2d(t), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {2, 9}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(reshape(t, {2, 9}), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {2, 3}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(slice_rows(t, 2, 4), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {6, 2}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(slice_cols(t, 1, 3), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {12, 3}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(concat_rows<double>({t, t}), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {6, 6}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(concat_cols<double>({t, t}), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      const std::vector<int64_t> idx = {5, 0, 3, 3, 1};
      auto w = random_tensor(rng, {5, 3}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(gather_rows(t, idx), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
  }
}

TEST(TensorGrad, ReductionAndRowvecOpsVsFiniteDifferences) {
  Rng rng(999);
  for (int inst = 0; inst < 20; ++inst) {
    auto x = random_tensor(rng, {4, 3});
    auto v = random_tensor(rng, {3}, 1.0, 1.5);
    {
      auto f = [&](const Tensor64& t) { return sum_all(t); };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
      auto g = [&](const Tensor64& t) { return mean_all(t); };
      EXPECT_LT(fd_check(g, x, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {4, 1}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(sum_lastdim(t), w);
      };
      EXPECT_LT(fd_check(f, x, 1e-6), 1e-6);
    }
    {
      auto y = random_tensor(rng, {4, 1});
      auto w = random_tensor(rng, {4, 5}, 1.0, 2.0);
      auto f = [&](const Tensor64& t) {
        return weighted_sum(expand_lastdim(t, 5), w);
      };
      EXPECT_LT(fd_check(f, y, 1e-6), 1e-6);
    }
    {
      auto w = random_tensor(rng, {4, 3}, 1.0, 2.0);
      auto fx = [&](const Tensor64& t) {
        return weighted_sum(mul_rowvec(t, v), w);
      };
      EXPECT_LT(fd_check(fx, x, 1e-6), 1e-6);
      auto fv = [&](const Tensor64& t) {
        return weighted_sum(mul_rowvec(x, t), w);
      };
      EXPECT_LT(fd_check(fv, v, 1e-6), 1e-6);
      auto gx = [&](const Tensor64& t) {
        return weighted_sum(add_rowvec(t, v), w);
      };
      EXPECT_LT(fd_check(gx, x, 1e-6), 1e-6);
      auto gv = [&](const Tensor64& t) {
        return weighted_sum(add_rowvec(x, t), w);
      };
      EXPECT_LT(fd_check(gv, v, 1e-6), 1e-6);
    }
    {
      auto s = Tensor64::from_data({1}, {1.7 + rng.uniform()});
      auto w = random_tensor(rng, {4, 3}, 1.0, 2.0);
      auto fx = [&](const Tensor64& t) {
        return weighted_sum(mul_scalar_t(t, s), w);
      };
      EXPECT_LT(fd_check(fx, x, 1e-6), 1e-6);
      auto fs = [&](const Tensor64& t) {
        return weighted_sum(mul_scalar_t(x, t), w);
      };
      EXPECT_LT(fd_check(fs, s, 1e-6), 1e-6);
      auto gx = [&](const Tensor64& t) {
        return weighted_sum(div_scalar_t(t, s), w);
      };
      EXPECT_LT(fd_check(gx, x, 1e-6), 1e-6);
      auto gs = [&](const Tensor64& t) {
        return weighted_sum(div_scalar_t(x, t), w);
      };
      EXPECT_LT(fd_check(gs, s, 1e-6), 1e-6);
    }
  }
}

TEST(TensorOps, SoftmaxMaskedConventions) {
  const double inf = std::numeric_limits<double>::infinity();
  auto x = Tensor64::from_data({2, 3}, {0.0, -inf, 0.0, -inf, -inf, -inf});
  auto y = softmax_lastdim(x);
  EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.data()[1], 0.0);
  EXPECT_DOUBLE_EQ(y.data()[2], 0.5);
  EXPECT_DOUBLE_EQ(y.data()[3], 0.0);
  EXPECT_DOUBLE_EQ(y.data()[4], 0.0);
  EXPECT_DOUBLE_EQ(y.data()[5], 0.0);

  // Gradient must not propagate into masked lanes.
  auto xg = Tensor64::from_data({3}, {0.2, -inf, 0.9});
  xg.set_requires_grad(true);
  auto w = Tensor64::from_data({3}, {1.0, 2.0, 3.0});
  backward(sum_all(mul(softmax_lastdim(xg), w)));
  EXPECT_EQ(xg.grad()[1], 0.0);
  EXPECT_NE(xg.grad()[0], 0.0);
}

TEST(TensorOps, SoftmaxRowsSumToOne) {
  Rng rng(4711);
  auto x = random_tensor(rng, {7, 9}, 3.0);
  auto y = softmax_lastdim(x);
  for (int64_t r = 0; r < 7; ++r) {
    double s = 0;
    for (int64_t j = 0; j < 9; ++j) s += y.data()[r * 9 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace gart
