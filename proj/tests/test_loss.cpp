#include <gtest/gtest.h>

#include "didfuse/loss.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace didfuse;
using dftest::offset_without_kinks;
using dftest::random_tensor;

namespace {

std::vector<double> plane_vec(const Tensor4<double>& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(DecompositionLoss, IdenticalMapsGiveZero) {
  std::mt19937_64 rng(41);
  const auto b = random_tensor<float>(Shape{2, 4, 6, 6}, rng);
  const auto d = random_tensor<float>(Shape{2, 4, 6, 6}, rng);
  const auto r = decomposition_loss(b, b, d, d, 0.05);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.background_term, 0.0);
  EXPECT_EQ(r.detail_term, 0.0);
}

TEST(DecompositionLoss, SaturationLimit) {
  Tensor4<double> b(Shape{1, 1, 2, 2}, 0.3), dv(Shape{1, 1, 2, 2}, 1e3), di(Shape{1, 1, 2, 2}, 0.0);
  EXPECT_DOUBLE_EQ(decomposition_loss(b, b, dv, di, 0.05).value, -0.05);
}

TEST(DecompositionLoss, BoundedOnRandomInputs) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> scale(0.0, 1.5);
  const double a1 = LossWeights{}.alpha1;
  for (int trial = 0; trial < 1000; ++trial) {
    const double s1 = scale(rng), s2 = scale(rng);
    const auto bv = random_tensor<double>(Shape{1, 2, 3, 3}, rng, -s1, s1);
    const auto bi = random_tensor<double>(Shape{1, 2, 3, 3}, rng, -s1, s1);
    const auto dv = random_tensor<double>(Shape{1, 2, 3, 3}, rng, -s2, s2);
    const auto di = random_tensor<double>(Shape{1, 2, 3, 3}, rng, -s2, s2);
    const double v = decomposition_loss(bv, bi, dv, di, a1).value;
    ASSERT_GT(v, -a1) << trial;
    ASSERT_LT(v, 1.0) << trial;
  }
}

TEST(DecompositionLoss, ShapeMismatch) {
  Tensor a(Shape{1, 2, 4, 4}), b(Shape{1, 2, 4, 5});
  EXPECT_THROW(decomposition_loss(a, a, a, b, 0.05), ShapeError);
}

TEST(DecompositionLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(43);
  const Shape s{2, 4, 6, 6};
  auto bv = random_tensor<double>(s, rng), bi = random_tensor<double>(s, rng);
  auto dv = random_tensor<double>(s, rng), di = random_tensor<double>(s, rng);
  const auto g = decomposition_loss_grad(bv.cast<float>(), bi.cast<float>(), dv.cast<float>(), di.cast<float>(), 0.05);
  auto loss = [&] { return decomposition_loss(bv, bi, dv, di, 0.05).value; };
  const std::pair<Tensor4<double>*, const Tensor4<float>*> cases[] = {{&bv, &g.bv}, {&bi, &g.bi}, {&dv, &g.dv}, {&di, &g.di}};
  for (auto [x, gx] : cases) {
    const auto n = dftest::numeric_gradient(x->data(), loss);
    EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(gx->data()), n), dftest::kFdTolerance);
  }
}

TEST(Ssim, SelfSimilarityIsOne) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_tensor<float>(Shape{1, 1, 24, 20}, rng, 0.0, 1.0);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-6);
    EXPECT_NEAR(ssim_loss(x, x), 0.0, 1e-6);
  }
}

TEST(Ssim, NegativeImageIsAntiCorrelated) {
  Tensor4<double> x(Shape{1, 1, 16, 16}), y(Shape{1, 1, 16, 16});
  for (int yy = 0; yy < 16; ++yy)
    for (int xx = 0; xx < 16; ++xx) {
      x.at(0, 0, yy, xx) = 0.5 + 0.4 * std::sin(0.7 * xx) * std::cos(0.5 * yy);
      y.at(0, 0, yy, xx) = 1.0 - x.at(0, 0, yy, xx);
    }
  EXPECT_LT(ssim(x, y), 0.0);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  std::mt19937_64 rng(45);
  const auto x = random_tensor<double>(Shape{1, 1, 17, 14}, rng, 0.0, 1.0);
  const auto y = random_tensor<double>(Shape{1, 1, 17, 14}, rng, 0.0, 1.0);
  EXPECT_NEAR(ssim(x, y), dftest::ssim_oracle(plane_vec(x), plane_vec(y), 17, 14), 1e-10);
}

TEST(Ssim, TooSmallThrows) {
  Tensor x(Shape{1, 1, 10, 20});
  EXPECT_THROW(ssim(x, x), ShapeError);
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(46);
  auto x = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  auto y = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  const auto g = ssim_eval(x.cast<float>(), y.cast<float>(), 1.0, true);
  const auto n = dftest::numeric_gradient(y.data(), [&] { return ssim(x, y); });
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.grad.data()), n), dftest::kFdTolerance);
}

TEST(ReconstructionLoss, PerfectIsZero) {
  std::mt19937_64 rng(47);
  const auto x = random_tensor<float>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  EXPECT_NEAR(reconstruction_pair_loss(x, x, 5.0), 0.0, 1e-7);
}

TEST(ReconstructionLoss, MsdOfZeroVersusOne) {
  Tensor x(Shape{1, 1, 12, 12}, 0.0f), xh(Shape{1, 1, 12, 12}, 1.0f);
  EXPECT_DOUBLE_EQ(reconstruction_pair_loss(x, xh, 0.0), 1.0);
}

TEST(ReconstructionLoss, MatchesRecomputation) {
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_tensor<double>(Shape{1, 1, 14, 13}, rng, 0.0, 1.0);
    const auto xh = random_tensor<double>(Shape{1, 1, 14, 13}, rng, 0.0, 1.0);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m += (x[i] - xh[i]) * (x[i] - xh[i]);
    m /= x.size();
    const double oracle = m + 5.0 * (1.0 - dftest::ssim_oracle(plane_vec(x), plane_vec(xh), 14, 13)) / 2.0;
    EXPECT_NEAR(reconstruction_pair_loss(x, xh, 5.0), oracle, 1e-6);
    EXPECT_GT(reconstruction_pair_loss(x, xh, 5.0), 0.0);
  }
}

TEST(ReconstructionLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(49);
  auto x = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  auto xh = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  const auto g = reconstruction_pair_loss_grad(x.cast<float>(), xh.cast<float>(), 5.0);
  const auto n = dftest::numeric_gradient(xh.data(), [&] { return reconstruction_pair_loss(x, xh, 5.0); });
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.grad.data()), n), dftest::kFdTolerance);
}

TEST(GradientL1, IdentityAndConstants) {
  std::mt19937_64 rng(50);
  const auto v = random_tensor<float>(Shape{2, 1, 6, 6}, rng);
  EXPECT_EQ(gradient_l1(v, v), 0.0);
  EXPECT_EQ(gradient_l1(Tensor(Shape{1, 1, 5, 5}, 0.2f), Tensor(Shape{1, 1, 5, 5}, 0.9f)), 0.0);
}

TEST(GradientL1, StepEdgeByHand) {
  // 8x8, columns 4..7 raised by 0.5: each of 8 rows has one horizontal jump,
  // normalized by the 8*7 horizontal differences; no vertical differences.
  Tensor4<double> v(Shape{1, 1, 8, 8}), flat(Shape{1, 1, 8, 8}, 0.25);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) v.at(0, 0, y, x) = 0.5;
  EXPECT_DOUBLE_EQ(gradient_l1(v, flat), 0.5 * 8 / (8.0 * 7.0));
}

TEST(GradientL1, Symmetric) {
  std::mt19937_64 rng(51);
  const auto a = random_tensor<double>(Shape{1, 2, 5, 6}, rng);
  const auto b = random_tensor<double>(Shape{1, 2, 5, 6}, rng);
  EXPECT_DOUBLE_EQ(gradient_l1(a, b), gradient_l1(b, a));
}

TEST(GradientL1, DegenerateSize) {
  Tensor a(Shape{1, 1, 1, 6});
  EXPECT_THROW(gradient_l1(a, a), ShapeError);
}

TEST(GradientL1, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(52);
  auto v = random_tensor<double>(Shape{2, 4, 6, 6}, rng);
  auto vh = offset_without_kinks(v, rng);
  const auto g = gradient_l1_grad(v.cast<float>(), vh.cast<float>());
  const auto n = dftest::numeric_gradient(vh.data(), [&] { return gradient_l1(v, vh); });
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.grad.data()), n), dftest::kFdTolerance);
}

TEST(MeanSquaredDifference, Symmetric) {
  std::mt19937_64 rng(53);
  const auto a = random_tensor<double>(Shape{1, 3, 4, 4}, rng);
  const auto b = random_tensor<double>(Shape{1, 3, 4, 4}, rng);
  EXPECT_DOUBLE_EQ(msd(a, b), msd(b, a));
  const auto x = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  const auto y = random_tensor<double>(Shape{1, 1, 12, 12}, rng, 0.0, 1.0);
  EXPECT_NEAR(ssim_loss(x, y), ssim_loss(y, x), 1e-12);
}

namespace {

struct LossCase {
  Tensor4<double> ir, ir_hat, vis, vis_hat;
  DecomposeOutput<double> ir_maps, vis_maps;
};

LossCase random_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LossCase c;
  const Shape img{1, 1, 12, 12}, maps{1, 3, 12, 12};
  c.ir = random_tensor<double>(img, rng, 0.0, 1.0);
  c.ir_hat = random_tensor<double>(img, rng, 0.0, 1.0);
  c.vis = random_tensor<double>(img, rng, 0.0, 1.0);
  c.vis_hat = offset_without_kinks(c.vis, rng);
  for (auto* m : {&c.ir_maps, &c.vis_maps}) {
    m->background = random_tensor<double>(maps, rng);
    m->detail = random_tensor<double>(maps, rng);
  }
  return c;
}

}  // namespace

TEST(TotalLoss, PerfectAutoencoderIsZero) {
  auto c = random_case(54);
  c.vis_maps.background = c.ir_maps.background;
  c.vis_maps.detail = c.ir_maps.detail;
  const auto r = total_loss(c.ir, c.ir, c.vis, c.vis, c.ir_maps, c.vis_maps, LossWeights{});
  EXPECT_NEAR(r.total, 0.0, 1e-12);
}

TEST(TotalLoss, TermIsolation) {
  // The background gap carries no weight; identical B maps remove it.
  auto c = random_case(56);
  c.vis_maps.background = c.ir_maps.background;
  LossWeights w{0, 2.0, 0, 0, 5.0};
  const auto r = total_loss(c.ir, c.ir_hat, c.vis, c.vis_hat, c.ir_maps, c.vis_maps, w);
  EXPECT_DOUBLE_EQ(r.total, 2.0 * reconstruction_pair_loss(c.ir, c.ir_hat, 5.0));
}

TEST(TotalLoss, BreakdownReassembles) {
  const auto c = random_case(57);
  const LossWeights w;
  const auto r = total_loss(c.ir, c.ir_hat, c.vis, c.vis_hat, c.ir_maps, c.vis_maps, w);
  const double manual = r.decomp_background_term - w.alpha1 * r.decomp_detail_term + w.alpha2 * r.recon_ir +
                        w.alpha3 * r.recon_vis + w.alpha4 * r.gradient_term;
  EXPECT_NEAR(r.total, manual, 1e-6);
  EXPECT_TRUE(std::isfinite(r.total));
}

TEST(TotalLoss, NotSymmetricInModalities) {
  const auto c = random_case(58);
  const LossWeights w;
  const auto a = total_loss(c.ir, c.ir_hat, c.vis, c.vis_hat, c.ir_maps, c.vis_maps, w);
  const auto b = total_loss(c.vis, c.vis_hat, c.ir, c.ir_hat, c.vis_maps, c.ir_maps, w);
  EXPECT_NE(a.total, b.total);
  EXPECT_DOUBLE_EQ(a.decomp_background_term, b.decomp_background_term);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  auto c = random_case(59);
  const LossWeights w;
  auto loss = [&] { return total_loss(c.ir, c.ir_hat, c.vis, c.vis_hat, c.ir_maps, c.vis_maps, w).total; };
  auto f = [](const Tensor4<double>& t) { return t.cast<float>(); };
  DecomposeOutput<float> mi{f(c.ir_maps.background), f(c.ir_maps.detail), {}, {}};
  DecomposeOutput<float> mv{f(c.vis_maps.background), f(c.vis_maps.detail), {}, {}};
  const auto g = total_loss_grad(f(c.ir), f(c.ir_hat), f(c.vis), f(c.vis_hat), mi, mv, w);
  EXPECT_NEAR(g.breakdown.total, loss(), 1e-5);
  const std::pair<Tensor4<double>*, const Tensor4<float>*> cases[] = {
      {&c.ir_hat, &g.ir_hat},
      {&c.vis_hat, &g.vis_hat},
      {&c.ir_maps.background, &g.ir_background},
      {&c.ir_maps.detail, &g.ir_detail},
      {&c.vis_maps.background, &g.vis_background},
      {&c.vis_maps.detail, &g.vis_detail}};
  for (auto [x, gx] : cases) {
    const auto n = dftest::numeric_gradient(x->data(), loss);
    EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(gx->data()), n), dftest::kFdTolerance);
  }
}

TEST(LossWeights, Validation) {
  EXPECT_NO_THROW(LossWeights{}.validate());
  EXPECT_THROW((LossWeights{-1, 2, 2, 10, 5}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{0.05, 2, 2, 10, std::nan("")}.validate()), ConfigError);
}
