#pragma once

#include <cmath>
#include <string>

#include "didfuse/net.hpp"
#include "didfuse/ssim.hpp"
#include "didfuse/tensor.hpp"

namespace didfuse {

// Weights of the training objective. Norms are mean-normalized (see msd).
struct LossWeights {
  double alpha1 = 0.05;  // detail-gap reward
  double alpha2 = 2.0;   // infrared reconstruction
  double alpha3 = 2.0;   // visible reconstruction
  double alpha4 = 10.0;  // visible gradient agreement
  double lambda = 5.0;   // SSIM term inside f(X, X^)

  void validate() const {
    for (double v : {alpha1, alpha2, alpha3, alpha4, lambda}) {
      if (!std::isfinite(v) || v < 0) throw ConfigError("loss weights must be finite and >= 0");
    }
  }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Raw (unweighted) terms; assemble() applies the weights.
struct LossBreakdown {
  double total = 0.0;
  double decomp_background_term = 0.0;  // tanh(msd(B_V, B_I))
  double decomp_detail_term = 0.0;      // tanh(msd(D_V, D_I))
  double recon_ir = 0.0;                // f(I, I^)
  double recon_vis = 0.0;               // f(V, V^)
  double gradient_term = 0.0;           // |grad V - grad V^|_1, mean-normalized

  [[nodiscard]] double assemble(const LossWeights& w) const {
    return decomp_background_term - w.alpha1 * decomp_detail_term + w.alpha2 * recon_ir + w.alpha3 * recon_vis +
           w.alpha4 * gradient_term;
  }
};

// Mean squared difference: squared L2 distance divided by the element count.
template <typename Real>
double msd(const Tensor4<Real>& a, const Tensor4<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "msd");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// scale * d(msd)/da, i.e. scale * 2 (a - b) / N. The gradient w.r.t. b is the negation.
template <typename Real>
Tensor4<Real> msd_grad(const Tensor4<Real>& a, const Tensor4<Real>& b, double scale) {
  Tensor4<Real> g(a.shape());
  const double k = 2.0 * scale / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = static_cast<Real>(k * (static_cast<double>(a[i]) - b[i]));
  return g;
}

struct DecompositionLoss {
  double value = 0.0;
  double background_term = 0.0;  // tanh(msd(B_V, B_I))
  double detail_term = 0.0;      // tanh(msd(D_V, D_I))
};

template <typename Real>
DecompositionLoss decomposition_loss(const Tensor4<Real>& bv, const Tensor4<Real>& bi, const Tensor4<Real>& dv,
                                     const Tensor4<Real>& di, double alpha1) {
  require_same_shape(bv.shape(), bi.shape(), "decomposition_loss");
  require_same_shape(bv.shape(), dv.shape(), "decomposition_loss");
  require_same_shape(bv.shape(), di.shape(), "decomposition_loss");
  DecompositionLoss r;
  r.background_term = std::tanh(msd(bv, bi));
  r.detail_term = std::tanh(msd(dv, di));
  r.value = r.background_term - alpha1 * r.detail_term;
  return r;
}

template <typename Real>
struct DecompositionGradients {
  Tensor4<Real> bv, bi, dv, di;
};

template <typename Real>
DecompositionGradients<Real> decomposition_loss_grad(const Tensor4<Real>& bv, const Tensor4<Real>& bi,
                                                     const Tensor4<Real>& dv, const Tensor4<Real>& di,
                                                     double alpha1) {
  const auto r = decomposition_loss(bv, bi, dv, di, alpha1);
  const double kb = 1.0 - r.background_term * r.background_term;
  const double kd = -alpha1 * (1.0 - r.detail_term * r.detail_term);
  auto gbv = msd_grad(bv, bi, kb);
  auto gdv = msd_grad(dv, di, kd);
  return {gbv, scale(gbv, -1.0), gdv, scale(gdv, -1.0)};
}

// (1 - SSIM) / 2 on [0,1] images.
template <typename Real>
double ssim_loss(const Tensor4<Real>& x, const Tensor4<Real>& xhat) {
  return (1.0 - ssim(x, xhat, 1.0)) / 2.0;
}

// f(X, X^) = msd + lambda * L_SSIM.
template <typename Real>
double reconstruction_pair_loss(const Tensor4<Real>& x, const Tensor4<Real>& xhat, double lambda) {
  require_same_shape(x.shape(), xhat.shape(), "reconstruction_pair_loss");
  return msd(x, xhat) + lambda * ssim_loss(x, xhat);
}

template <typename Real>
struct ValueAndGrad {
  double value = 0.0;
  Tensor4<Real> grad;
};

// f and its gradient with respect to the reconstruction.
template <typename Real>
ValueAndGrad<Real> reconstruction_pair_loss_grad(const Tensor4<Real>& x, const Tensor4<Real>& xhat, double lambda) {
  require_same_shape(x.shape(), xhat.shape(), "reconstruction_pair_loss");
  const auto s = ssim_eval(x, xhat, 1.0, true);
  ValueAndGrad<Real> r{msd(x, xhat) + lambda * (1.0 - s.value) / 2.0, msd_grad(xhat, x, 1.0)};
  for (std::size_t i = 0; i < r.grad.size(); ++i) {
    r.grad[i] = static_cast<Real>(r.grad[i] - lambda * 0.5 * static_cast<double>(s.grad[i]));
  }
  return r;
}

namespace detail {

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

template <typename Real>
void check_gradient_size(const Tensor4<Real>& v, const Tensor4<Real>& vhat) {
  require_same_shape(v.shape(), vhat.shape(), "gradient_l1");
  if (v.h() < 2 || v.w() < 2) throw ShapeError("gradient_l1: need h,w >= 2, got " + to_string(v.shape()));
}

}  // namespace detail

// mean |dx V - dx V^| + mean |dy V - dy V^| with forward differences over the
// valid region (dx = [-1, 1], dy = its transpose).
template <typename Real>
ValueAndGrad<Real> gradient_l1_grad(const Tensor4<Real>& v, const Tensor4<Real>& vhat) {
  detail::check_gradient_size(v, vhat);
  const int h = v.h(), w = v.w();
  const double nx = static_cast<double>(v.n()) * v.c() * h * (w - 1);
  const double ny = static_cast<double>(v.n()) * v.c() * (h - 1) * w;
  ValueAndGrad<Real> r{0.0, Tensor4<Real>(v.shape())};
  std::vector<double> g(v.size(), 0.0);
  double sx = 0.0, sy = 0.0;
  for (int b = 0; b < v.n(); ++b) {
    for (int c = 0; c < v.c(); ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = v.index(b, c, y, x);
          if (x + 1 < w) {
            const double d = (static_cast<double>(v[i + 1]) - v[i]) - (static_cast<double>(vhat[i + 1]) - vhat[i]);
            sx += std::abs(d);
            // d depends on vhat as -(vhat[i+1] - vhat[i]).
            const double s = detail::sign(d) / nx;
            g[i + 1] -= s;
            g[i] += s;
          }
          if (y + 1 < h) {
            const std::size_t j = i + static_cast<std::size_t>(w);
            const double d = (static_cast<double>(v[j]) - v[i]) - (static_cast<double>(vhat[j]) - vhat[i]);
            sy += std::abs(d);
            const double s = detail::sign(d) / ny;
            g[j] -= s;
            g[i] += s;
          }
        }
      }
    }
  }
  r.value = sx / nx + sy / ny;
  for (std::size_t i = 0; i < g.size(); ++i) r.grad[i] = static_cast<Real>(g[i]);
  return r;
}

template <typename Real>
double gradient_l1(const Tensor4<Real>& v, const Tensor4<Real>& vhat) {
  return gradient_l1_grad(v, vhat).value;
}

template <typename Real>
LossBreakdown total_loss(const Tensor4<Real>& ir, const Tensor4<Real>& ir_hat, const Tensor4<Real>& vis,
                         const Tensor4<Real>& vis_hat, const DecomposeOutput<Real>& ir_maps,
                         const DecomposeOutput<Real>& vis_maps, const LossWeights& weights) {
  const auto d =
      decomposition_loss(vis_maps.background, ir_maps.background, vis_maps.detail, ir_maps.detail, weights.alpha1);
  LossBreakdown r;
  r.decomp_background_term = d.background_term;
  r.decomp_detail_term = d.detail_term;
  r.recon_ir = reconstruction_pair_loss(ir, ir_hat, weights.lambda);
  r.recon_vis = reconstruction_pair_loss(vis, vis_hat, weights.lambda);
  r.gradient_term = gradient_l1(vis, vis_hat);
  r.total = r.assemble(weights);
  return r;
}

// Gradients of the total loss with respect to everything the network produced.
template <typename Real>
struct TotalLossGradients {
  LossBreakdown breakdown;
  Tensor4<Real> ir_hat;
  Tensor4<Real> vis_hat;
  Tensor4<Real> ir_background, ir_detail;
  Tensor4<Real> vis_background, vis_detail;
};

template <typename Real>
TotalLossGradients<Real> total_loss_grad(const Tensor4<Real>& ir, const Tensor4<Real>& ir_hat,
                                         const Tensor4<Real>& vis, const Tensor4<Real>& vis_hat,
                                         const DecomposeOutput<Real>& ir_maps, const DecomposeOutput<Real>& vis_maps,
                                         const LossWeights& weights) {
  TotalLossGradients<Real> g;
  const auto d =
      decomposition_loss(vis_maps.background, ir_maps.background, vis_maps.detail, ir_maps.detail, weights.alpha1);
  auto dg = decomposition_loss_grad(vis_maps.background, ir_maps.background, vis_maps.detail, ir_maps.detail,
                                    weights.alpha1);
  auto fi = reconstruction_pair_loss_grad(ir, ir_hat, weights.lambda);
  auto fv = reconstruction_pair_loss_grad(vis, vis_hat, weights.lambda);
  auto gl = gradient_l1_grad(vis, vis_hat);

  g.breakdown.decomp_background_term = d.background_term;
  g.breakdown.decomp_detail_term = d.detail_term;
  g.breakdown.recon_ir = fi.value;
  g.breakdown.recon_vis = fv.value;
  g.breakdown.gradient_term = gl.value;
  g.breakdown.total = g.breakdown.assemble(weights);

  g.ir_hat = scale(fi.grad, weights.alpha2);
  g.vis_hat = Tensor4<Real>(vis_hat.shape());
  for (std::size_t i = 0; i < g.vis_hat.size(); ++i) {
    g.vis_hat[i] = static_cast<Real>(weights.alpha3 * fv.grad[i] + weights.alpha4 * gl.grad[i]);
  }
  g.vis_background = std::move(dg.bv);
  g.ir_background = std::move(dg.bi);
  g.vis_detail = std::move(dg.dv);
  g.ir_detail = std::move(dg.di);
  return g;
}

}  // namespace didfuse
