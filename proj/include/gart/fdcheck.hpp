#pragma once

#include <functional>

#include "gart/ops.hpp"
#include "gart/tensor.hpp"

namespace gart {

// Compares the reverse-mode gradient of a scalar functional against central
// differences, coordinate by coordinate. Returns the worst relative error
// |analytic - fd| / (|analytic| + 1e-12). 64-bit only: float finite
// differences drown in rounding noise.
inline double fd_check(
    const std::function<Tensor64(const Tensor64&)>& f, const Tensor64& x,
    double h) {
  contract_check(h > 0.0, "fd_check: step h must be positive");
  Tensor64 xg = x.detach();
  xg.set_requires_grad(true);
  Tensor64 loss = f(xg);
  contract_check(loss.numel() == 1, "fd_check: f must return a scalar");
  backward(loss);
  const std::vector<double> analytic = xg.grad();

  std::vector<double> base = x.vec();
  double worst = 0.0;
  for (size_t i = 0; i < base.size(); ++i) {
    const double orig = base[i];
    base[i] = orig + h;
    const double fp = f(Tensor64::from_data(x.shape(), base)).item();
    base[i] = orig - h;
    const double fm = f(Tensor64::from_data(x.shape(), base)).item();
    base[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - fd) / (std::abs(analytic[i]) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gart
