#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "semcom/graph.hpp"
#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom::test {

inline Tensor random_tensor(std::vector<int> dims, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(dims));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Relative agreement with an absolute floor for values below finite-difference
// noise. Both gradients near zero compare as equal.
inline bool grad_close(double ad, double fd, double rtol, double atol) {
  const double diff = std::abs(ad - fd);
  return diff <= std::max(rtol * std::max(std::abs(ad), std::abs(fd)), atol);
}

// Central-difference check of d(loss)/d(x) for a scalar-valued builder.
// `build` must create the loss node from a grad-tracked input leaf.
inline void check_input_gradient(
    const Tensor& x0, const std::function<VarId(Graph&, VarId)>& build,
    double rtol = 1e-5, double atol = 1e-8, int max_probes = 64,
    std::uint64_t probe_seed = 99) {
  Graph g;
  VarId x = g.input(x0);
  VarId loss = build(g, x);
  g.backward(loss);
  Tensor analytic = g.has_grad(x) ? g.grad(x) : Tensor::zeros(x0.dims());

  Rng rng(probe_seed);
  std::vector<std::int64_t> probes;
  if (x0.size() <= max_probes) {
    for (std::int64_t i = 0; i < x0.size(); ++i) probes.push_back(i);
  } else {
    for (int i = 0; i < max_probes; ++i) {
      probes.push_back(static_cast<std::int64_t>(rng.next_u64() % x0.size()));
    }
  }

  for (std::int64_t i : probes) {
    const double h = 1e-5 * std::max(1.0, std::abs(x0[i]));
    Tensor xp = x0;
    xp[i] += h;
    Graph gp;
    const double lp = gp.value(build(gp, gp.input(xp)))[0];
    Tensor xm = x0;
    xm[i] -= h;
    Graph gm;
    const double lm = gm.value(build(gm, gm.input(xm)))[0];
    const double fd = (lp - lm) / (2.0 * h);
    INFO("probe ", i, ": autodiff ", analytic[i], " vs finite-diff ", fd);
    CHECK(grad_close(analytic[i], fd, rtol, atol));
  }
}

}  // namespace semcom::test
