#include "semcom/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "semcom/common.hpp"

namespace semcom {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapCM = Eigen::Map<const EMat>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a.dims()) +
                " vs " + shape_str(b.dims()));
  }
}

}  // namespace

VarId Graph::push(Tensor value, bool requires_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Graph::grad_buf(VarId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.dims());
  return n.grad;
}

bool Graph::has_grad(VarId id) const {
  return !nodes_[static_cast<std::size_t>(id)].grad.empty();
}

const Tensor& Graph::grad(VarId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) throw Error("no gradient recorded for node");
  return n.grad;
}

VarId Graph::constant(Tensor v) { return push(std::move(v), false, nullptr); }

VarId Graph::input(Tensor v) { return push(std::move(v), true, nullptr); }

VarId Graph::param(const std::string& name, const Tensor& v) {
  auto it = named_.find(name);
  if (it != named_.end()) return it->second;
  VarId id = push(v, true, nullptr);
  named_.emplace(name, id);
  return id;
}

VarId Graph::add(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "add");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id] {
      const Tensor& g = grad(id);
      if (wants(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    };
  }
  return id;
}

VarId Graph::sub(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "sub");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id] {
      const Tensor& g = grad(id);
      if (wants(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  }
  return id;
}

VarId Graph::mul(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "mul");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id] {
      const Tensor& g = grad(id);
      const Tensor& va2 = value(a);
      const Tensor& vb2 = value(b);
      if (wants(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
      }
      if (wants(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
      }
    };
  }
  return id;
}

VarId Graph::scale(VarId a, double c) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, c, id] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    };
  }
  return id;
}

VarId Graph::add_const(VarId a, const Tensor& t) {
  const Tensor& va = value(a);
  check_same_shape(va, t, "add_const");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += t[i];
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  }
  return id;
}

VarId Graph::relu(VarId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const Tensor& g = grad(id);
      const Tensor& x = value(a);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) ga[i] += g[i];
      }
    };
  }
  return id;
}

VarId Graph::gelu(VarId a) {
  const Tensor& x = value(a);
  Tensor out = x;
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * inv_sqrt2));
  }
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const Tensor& g = grad(id);
      const Tensor& x2 = value(a);
      Tensor& ga = grad_buf(a);
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      for (std::int64_t i = 0; i < g.size(); ++i) {
        const double v = x2[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        ga[i] += g[i] * (cdf + v * pdf);
      }
    };
  }
  return id;
}

VarId Graph::clamp01(VarId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const Tensor& g = grad(id);
      const Tensor& x = value(a);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0 && x[i] < 1.0) ga[i] += g[i];
      }
    };
  }
  return id;
}

VarId Graph::dropout(VarId a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw Error("dropout rate must be in [0,1)");
  const Tensor& x = value(a);
  auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
  const double keep = 1.0 - rate;
  for (auto& m : *mask) m = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
  Tensor out = x;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= (*mask)[static_cast<std::size_t>(i)];
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id, mask] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * (*mask)[static_cast<std::size_t>(i)];
      }
    };
  }
  return id;
}

VarId Graph::matmul(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.ndim() != 2 || vb.ndim() != 2 || va.dim(1) != vb.dim(0)) {
    throw Error("matmul: incompatible shapes " + shape_str(va.dims()) + " x " +
                shape_str(vb.dims()));
  }
  const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Tensor out({m, n});
  MapM(out.data(), m, n).noalias() = MapCM(va.data(), m, k) * MapCM(vb.data(), k, n);
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id, m, k, n] {
      MapCM g(grad(id).data(), m, n);
      if (wants(a)) {
        MapM(grad_buf(a).data(), m, k).noalias() += g * MapCM(value(b).data(), k, n).transpose();
      }
      if (wants(b)) {
        MapM(grad_buf(b).data(), k, n).noalias() += MapCM(value(a).data(), m, k).transpose() * g;
      }
    };
  }
  return id;
}

VarId Graph::linear(VarId x, VarId w, VarId b) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  if (vw.ndim() != 2) throw Error("linear: weight must be 2-d");
  const int k = vw.dim(0), n = vw.dim(1);
  if (vx.size() % k != 0) {
    throw Error("linear: input size " + std::to_string(vx.size()) +
                " not divisible by fan-in " + std::to_string(k));
  }
  if (vb.size() != n) throw Error("linear: bias size mismatch");
  const int rows = static_cast<int>(vx.size() / k);
  std::vector<int> out_dims = vx.dims();
  out_dims.back() = n;
  Tensor out(out_dims);
  MapM o(out.data(), rows, n);
  o.noalias() = MapCM(vx.data(), rows, k) * MapCM(vw.data(), k, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(vb.data(), n);
  bool rg = wants(x) || wants(w) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, w, b, id, rows, k, n] {
      MapCM g(grad(id).data(), rows, n);
      if (wants(x)) {
        MapM(grad_buf(x).data(), rows, k).noalias() += g * MapCM(value(w).data(), k, n).transpose();
      }
      if (wants(w)) {
        MapM(grad_buf(w).data(), k, n).noalias() += MapCM(value(x).data(), rows, k).transpose() * g;
      }
      if (wants(b)) {
        Eigen::Map<Eigen::RowVectorXd>(grad_buf(b).data(), n) += g.colwise().sum();
      }
    };
  }
  return id;
}

VarId Graph::batched_matmul(VarId a, VarId b, bool trans_a, bool trans_b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(0) != vb.dim(0)) {
    throw Error("batched_matmul: expected [B,.,.] operands with equal batch");
  }
  const int B = va.dim(0);
  const int m = trans_a ? va.dim(2) : va.dim(1);
  const int ka = trans_a ? va.dim(1) : va.dim(2);
  const int kb = trans_b ? vb.dim(2) : vb.dim(1);
  const int n = trans_b ? vb.dim(1) : vb.dim(2);
  if (ka != kb) {
    throw Error("batched_matmul: inner dimensions disagree " + shape_str(va.dims()) +
                " x " + shape_str(vb.dims()));
  }
  const std::int64_t sa = static_cast<std::int64_t>(va.dim(1)) * va.dim(2);
  const std::int64_t sb = static_cast<std::int64_t>(vb.dim(1)) * vb.dim(2);
  Tensor out({B, m, n});
  for (int i = 0; i < B; ++i) {
    MapCM A(va.data() + i * sa, va.dim(1), va.dim(2));
    MapCM Bm(vb.data() + i * sb, vb.dim(1), vb.dim(2));
    MapM C(out.data() + static_cast<std::int64_t>(i) * m * n, m, n);
    if (!trans_a && !trans_b) C.noalias() = A * Bm;
    else if (!trans_a && trans_b) C.noalias() = A * Bm.transpose();
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * Bm;
    else C.noalias() = A.transpose() * Bm.transpose();
  }
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id, trans_a, trans_b, B, m, n, sa, sb] {
      const Tensor& va2 = value(a);
      const Tensor& vb2 = value(b);
      for (int i = 0; i < B; ++i) {
        MapCM g(grad(id).data() + static_cast<std::int64_t>(i) * m * n, m, n);
        MapCM A(va2.data() + i * sa, va2.dim(1), va2.dim(2));
        MapCM Bm(vb2.data() + i * sb, vb2.dim(1), vb2.dim(2));
        if (wants(a)) {
          MapM ga(grad_buf(a).data() + i * sa, va2.dim(1), va2.dim(2));
          // dA' = g * B'^T with A' = trans_a ? A^T : A
          if (!trans_a) {
            if (!trans_b) ga.noalias() += g * Bm.transpose();
            else ga.noalias() += g * Bm;
          } else {
            if (!trans_b) ga.noalias() += Bm * g.transpose();
            else ga.noalias() += Bm.transpose() * g.transpose();
          }
        }
        if (wants(b)) {
          MapM gb(grad_buf(b).data() + i * sb, vb2.dim(1), vb2.dim(2));
          // dB' = A'^T * g with B' = trans_b ? B^T : B
          if (!trans_b) {
            if (!trans_a) gb.noalias() += A.transpose() * g;
            else gb.noalias() += A * g;
          } else {
            if (!trans_a) gb.noalias() += g.transpose() * A;
            else gb.noalias() += g.transpose() * A.transpose();
          }
        }
      }
    };
  }
  return id;
}

VarId Graph::reshape(VarId a, std::vector<int> dims) {
  Tensor out = value(a).reshaped(dims);
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  }
  return id;
}

VarId Graph::gather(VarId a, IndexMap idx, std::vector<int> out_dims) {
  const Tensor& va = value(a);
  if (static_cast<std::int64_t>(idx->size()) != shape_size(out_dims)) {
    throw Error("gather: index map size does not match output shape");
  }
  Tensor out(out_dims);
  const double* src = va.data();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    out[static_cast<std::int64_t>(i)] = src[(*idx)[i]];
  }
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id, idx] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::size_t i = 0; i < idx->size(); ++i) {
        ga[(*idx)[i]] += g[static_cast<std::int64_t>(i)];
      }
    };
  }
  return id;
}

VarId Graph::linear_combine(VarId a, IndexMap idx, CoefMap coef, int taps,
                            std::vector<int> out_dims) {
  const std::int64_t n = shape_size(out_dims);
  if (static_cast<std::int64_t>(idx->size()) != n * taps ||
      idx->size() != coef->size()) {
    throw Error("linear_combine: tap table size mismatch");
  }
  const Tensor& va = value(a);
  Tensor out(out_dims);
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int t = 0; t < taps; ++t) {
      const std::size_t j = static_cast<std::size_t>(i * taps + t);
      s += (*coef)[j] * va[(*idx)[j]];
    }
    out[i] = s;
  }
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id, idx, coef, taps, n] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < n; ++i) {
        for (int t = 0; t < taps; ++t) {
          const std::size_t j = static_cast<std::size_t>(i * taps + t);
          ga[(*idx)[j]] += g[i] * (*coef)[j];
        }
      }
    };
  }
  return id;
}

VarId Graph::concat_last(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.ndim() != vb.ndim()) throw Error("concat_last: rank mismatch");
  for (int i = 0; i + 1 < va.ndim(); ++i) {
    if (va.dim(i) != vb.dim(i)) {
      throw Error("concat_last: leading shape mismatch " + shape_str(va.dims()) +
                  " vs " + shape_str(vb.dims()));
    }
  }
  const int ca = va.dim(va.ndim() - 1);
  const int cb = vb.dim(vb.ndim() - 1);
  std::vector<int> out_dims = va.dims();
  out_dims.back() = ca + cb;
  const std::int64_t rows = va.size() / ca;
  Tensor out(out_dims);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(va.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(vb.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id, rows, ca, cb] {
      const Tensor& g = grad(id);
      if (wants(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t r = 0; r < rows; ++r)
          for (int c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
      }
      if (wants(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t r = 0; r < rows; ++r)
          for (int c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
      }
    };
  }
  return id;
}

VarId Graph::slice_last(VarId a, int start, int len) {
  const Tensor& va = value(a);
  const int c = va.dim(va.ndim() - 1);
  if (start < 0 || len <= 0 || start + len > c) throw Error("slice_last: out of range");
  std::vector<int> out_dims = va.dims();
  out_dims.back() = len;
  const std::int64_t rows = va.size() / c;
  Tensor out(out_dims);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(va.data() + r * c + start, len, out.data() + r * len);
  }
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id, rows, c, start, len] {
      const Tensor& g = grad(id);
      Tensor& ga = grad_buf(a);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int i = 0; i < len; ++i) ga[r * c + start + i] += g[r * len + i];
    };
  }
  return id;
}

VarId Graph::conv2d(VarId x, VarId w, VarId b, int stride, int pad) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  if (vx.ndim() != 3 || vw.ndim() != 4) throw Error("conv2d: expects x[H,W,C], w[kh,kw,Cin,Cout]");
  const int H = vx.dim(0), W = vx.dim(1), Cin = vx.dim(2);
  const int kh = vw.dim(0), kw = vw.dim(1), Cout = vw.dim(3);
  if (vw.dim(2) != Cin) {
    throw Error("conv2d: input has " + std::to_string(Cin) + " channels, kernel expects " +
                std::to_string(vw.dim(2)));
  }
  if (vb.size() != Cout) throw Error("conv2d: bias size mismatch");
  const int oh = (H + 2 * pad - kh) / stride + 1;
  const int ow = (W + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw Error("conv2d: kernel larger than padded input");
  const int K = kh * kw * Cin;
  const std::int64_t rows = static_cast<std::int64_t>(oh) * ow;

  auto col = std::make_shared<EMat>(rows, K);
  col->setZero();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* dst = col->row(oy * ow + ox).data();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          std::copy_n(vx.data() + (static_cast<std::int64_t>(iy) * W + ix) * Cin, Cin,
                      dst + (ky * kw + kx) * Cin);
        }
      }
    }
  }

  Tensor out({oh, ow, Cout});
  MapM o(out.data(), rows, Cout);
  o.noalias() = (*col) * MapCM(vw.data(), K, Cout);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(vb.data(), Cout);

  bool rg = wants(x) || wants(w) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, w, b, id, col, H, W, Cin, kh, kw, Cout, oh, ow,
                              stride, pad, K, rows] {
      MapCM g(grad(id).data(), rows, Cout);
      if (wants(w)) {
        MapM(grad_buf(w).data(), K, Cout).noalias() += col->transpose() * g;
      }
      if (wants(b)) {
        Eigen::Map<Eigen::RowVectorXd>(grad_buf(b).data(), Cout) += g.colwise().sum();
      }
      if (wants(x)) {
        EMat dcol(rows, K);
        dcol.noalias() = g * MapCM(value(w).data(), K, Cout).transpose();
        Tensor& gx = grad_buf(x);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const double* src = dcol.row(oy * ow + ox).data();
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                double* dst = gx.data() + (static_cast<std::int64_t>(iy) * W + ix) * Cin;
                const double* s = src + (ky * kw + kx) * Cin;
                for (int c = 0; c < Cin; ++c) dst[c] += s[c];
              }
            }
          }
        }
      }
    };
  }
  return id;
}

VarId Graph::avg_pool2d(VarId x, int k) {
  const Tensor& vx = value(x);
  if (vx.ndim() != 3) throw Error("avg_pool2d: expects [H,W,C]");
  const int H = vx.dim(0), W = vx.dim(1), C = vx.dim(2);
  if (k <= 0 || H % k != 0 || W % k != 0) {
    throw Error("avg_pool2d: window " + std::to_string(k) + " does not tile " +
                shape_str(vx.dims()));
  }
  const int oh = H / k, ow = W / k;
  const double inv = 1.0 / (k * k);
  Tensor out({oh, ow, C});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) s += vx.at(oy * k + dy, ox * k + dx, c);
        out.at(oy, ox, c) = s * inv;
      }
  bool rg = wants(x);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, id, oh, ow, C, k, inv] {
      const Tensor& g = grad(id);
      Tensor& gx = grad_buf(x);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          for (int c = 0; c < C; ++c) {
            const double gv = g.at(oy, ox, c) * inv;
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx) gx.at(oy * k + dy, ox * k + dx, c) += gv;
          }
    };
  }
  return id;
}

VarId Graph::layer_norm(VarId x, VarId gamma, VarId beta, double eps) {
  const Tensor& vx = value(x);
  const Tensor& vg = value(gamma);
  const Tensor& vb = value(beta);
  const int C = vx.dim(vx.ndim() - 1);
  if (vg.size() != C || vb.size() != C) throw Error("layer_norm: affine size mismatch");
  const std::int64_t rows = vx.size() / C;
  Tensor out(vx.dims());
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(vx.size()));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = vx.data() + r * C;
    double mean = 0.0;
    for (int c = 0; c < C; ++c) mean += xr[c];
    mean /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= C;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < C; ++c) {
      const double h = (xr[c] - mean) * is;
      (*xhat)[static_cast<std::size_t>(r * C + c)] = h;
      out[r * C + c] = vg[c] * h + vb[c];
    }
  }
  bool rg = wants(x) || wants(gamma) || wants(beta);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, gamma, beta, id, rows, C, xhat, inv_std] {
      const Tensor& g = grad(id);
      const Tensor& vg2 = value(gamma);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * C;
        const double* hr = xhat->data() + r * C;
        if (wants(gamma)) {
          Tensor& gg = grad_buf(gamma);
          for (int c = 0; c < C; ++c) gg[c] += gr[c] * hr[c];
        }
        if (wants(beta)) {
          Tensor& gb = grad_buf(beta);
          for (int c = 0; c < C; ++c) gb[c] += gr[c];
        }
        if (wants(x)) {
          Tensor& gx = grad_buf(x);
          double mean_gy = 0.0, mean_gyh = 0.0;
          for (int c = 0; c < C; ++c) {
            const double gy = gr[c] * vg2[c];
            mean_gy += gy;
            mean_gyh += gy * hr[c];
          }
          mean_gy /= C;
          mean_gyh /= C;
          const double is = (*inv_std)[static_cast<std::size_t>(r)];
          for (int c = 0; c < C; ++c) {
            const double gy = gr[c] * vg2[c];
            gx[r * C + c] += is * (gy - mean_gy - hr[c] * mean_gyh);
          }
        }
      }
    };
  }
  return id;
}

VarId Graph::softmax_last(VarId x) {
  const Tensor& vx = value(x);
  const int C = vx.dim(vx.ndim() - 1);
  const std::int64_t rows = vx.size() / C;
  Tensor out(vx.dims());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = vx.data() + r * C;
    double m = xr[0];
    for (int c = 1; c < C; ++c) m = std::max(m, xr[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(xr[c] - m);
    const double inv = 1.0 / z;
    for (int c = 0; c < C; ++c) out[r * C + c] = std::exp(xr[c] - m) * inv;
  }
  bool rg = wants(x);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, id, rows, C] {
      const Tensor& g = grad(id);
      const Tensor& y = value(id);
      Tensor& gx = grad_buf(x);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * C;
        const double* yr = y.data() + r * C;
        double dot = 0.0;
        for (int c = 0; c < C; ++c) dot += gr[c] * yr[c];
        for (int c = 0; c < C; ++c) gx[r * C + c] += yr[c] * (gr[c] - dot);
      }
    };
  }
  return id;
}

VarId Graph::mean_all(VarId a) {
  const Tensor& va = value(a);
  const double inv = 1.0 / static_cast<double>(va.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < va.size(); ++i) s += va[i];
  Tensor out({1});
  out[0] = s * inv;
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id, inv] {
      const double g = grad(id)[0] * inv;
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
  }
  return id;
}

VarId Graph::sum_all(VarId a) {
  const Tensor& va = value(a);
  double s = 0.0;
  for (std::int64_t i = 0; i < va.size(); ++i) s += va[i];
  Tensor out({1});
  out[0] = s;
  bool rg = wants(a);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, id] {
      const double g = grad(id)[0];
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
  }
  return id;
}

VarId Graph::mse(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "mse");
  const double inv = 1.0 / static_cast<double>(va.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  Tensor out({1});
  out[0] = s * inv;
  bool rg = wants(a) || wants(b);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, a, b, id, inv] {
      const double g = grad(id)[0] * 2.0 * inv;
      const Tensor& va2 = value(a);
      const Tensor& vb2 = value(b);
      if (wants(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g * (va2[i] - vb2[i]);
      }
      if (wants(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] -= g * (va2[i] - vb2[i]);
      }
    };
  }
  return id;
}

VarId Graph::softmax_cross_entropy(VarId logits,
                                   std::shared_ptr<const std::vector<int>> labels,
                                   int ignore_label) {
  const Tensor& vz = value(logits);
  if (vz.ndim() != 2) throw Error("softmax_cross_entropy: logits must be [N,C]");
  const int N = vz.dim(0), C = vz.dim(1);
  if (static_cast<int>(labels->size()) != N) {
    throw Error("softmax_cross_entropy: label count mismatch");
  }
  std::int64_t valid = 0;
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    const int y = (*labels)[static_cast<std::size_t>(i)];
    if (y == ignore_label) continue;
    if (y < 0 || y >= C) {
      throw DataError("segmentation label " + std::to_string(y) + " outside [0," +
                      std::to_string(C - 1) + "]");
    }
    const double* zr = vz.data() + static_cast<std::int64_t>(i) * C;
    double m = zr[0];
    for (int c = 1; c < C; ++c) m = std::max(m, zr[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(zr[c] - m);
    total += m + std::log(z) - zr[y];
    ++valid;
  }
  if (valid == 0) throw DataError("cross-entropy: every pixel carries the ignore label");
  Tensor out({1});
  out[0] = total / static_cast<double>(valid);
  bool rg = wants(logits);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, logits, id, labels, ignore_label, N, C, valid] {
      const double g = grad(id)[0] / static_cast<double>(valid);
      const Tensor& vz2 = value(logits);
      Tensor& gz = grad_buf(logits);
      for (int i = 0; i < N; ++i) {
        const int y = (*labels)[static_cast<std::size_t>(i)];
        if (y == ignore_label) continue;
        const double* zr = vz2.data() + static_cast<std::int64_t>(i) * C;
        double m = zr[0];
        for (int c = 1; c < C; ++c) m = std::max(m, zr[c]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(zr[c] - m);
        const double inv = 1.0 / z;
        double* gr = gz.data() + static_cast<std::int64_t>(i) * C;
        for (int c = 0; c < C; ++c) {
          const double p = std::exp(zr[c] - m) * inv;
          gr[c] += g * (p - (c == y ? 1.0 : 0.0));
        }
      }
    };
  }
  return id;
}

VarId Graph::mul_scalar(VarId x, VarId s) {
  const Tensor& vx = value(x);
  const Tensor& vs = value(s);
  if (vs.size() != 1) throw Error("mul_scalar: scalar operand must have size 1");
  Tensor out = vx;
  const double sv = vs[0];
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= sv;
  bool rg = wants(x) || wants(s);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, s, id] {
      const Tensor& g = grad(id);
      const double sv2 = value(s)[0];
      const Tensor& vx2 = value(x);
      if (wants(x)) {
        Tensor& gx = grad_buf(x);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv2;
      }
      if (wants(s)) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < g.size(); ++i) acc += g[i] * vx2[i];
        grad_buf(s)[0] += acc;
      }
    };
  }
  return id;
}

VarId Graph::rsqrt_scalar(VarId s, double mul, double eps) {
  const Tensor& vs = value(s);
  if (vs.size() != 1) throw Error("rsqrt_scalar: operand must have size 1");
  const double base = mul * vs[0] + eps;
  Tensor out({1});
  out[0] = 1.0 / std::sqrt(base);
  bool rg = wants(s);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, s, id, mul] {
      const double y = value(id)[0];
      grad_buf(s)[0] += grad(id)[0] * (-0.5 * mul * y * y * y);
    };
  }
  return id;
}

VarId Graph::complex_affine(VarId x, double re, double im, Tensor noise) {
  const Tensor& vx = value(x);
  if (vx.size() % 2 != 0) throw Error("complex_affine: odd-length real vector");
  check_same_shape(vx, noise, "complex_affine");
  Tensor out(vx.dims());
  for (std::int64_t i = 0; i < vx.size(); i += 2) {
    out[i] = re * vx[i] - im * vx[i + 1] + noise[i];
    out[i + 1] = im * vx[i] + re * vx[i + 1] + noise[i + 1];
  }
  bool rg = wants(x);
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_.back().backward = [this, x, id, re, im] {
      const Tensor& g = grad(id);
      Tensor& gx = grad_buf(x);
      for (std::int64_t i = 0; i < g.size(); i += 2) {
        gx[i] += re * g[i] + im * g[i + 1];
        gx[i + 1] += -im * g[i] + re * g[i + 1];
      }
    };
  }
  return id;
}

VarId Graph::power_normalize(VarId x) {
  // mean symbol power of a real pair layout is 2 * mean(x^2); the tiny eps
  // keeps the scale finite if the signal collapses during training
  VarId sq = mul(x, x);
  VarId m = mean_all(sq);
  VarId s = rsqrt_scalar(m, 2.0, 1e-12);
  return mul_scalar(x, s);
}

void Graph::backward(VarId loss) {
  if (ran_backward_) throw Error("backward already ran on this graph");
  ran_backward_ = true;
  Node& ln = nodes_[static_cast<std::size_t>(loss)];
  if (ln.value.size() != 1) throw Error("backward: loss must be a scalar node");
  grad_buf(loss)[0] = 1.0;
  for (std::int64_t i = loss; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.grad.empty() && n.backward) n.backward();
  }
}

}  // namespace semcom
