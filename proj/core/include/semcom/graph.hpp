#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

using VarId = std::int32_t;
using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;
using CoefMap = std::shared_ptr<const std::vector<double>>;

// Reverse-mode autodiff tape. A Graph is built fresh for every forward pass;
// backward() walks the tape once in reverse creation order. Parameters are
// registered by name and deduplicated, so a weight used K times accumulates
// K gradient contributions on one node.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // leaves
  VarId constant(Tensor v);                             // not grad-tracked
  VarId input(Tensor v);                                // grad-tracked
  VarId param(const std::string& name, const Tensor& v);

  // elementwise
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId scale(VarId a, double c);
  VarId add_const(VarId a, const Tensor& t);            // same-shape constant
  VarId relu(VarId a);
  VarId gelu(VarId a);
  VarId clamp01(VarId a);
  VarId dropout(VarId a, double rate, Rng& rng);

  // linear algebra
  VarId matmul(VarId a, VarId b);                       // [m,k] x [k,n]
  VarId linear(VarId x, VarId w, VarId b);              // rows(x) * w + b
  VarId batched_matmul(VarId a, VarId b, bool trans_a, bool trans_b);

  // data movement
  VarId reshape(VarId a, std::vector<int> dims);
  VarId gather(VarId a, IndexMap idx, std::vector<int> out_dims);
  VarId linear_combine(VarId a, IndexMap idx, CoefMap coef, int taps,
                       std::vector<int> out_dims);
  VarId concat_last(VarId a, VarId b);
  VarId slice_last(VarId a, int start, int len);

  // convolution / pooling
  VarId conv2d(VarId x, VarId w, VarId b, int stride, int pad);
  VarId avg_pool2d(VarId x, int k);

  // normalization / attention
  VarId layer_norm(VarId x, VarId gamma, VarId beta, double eps = 1e-5);
  VarId softmax_last(VarId x);

  // reductions and losses
  VarId mean_all(VarId a);                              // -> [1]
  VarId sum_all(VarId a);                               // -> [1]
  VarId mse(VarId a, VarId b);                          // -> [1]
  VarId softmax_cross_entropy(VarId logits, std::shared_ptr<const std::vector<int>> labels,
                              int ignore_label);        // logits [N,C] -> [1]

  // scalar-node algebra (s has shape [1])
  VarId mul_scalar(VarId x, VarId s);
  VarId rsqrt_scalar(VarId s, double mul, double eps);

  // y[2i]   = re*x[2i] - im*x[2i+1] + n[2i]
  // y[2i+1] = im*x[2i] + re*x[2i+1] + n[2i+1]
  VarId complex_affine(VarId x, double re, double im, Tensor noise);

  // Normalizes a flat real vector viewed as complex pairs to unit mean
  // symbol power, differentiably.
  VarId power_normalize(VarId x);

  void backward(VarId loss);

  const Tensor& value(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool has_grad(VarId id) const;
  const Tensor& grad(VarId id) const;
  const std::map<std::string, VarId>& named_params() const { return named_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily
    bool requires_grad = false;
    std::function<void()> backward;
  };

  VarId push(Tensor value, bool requires_grad, std::function<void()> back);
  Tensor& grad_buf(VarId id);
  bool wants(VarId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
  std::map<std::string, VarId> named_;
  bool ran_backward_ = false;
};

}  // namespace semcom
