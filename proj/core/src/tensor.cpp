#include "semcom/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "semcom/common.hpp"

namespace semcom {

std::int64_t shape_size(const std::vector<int>& dims) {
  std::int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << "x";
    os << dims[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> dims)
    : dims_(std::move(dims)), data_(static_cast<std::size_t>(shape_size(dims_)), 0.0) {
  for (int d : dims_) {
    if (d <= 0) throw Error("tensor dimension must be positive, got " + shape_str(dims_));
  }
}

Tensor::Tensor(std::vector<int> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(data.begin(), data.end()) {
  if (shape_size(dims_) != static_cast<std::int64_t>(data_.size())) {
    throw Error("tensor data size does not match shape " + shape_str(dims_));
  }
}


Tensor Tensor::full(std::vector<int> dims, double v) {
  Tensor t(std::move(dims));
  t.fill(v);
  return t;
}

bool Tensor::same_data(const Tensor& o) const {
  if (!same_shape(o)) return false;
  return std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::l2_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Tensor::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::max(m, v);
  return m;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<int> dims) const {
  if (shape_size(dims) != size()) {
    throw Error("reshape " + shape_str(dims_) + " -> " + shape_str(dims) +
                " changes element count");
  }
  Tensor t = *this;
  t.dims_ = std::move(dims);
  return t;
}

}  // namespace semcom
