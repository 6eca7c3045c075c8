#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <string>
#include <vector>

namespace semcom {

// 64-byte aligned allocator. Keeping every buffer on the same alignment makes
// vectorized kernels take identical code paths run after run, which keeps
// training bitwise reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

// Dense row-major tensor of doubles. Feature grids use H x W x C layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims);
  Tensor(std::vector<int> dims, std::vector<double> data);

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
  static Tensor full(std::vector<int> dims, double v);

  bool empty() const { return data_.empty(); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(dims_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // H x W x C accessor
  double& at(int i, int j, int c) {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + c];
  }
  double at(int i, int j, int c) const {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + c];
  }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  bool same_data(const Tensor& o) const;  // bitwise comparison
  bool all_finite() const;
  double l2_norm() const;
  double min_value() const;
  double max_value() const;

  void fill(double v);
  Tensor reshaped(std::vector<int> dims) const;

 private:
  std::vector<int> dims_;
  AlignedDoubles data_;
};

std::int64_t shape_size(const std::vector<int>& dims);
std::string shape_str(const std::vector<int>& dims);

}  // namespace semcom
