#include "semcom/params.hpp"

#include <cmath>

#include "semcom/common.hpp"

namespace semcom {

Tensor& ParamStore::create(const std::string& name, std::vector<int> dims,
                           const Init& init) {
  auto it = blocks_.find(name);
  if (it != blocks_.end()) {
    if (it->second.dims() != dims) {
      throw Error("parameter '" + name + "' recreated with shape " + shape_str(dims) +
                  ", existing " + shape_str(it->second.dims()));
    }
    return it->second;
  }
  Tensor t(std::move(dims));
  Rng rng(derive_seed(master_seed_, fnv1a64(name)));
  init(t, rng);
  return blocks_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::int64_t ParamStore::total_size() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : blocks_) n += t.size();
  return n;
}

int ParamStore::zero_matching(const std::string& substring) {
  int touched = 0;
  for (auto& [name, t] : blocks_) {
    if (name.find(substring) != std::string::npos) {
      t.fill(0.0);
      ++touched;
    }
  }
  return touched;
}

ParamStore::Init init_zeros() {
  return [](Tensor& t, Rng&) { t.fill(0.0); };
}

ParamStore::Init init_constant(double v) {
  return [v](Tensor& t, Rng&) { t.fill(v); };
}

ParamStore::Init init_xavier(int fan_in, int fan_out) {
  return init_scaled_xavier(fan_in, fan_out, 1.0);
}

ParamStore::Init init_scaled_xavier(int fan_in, int fan_out, double gain) {
  const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
  return [bound](Tensor& t, Rng& rng) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  };
}

}  // namespace semcom
