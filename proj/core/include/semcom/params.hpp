#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// Named parameter blocks. Initialization is seeded per name, so values do not
// depend on module construction order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t master_seed = 0) : master_seed_(master_seed) {}

  using Init = std::function<void(Tensor&, Rng&)>;

  // Creates the block on first use, returns the existing one afterwards.
  Tensor& create(const std::string& name, std::vector<int> dims, const Init& init);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return blocks_.count(name) > 0; }

  std::map<std::string, Tensor>& blocks() { return blocks_; }
  const std::map<std::string, Tensor>& blocks() const { return blocks_; }

  std::int64_t total_size() const;
  std::uint64_t master_seed() const { return master_seed_; }

  // Zeroes every block whose name contains `substring` (test hook for
  // identity-skip style checks). Returns the number of blocks touched.
  int zero_matching(const std::string& substring);

 private:
  std::uint64_t master_seed_;
  std::map<std::string, Tensor> blocks_;
};

// common initializers
ParamStore::Init init_zeros();
ParamStore::Init init_constant(double v);
ParamStore::Init init_xavier(int fan_in, int fan_out);
ParamStore::Init init_scaled_xavier(int fan_in, int fan_out, double gain);

}  // namespace semcom
