#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "semcom/params.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Self-describing binary container: version, config hash, canonical config
// text and named parameter blocks, integrity-checked end to end.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::string task;
  std::string config_text;
  std::map<std::string, Tensor> blocks;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rejects a hash mismatch (names both hashes) unless force is set.
void require_config_match(const Checkpoint& ckpt, std::uint64_t expected_hash, bool force);

Checkpoint make_checkpoint(const ParamStore& params, const std::string& task,
                           std::uint64_t config_hash, std::string config_text);
void restore_params(const Checkpoint& ckpt, ParamStore& params);

}  // namespace semcom
