#include "semcom/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "semcom/common.hpp"

namespace semcom {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr char kTrailer[8] = {'S', 'E', 'M', 'C', 'K', 'E', 'N', 'D'};

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <class T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  void read_bytes(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw DataError("checkpoint '" + path_ + "' is corrupt or truncated");
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }

  template <class T>
  T read() {
    T v;
    read_bytes(&v, sizeof(T));
    return v;
  }

  std::string read_string() {
    const auto n = read<std::uint32_t>();
    if (pos_ + n > buf_.size()) {
      throw DataError("checkpoint '" + path_ + "' is corrupt or truncated");
    }
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string payload;
  put<std::uint32_t>(payload, ckpt.version);
  put<std::uint64_t>(payload, ckpt.config_hash);
  put_string(payload, ckpt.task);
  put_string(payload, ckpt.config_text);
  put<std::uint32_t>(payload, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, t] : ckpt.blocks) {  // std::map: sorted, canonical bytes
    put_string(payload, name);
    put<std::uint32_t>(payload, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.dims()) put<std::int32_t>(payload, d);
    put_bytes(payload, t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
  }

  std::string out;
  out.reserve(payload.size() + 32);
  put_bytes(out, kMagic, sizeof(kMagic));
  out += payload;
  put<std::uint64_t>(out, fnv1a64(payload.data(), payload.size()));
  put_bytes(out, kTrailer, sizeof(kTrailer));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t) + sizeof(kTrailer) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path + "' is not a checkpoint file");
  }
  if (std::memcmp(buf.data() + buf.size() - sizeof(kTrailer), kTrailer, sizeof(kTrailer)) != 0) {
    throw DataError("checkpoint '" + path + "' is corrupt or truncated (missing trailer)");
  }
  const std::size_t payload_end = buf.size() - sizeof(kTrailer) - sizeof(std::uint64_t);
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + payload_end, sizeof(stored_sum));
  const std::uint64_t actual_sum =
      fnv1a64(buf.data() + sizeof(kMagic), payload_end - sizeof(kMagic));
  if (stored_sum != actual_sum) {
    throw DataError("checkpoint '" + path + "' failed its integrity check");
  }

  std::string payload = buf.substr(sizeof(kMagic), payload_end - sizeof(kMagic));
  Reader r(payload, path);
  Checkpoint ckpt;
  ckpt.version = r.read<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw DataError("checkpoint '" + path + "' has format version " +
                    std::to_string(ckpt.version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  ckpt.config_hash = r.read<std::uint64_t>();
  ckpt.task = r.read_string();
  ckpt.config_text = r.read_string();
  const auto count = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.read_string();
    const auto ndim = r.read<std::uint32_t>();
    std::vector<int> dims;
    for (std::uint32_t d = 0; d < ndim; ++d) dims.push_back(r.read<std::int32_t>());
    Tensor t(dims);
    r.read_bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
    ckpt.blocks.emplace(name, std::move(t));
  }
  if (r.pos() != payload.size()) {
    throw DataError("checkpoint '" + path + "' carries trailing garbage");
  }
  return ckpt;
}

void require_config_match(const Checkpoint& ckpt, std::uint64_t expected_hash, bool force) {
  if (ckpt.config_hash == expected_hash) return;
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "checkpoint config hash %016llx does not match current config %016llx",
                static_cast<unsigned long long>(ckpt.config_hash),
                static_cast<unsigned long long>(expected_hash));
  if (!force) throw ConfigError(std::string(buf) + " (pass force to load anyway)");
}

Checkpoint make_checkpoint(const ParamStore& params, const std::string& task,
                           std::uint64_t config_hash, std::string config_text) {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  ckpt.task = task;
  ckpt.config_text = std::move(config_text);
  ckpt.blocks = params.blocks();
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, ParamStore& params) {
  for (auto& [name, t] : params.blocks()) {
    auto it = ckpt.blocks.find(name);
    if (it == ckpt.blocks.end()) {
      throw DataError("checkpoint lacks parameter block '" + name + "'");
    }
    if (!it->second.same_shape(t)) {
      throw DataError("checkpoint block '" + name + "' has shape " +
                      shape_str(it->second.dims()) + ", model expects " +
                      shape_str(t.dims()));
    }
    t = it->second;
  }
}

}  // namespace semcom
