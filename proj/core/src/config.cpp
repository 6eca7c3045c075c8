#include "semcom/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "semcom/common.hpp"

namespace semcom {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KeyDef {
  std::string key;
  bool model_affecting = false;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double x = std::stod(v, &used);
  if (trim(v.substr(used)).size()) throw std::invalid_argument(v);
  return x;
}

int parse_int(const std::string& v) {
  std::size_t used = 0;
  int x = std::stoi(v, &used);
  if (trim(v.substr(used)).size()) throw std::invalid_argument(v);
  return x;
}

std::uint64_t parse_u64(const std::string& v) { return std::stoull(v); }

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(v);
}

std::vector<double> parse_double_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item));
  }
  if (out.empty()) throw std::invalid_argument(v);
  return out;
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  for (double d : parse_double_list(v)) out.push_back(static_cast<int>(d));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt(v[i]);
  }
  return s;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

#define KEY_NUM(name, field, model)                                            \
  {name, model,                                                                \
   [](ExperimentConfig& c, const std::string& v) { c.field = parse_double(v); }, \
   [](const ExperimentConfig& c) { return fmt(c.field); }}
#define KEY_INT(name, field, model)                                          \
  {name, model,                                                              \
   [](ExperimentConfig& c, const std::string& v) { c.field = parse_int(v); }, \
   [](const ExperimentConfig& c) { return std::to_string(c.field); }}
#define KEY_BOOL(name, field, model)                                          \
  {name, model,                                                               \
   [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
   [](const ExperimentConfig& c) { return c.field ? "true" : "false"; }}
#define KEY_STR(name, field, model)                                  \
  {name, model, [](ExperimentConfig& c, const std::string& v) { c.field = v; }, \
   [](const ExperimentConfig& c) { return c.field; }}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> defs = {
      KEY_STR("task", task, false),
      {"seed", false,
       [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},

      KEY_STR("data.kind", data_kind, false),
      KEY_STR("data.root", data_root, false),
      KEY_INT("data.image_size", image_size, true),
      KEY_INT("data.classes", num_classes, true),
      KEY_INT("data.train_count", train_count, false),
      KEY_INT("data.val_count", val_count, false),
      KEY_INT("data.shapes_min", shapes_min, false),
      KEY_INT("data.shapes_max", shapes_max, false),
      KEY_NUM("data.texture", texture, false),

      KEY_INT("model.extractor.patch_size", extractor.patch_size, true),
      KEY_INT("model.extractor.window_size", extractor.window_size, true),
      KEY_INT("model.extractor.embed_dim", extractor.embed_dim, true),
      KEY_INT("model.extractor.heads", extractor.attention_heads, true),
      {"model.extractor.depths", true,
       [](ExperimentConfig& c, const std::string& v) {
         const auto d = parse_int_list(v);
         if (d.size() != 3) throw std::invalid_argument(v);
         std::copy(d.begin(), d.end(), c.extractor.depths.begin());
       },
       [](const ExperimentConfig& c) {
         return fmt_list(std::vector<int>(c.extractor.depths.begin(), c.extractor.depths.end()));
       }},
      KEY_BOOL("model.extractor.shifted", extractor.shifted_windows, true),
      KEY_NUM("model.extractor.mlp_ratio", extractor.mlp_ratio, true),

      KEY_INT("model.encoder.hidden_dim", encoder.hidden_dim, true),
      KEY_INT("model.encoder.kernel", encoder.kernel, true),
      {"model.encoder.strides", true,
       [](ExperimentConfig& c, const std::string& v) { c.encoder.strides = parse_int_list(v); },
       [](const ExperimentConfig& c) { return fmt_list(c.encoder.strides); }},
      KEY_INT("model.encoder.out_channels", encoder.out_channels, true),
      KEY_NUM("model.encoder.bits_per_symbol", encoder.bits_per_symbol, false),

      KEY_INT("model.rxkb.channels", rxkb.channels, true),
      KEY_INT("model.rxkb.kernel", rxkb.kernel, true),

      KEY_INT("model.recon.depth", recon.depth, true),
      KEY_INT("model.recon.patch_size", recon.patch_size, true),
      KEY_INT("model.recon.heads", recon.attention_heads, true),
      KEY_INT("model.recon.embed_dim", recon.embed_dim, true),
      KEY_INT("model.recon.refine_steps", recon.refine_steps, true),
      KEY_INT("model.recon.up_channels", recon.up_channels, true),

      KEY_INT("model.seg.channels", seg.channels, true),
      KEY_INT("model.seg.kernel", seg.kernel, true),
      KEY_NUM("model.seg.dropout", seg.dropout, false),
      KEY_INT("model.seg.classes", seg.num_classes, true),

      KEY_STR("channel.mode", channel_mode, false),
      KEY_NUM("channel.snr_db", channel_snr_db, false),
      KEY_BOOL("channel.noiseless", channel_noiseless, false),
      KEY_BOOL("channel.equalize", channel_equalize, false),

      KEY_NUM("train.lr", lr, false),
      KEY_NUM("train.lr_decay", lr_decay, false),
      KEY_NUM("train.beta1", beta1, false),
      KEY_NUM("train.beta2", beta2, false),
      KEY_NUM("train.weight_decay", weight_decay, false),
      KEY_INT("train.epochs", epochs, false),
      KEY_INT("train.batch_size", batch_size, false),
      KEY_STR("train.snr_policy", snr_policy, false),
      KEY_NUM("train.snr_min", snr_min, false),
      KEY_NUM("train.snr_max", snr_max, false),
      KEY_NUM("train.grad_clip", grad_clip, false),
      KEY_INT("train.threads", threads, false),
      KEY_BOOL("train.flip_augment", flip_augment, false),

      {"eval.snr_list", false,
       [](ExperimentConfig& c, const std::string& v) { c.eval_snr_list = parse_double_list(v); },
       [](const ExperimentConfig& c) { return fmt_list(c.eval_snr_list); }},
      KEY_INT("eval.refine_steps", eval_refine_steps, false),
      KEY_INT("eval.visualize_count", visualize_count, false),

      KEY_STR("kb.memory_file", kb_memory_file, false),
      KEY_STR("kb.embedder", kb_embedder, false),
      KEY_STR("kb.embedder_url", kb_embedder_url, false),
      KEY_INT("kb.embed_dim", kb_embed_dim, false),
  };
  return defs;
}

#undef KEY_NUM
#undef KEY_INT
#undef KEY_BOOL
#undef KEY_STR

const KeyDef* find_key(const std::string& key) {
  for (const auto& def : registry()) {
    if (def.key == key) return &def;
  }
  return nullptr;
}

}  // namespace

ChannelConfig ExperimentConfig::channel_config(double snr_db, std::uint64_t ch_seed) const {
  ChannelConfig ch;
  ch.mode = fading_mode_from_string(channel_mode);
  ch.snr_db = snr_db;
  ch.noiseless = channel_noiseless;
  ch.equalize = channel_equalize;
  ch.seed = ch_seed;
  return ch;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const KeyDef* def = find_key(key);
  if (def == nullptr) throw ConfigError("unknown config key '" + key + "'");
  try {
    def->set(cfg, value);
  } catch (const std::exception&) {
    throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& context) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(context + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_line(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(context + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  for (const auto& def : registry()) {
    std::string env_name = "SEMCOM_";
    for (char ch : def.key) {
      if (ch == '.') {
        env_name += "__";
      } else {
        env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      }
    }
    if (const char* v = std::getenv(env_name.c_str())) {
      try {
        def.set(cfg, v);
      } catch (const std::exception&) {
        throw ConfigError("invalid value '" + std::string(v) + "' in environment variable " +
                          env_name);
      }
    }
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  for (const auto& def : registry()) lines.push_back(def.key + " = " + def.get(cfg));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::string canonical_model_text(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  for (const auto& def : registry()) {
    if (def.model_affecting) lines.push_back(def.key + " = " + def.get(cfg));
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(canonical_model_text(cfg));
}

std::vector<std::string> config_key_names() {
  std::vector<std::string> names;
  for (const auto& def : registry()) names.push_back(def.key);
  return names;
}

}  // namespace semcom
