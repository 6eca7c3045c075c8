#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/jscc_decoders.hpp"
#include "semcom/jscc_encoder.hpp"
#include "semcom/tx_kb.hpp"

namespace semcom {

// Whole-experiment configuration. File format: `key = value` lines with
// dotted section keys; '#' starts a comment. Any key can be overridden by an
// environment variable SEMCOM_<KEY> with '.' spelled as '__' (upper-case).
struct ExperimentConfig {
  std::string task;  // RECONSTRUCT or SEGMENT; required by training
  std::uint64_t seed = 7;

  // data
  std::string data_kind = "synthetic";  // synthetic | folder
  std::string data_root;
  int image_size = 32;
  int num_classes = 3;
  int train_count = 512;
  int val_count = 64;
  int shapes_min = 1;
  int shapes_max = 2;
  double texture = 0.08;

  // model
  ExtractorConfig extractor{.patch_size = 2,
                            .window_size = 4,
                            .embed_dim = 16,
                            .attention_heads = 2,
                            .depths = {1, 1, 1},
                            .shifted_windows = false,
                            .mlp_ratio = 4.0};
  EncoderConfig encoder{.hidden_dim = 16,
                        .kernel = 3,
                        .strides = {2},
                        .out_channels = 8,
                        .bits_per_symbol = 8.0};
  RxKbConfig rxkb{.channels = 32, .kernel = 3};
  ReconDecoderConfig recon{.depth = 2,
                           .patch_size = 2,
                           .attention_heads = 4,
                           .embed_dim = 48,
                           .refine_steps = 4,
                           .up_channels = 12};
  SegDecoderConfig seg{.channels = 32, .kernel = 3, .dropout = 0.1, .num_classes = 0};
  // seg.num_classes = 0 tracks data.classes; a positive value pins it

  // channel
  std::string channel_mode = "awgn";
  double channel_snr_db = 10.0;
  bool channel_noiseless = false;
  bool channel_equalize = false;

  // training
  double lr = 1e-4;
  double lr_decay = 1.0;  // per-epoch multiplier
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  int epochs = 30;
  int batch_size = 16;
  std::string snr_policy = "uniform";  // uniform | fixed
  double snr_min = 0.0;
  double snr_max = 20.0;
  double grad_clip = 1.0;  // global-norm clip; 0 disables
  int threads = 0;         // 0 = hardware concurrency
  bool flip_augment = false;

  // evaluation
  std::vector<double> eval_snr_list = {0.0, 6.0, 12.0, 18.0};
  int eval_refine_steps = 0;  // 0 = trained K
  int visualize_count = 0;

  // task KB
  std::string kb_memory_file;
  std::string kb_embedder = "hashing";  // hashing | http
  std::string kb_embedder_url;
  int kb_embed_dim = 256;

  ChannelConfig channel_config(double snr_db, std::uint64_t seed) const;
  int seg_classes() const { return seg.num_classes > 0 ? seg.num_classes : num_classes; }
};

ExperimentConfig parse_config_file(const std::string& path);
// parse from in-memory text (context names the source in diagnostics)
ExperimentConfig parse_config_text(const std::string& text, const std::string& context);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void apply_env_overrides(ExperimentConfig& cfg);

// full canonical dump: every key, sorted
std::string serialize_config(const ExperimentConfig& cfg);
// canonical text of the architecture-determining keys
std::string canonical_model_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::vector<std::string> config_key_names();

}  // namespace semcom
