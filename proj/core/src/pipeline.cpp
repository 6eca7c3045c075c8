#include "semcom/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "semcom/common.hpp"

namespace semcom {

Pipeline::Pipeline(const ExperimentConfig& cfg)
    : cfg_(cfg),
      hash_(config_hash(cfg)),
      model_text_(canonical_model_text(cfg)),
      params_(cfg.seed) {
  const int hw = cfg.image_size;
  tx_ = std::make_unique<TxKb>(params_, "txkb", cfg.extractor, hw, hw);
  encoder_ = std::make_unique<JsccEncoder>(params_, "encoder", cfg.encoder, hw, hw,
                                           tx_->selected_shape());
  rx_ = std::make_unique<RxKb>(params_, "rxkb", cfg.rxkb, encoder_->layout());
  recon_ = std::make_unique<ReconDecoder>(params_, "recon", cfg.recon, encoder_->layout(),
                                          hw, hw, cfg.rxkb.channels);
  SegDecoderConfig seg_cfg = cfg.seg;
  seg_cfg.num_classes = cfg.seg_classes();
  seg_ = std::make_unique<SegDecoder>(params_, "seg", seg_cfg, encoder_->layout(), hw, hw,
                                      cfg.rxkb.channels);
}

const TaskKb& Pipeline::task_kb() const {
  if (!task_kb_) {
    std::shared_ptr<const Embedder> embedder;
    if (cfg_.kb_embedder == "hashing") {
      embedder = std::make_shared<HashingEmbedder>(cfg_.kb_embed_dim);
    } else if (cfg_.kb_embedder == "http") {
      if (cfg_.kb_embedder_url.empty()) {
        throw ConfigError("kb.embedder = http requires kb.embedder_url");
      }
      embedder = std::make_shared<HttpEmbedder>(cfg_.kb_embedder_url, cfg_.kb_embed_dim);
    } else {
      throw ConfigError("unknown kb.embedder '" + cfg_.kb_embedder + "'");
    }
    if (cfg_.kb_memory_file.empty()) {
      task_kb_ = std::make_unique<TaskKb>(TaskKb::default_memory(), embedder);
    } else {
      task_kb_ = std::make_unique<TaskKb>(TaskKb::from_memory_file(cfg_.kb_memory_file, embedder));
    }
  }
  return *task_kb_;
}

Pipeline::Forward Pipeline::forward_loss(Graph& g, VarId image, const SegmentationMask* mask,
                                         TaskId task, const ChannelConfig& ch, bool training,
                                         Rng* dropout_rng, int steps) const {
  Forward f;
  f.image = image;
  f.selected = tx_->forward(g, image, task);
  f.signal = encoder_->forward(g, image, f.selected);

  const ChannelRealization real = sample_channel(
      static_cast<std::size_t>(encoder_->layout().symbol_count()), ch);
  Tensor noise({static_cast<int>(real.noise_reals.size())}, real.noise_reals);
  f.received = g.complex_affine(f.signal, real.h_re, real.h_im, std::move(noise));

  RxKb::Features rx = rx_->generate(g, f.received);
  f.rx_selected = rx_->select(g, task, rx.g1, rx.g2);

  if (task == TaskId::RECONSTRUCT) {
    VarId pre_clamp = -1;
    f.output = recon_->forward(g, f.received, f.rx_selected, steps, &pre_clamp);
    f.loss = g.mse(f.output, image);
    // mse(pre, clamp(pre)) vanishes inside [0,1] and pulls saturated pixels
    // back toward the box, so the clamp never becomes an absorbing state
    VarId escape = g.mse(pre_clamp, g.clamp01(pre_clamp));
    f.objective = g.add(f.loss, escape);
  } else {
    f.output = seg_->forward(g, f.received, f.rx_selected, training, dropout_rng);
    if (mask != nullptr) {
      const Tensor& logits = g.value(f.output);
      const int H = logits.dim(0), W = logits.dim(1), C = logits.dim(2);
      auto labels = std::make_shared<std::vector<int>>();
      labels->reserve(static_cast<std::size_t>(H) * W);
      if (mask->height != H || mask->width != W) {
        throw Error("mask " + std::to_string(mask->height) + "x" +
                    std::to_string(mask->width) + " does not match the image grid");
      }
      for (auto v : mask->labels) labels->push_back(static_cast<int>(v));
      VarId flat = g.reshape(f.output, {H * W, C});
      f.loss = g.softmax_cross_entropy(flat, labels, kIgnoreLabel);
      f.objective = f.loss;
    }
  }

  f.norms = {
      {"txkb.selected", g.value(f.selected).l2_norm()},
      {"encoder.signal", g.value(f.signal).l2_norm()},
      {"channel.received", g.value(f.received).l2_norm()},
      {"rxkb.selected", g.value(f.rx_selected).l2_norm()},
      {"decoder.output", g.value(f.output).l2_norm()},
  };
  return f;
}

Pipeline::Forward Pipeline::forward_loss(Graph& g, const Tensor& image,
                                         const SegmentationMask* mask, TaskId task,
                                         const ChannelConfig& ch, bool training,
                                         Rng* dropout_rng, int steps) const {
  return forward_loss(g, g.constant(image), mask, task, ch, training, dropout_rng, steps);
}

Tensor Pipeline::reconstruct(const Tensor& image, const ChannelConfig& ch, int steps) const {
  Graph g;
  Forward f = forward_loss(g, image, nullptr, TaskId::RECONSTRUCT, ch, false, nullptr, steps);
  return g.value(f.output);
}

Tensor Pipeline::segment_logits(const Tensor& image, const ChannelConfig& ch) const {
  Graph g;
  Forward f = forward_loss(g, image, nullptr, TaskId::SEGMENT, ch, false, nullptr);
  return g.value(f.output);
}

SegmentationMask Pipeline::segment(const Tensor& image, const ChannelConfig& ch) const {
  return argmax_mask(segment_logits(image, ch));
}

ComplexSignal Pipeline::transmit_signal(const Tensor& image, TaskId task) const {
  FeatureMap f = tx_->process(image, task);
  return encoder_->encode(image, f);
}

DatasetSpec Pipeline::dataset_spec(Split split) const {
  DatasetSpec spec;
  spec.split = split;
  spec.resize = 0;
  spec.num_classes = cfg_.seg_classes();
  if (cfg_.data_kind == "synthetic") {
    spec.kind = DatasetKind::synthetic;
    spec.synth.image_size = cfg_.image_size;
    spec.synth.num_classes = cfg_.seg_classes();
    spec.synth.train_count = cfg_.train_count;
    spec.synth.val_count = cfg_.val_count;
    spec.synth.shapes_min = cfg_.shapes_min;
    spec.synth.shapes_max = cfg_.shapes_max;
    spec.synth.texture = cfg_.texture;
    spec.synth.seed = cfg_.seed;
  } else if (cfg_.data_kind == "folder") {
    spec.kind = DatasetKind::folder;
    spec.root = cfg_.data_root;
    spec.resize = cfg_.image_size;
    if (spec.root.empty()) throw ConfigError("data.kind = folder requires data.root");
  } else {
    throw ConfigError("unknown data.kind '" + cfg_.data_kind + "'");
  }
  spec.require_masks = !cfg_.task.empty() && task_id_from_string(cfg_.task) == TaskId::SEGMENT;
  return spec;
}

void require_finite_loss(const Pipeline::Forward& fwd, const Graph& g,
                         const std::string& context) {
  const double loss = g.value(fwd.loss)[0];
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << "non-finite loss (" << loss << ") " << context << "; module output norms:";
  for (const auto& [name, norm] : fwd.norms) os << " " << name << "=" << norm;
  throw NumericalError(os.str());
}

}  // namespace semcom
