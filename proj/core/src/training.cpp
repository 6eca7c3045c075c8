#include "semcom/training.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "semcom/common.hpp"

namespace semcom {

AdamW::AdamW(double lr, double beta1, double beta2, double weight_decay, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("moment coefficients must lie in [0,1)");
  }
}

void AdamW::step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double decay = 1.0 - lr_ * weight_decay_;
  for (auto& [name, p] : params.blocks()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (!g.same_shape(p)) {
      throw Error("gradient for '" + name + "' has shape " + shape_str(g.dims()) +
                  ", parameter is " + shape_str(p.dims()));
    }
    Tensor& m = m_.try_emplace(name, Tensor::zeros(p.dims())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor::zeros(p.dims())).first->second;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] = p[i] * decay - lr_ * (mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

Trainer::Trainer(Pipeline& pipeline, TaskId task)
    : pipeline_(pipeline),
      task_(task),
      opt_(pipeline.config().lr, pipeline.config().beta1, pipeline.config().beta2,
           pipeline.config().weight_decay) {
  const auto& cfg = pipeline.config();
  if (cfg.snr_policy != "uniform" && cfg.snr_policy != "fixed") {
    throw ConfigError("train.snr_policy must be 'uniform' or 'fixed'");
  }
  if (cfg.snr_policy == "uniform" && !(cfg.snr_min <= cfg.snr_max)) {
    throw ConfigError("train SNR range is empty");
  }
}

double Trainer::train_step(const std::vector<Tensor>& images,
                           const std::vector<SegmentationMask>& masks,
                           std::uint64_t step_index) {
  const auto& cfg = pipeline_.config();
  const int batch = static_cast<int>(images.size());
  if (batch == 0) throw DataError("empty training batch");
  if (task_ == TaskId::SEGMENT && masks.size() != images.size()) {
    throw DataError("segmentation training requires one mask per image");
  }

  // one SNR draw per batch
  double snr_db = cfg.channel_snr_db;
  if (cfg.snr_policy == "uniform") {
    Rng step_rng(derive_seed(cfg.seed ^ 0xA5A5A5A5ull, step_index));
    snr_db = step_rng.uniform(cfg.snr_min, cfg.snr_max);
  }

  std::vector<std::map<std::string, Tensor>> grads(static_cast<std::size_t>(batch));
  std::vector<double> losses(static_cast<std::size_t>(batch), 0.0);

  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, batch));

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](int tid) {
    for (int i = tid; i < batch; i += threads) {
      try {
        Graph g;
        const ChannelConfig ch = cfg.channel_config(
            snr_db, derive_seed(cfg.seed ^ 0xC11A11ull, step_index,
                                static_cast<std::uint64_t>(i)));
        Rng dropout_rng(derive_seed(cfg.seed ^ 0xD80Full, step_index,
                                    static_cast<std::uint64_t>(i)));
        const SegmentationMask* mask =
            task_ == TaskId::SEGMENT ? &masks[static_cast<std::size_t>(i)] : nullptr;
        auto fwd = pipeline_.forward_loss(g, images[static_cast<std::size_t>(i)], mask,
                                          task_, ch, true, &dropout_rng);
        require_finite_loss(fwd, g, "at step " + std::to_string(step_index) + ", sample " +
                                        std::to_string(i) + ", snr_db " +
                                        std::to_string(snr_db));
        losses[static_cast<std::size_t>(i)] = g.value(fwd.loss)[0];
        g.backward(fwd.objective);
        auto& gm = grads[static_cast<std::size_t>(i)];
        for (const auto& [name, id] : g.named_params()) {
          if (g.has_grad(id)) gm.emplace(name, g.grad(id));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // reduce in sample order: results are independent of the thread count
  std::map<std::string, Tensor> total;
  const double inv = 1.0 / batch;
  for (int i = 0; i < batch; ++i) {
    for (const auto& [name, g] : grads[static_cast<std::size_t>(i)]) {
      auto [it, fresh] = total.try_emplace(name, Tensor::zeros(g.dims()));
      Tensor& acc = it->second;
      for (std::int64_t j = 0; j < g.size(); ++j) acc[j] += g[j];
    }
  }
  for (auto& [_, g] : total) {
    for (std::int64_t j = 0; j < g.size(); ++j) g[j] *= inv;
  }

  if (cfg.grad_clip > 0.0) {
    double norm_sq = 0.0;
    for (const auto& [_, g] : total) {
      for (std::int64_t j = 0; j < g.size(); ++j) norm_sq += g[j] * g[j];
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / norm;
      for (auto& [_, g] : total) {
        for (std::int64_t j = 0; j < g.size(); ++j) g[j] *= scale;
      }
    }
  }
  opt_.step(pipeline_.params(), total);

  double mean_loss = 0.0;
  for (double l : losses) mean_loss += l;
  return mean_loss * inv;
}

std::vector<EpochLog> Trainer::fit(const Dataset& train,
                                   const std::function<void(const EpochLog&)>& on_epoch) {
  const auto& cfg = pipeline_.config();
  std::vector<EpochLog> logs;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.lr_decay != 1.0) {
      opt_.set_lr(cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch - 1)));
    }
    const std::uint64_t epoch_seed = derive_seed(cfg.seed ^ 0xE69Cull,
                                                 static_cast<std::uint64_t>(epoch));
    const std::int64_t nb = train.num_batches(cfg.batch_size);
    double loss_sum = 0.0;
    for (std::int64_t b = 0; b < nb; ++b) {
      Dataset::Batch batch = train.load_batch(cfg.batch_size, b, epoch_seed);
      if (cfg.flip_augment) {
        Rng flip_rng(derive_seed(epoch_seed ^ 0xF11Bull, static_cast<std::uint64_t>(b)));
        for (std::size_t i = 0; i < batch.images.size(); ++i) {
          if (flip_rng.uniform() >= 0.5) continue;
          Tensor& img = batch.images[i];
          const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
          for (int y = 0; y < H; ++y)
            for (int x = 0; x < W / 2; ++x)
              for (int c = 0; c < C; ++c) std::swap(img.at(y, x, c), img.at(y, W - 1 - x, c));
          if (i < batch.masks.size()) {
            SegmentationMask& m = batch.masks[i];
            for (int y = 0; y < H; ++y)
              for (int x = 0; x < W / 2; ++x) std::swap(m.at(y, x), m.at(y, W - 1 - x));
          }
        }
      }
      loss_sum += train_step(batch.images, batch.masks, step++);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(nb);
    log.lr = opt_.lr();
    log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

}  // namespace semcom
