#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semcom/config.hpp"
#include "semcom/data.hpp"
#include "semcom/jscc_decoders.hpp"
#include "semcom/jscc_encoder.hpp"
#include "semcom/rx_kb.hpp"
#include "semcom/task_kb.hpp"
#include "semcom/tx_kb.hpp"

namespace semcom {

// The assembled system for one experiment: transmitter KB, unified encoder,
// channel, receiver KB and both task decoders over one parameter store.
class Pipeline {
 public:
  explicit Pipeline(const ExperimentConfig& cfg);

  struct Forward {
    VarId image = -1;
    VarId selected = -1;  // transmitter-KB output f
    VarId signal = -1;    // power-normalized x as interleaved reals
    VarId received = -1;  // y as interleaved reals
    VarId rx_selected = -1;
    VarId output = -1;  // reconstruction [H,W,3] or logits [H,W,C]
    VarId loss = -1;    // the task loss proper
    // Training objective: the task loss plus a restoring term for pixels the
    // output clamp saturates; identical to `loss` whenever nothing saturates.
    VarId objective = -1;
    std::vector<std::pair<std::string, double>> norms;
  };

  // Builds the differentiable chain image -> tx KB -> encoder -> channel ->
  // rx KB -> decoder -> loss on the given tape. The channel draw is fixed by
  // ch.seed and enters as a constant (no gradient into the noise).
  Forward forward_loss(Graph& g, VarId image, const SegmentationMask* mask, TaskId task,
                       const ChannelConfig& ch, bool training = false,
                       Rng* dropout_rng = nullptr, int steps = 0) const;
  Forward forward_loss(Graph& g, const Tensor& image, const SegmentationMask* mask,
                       TaskId task, const ChannelConfig& ch, bool training = false,
                       Rng* dropout_rng = nullptr, int steps = 0) const;

  // eval-mode conveniences
  Tensor reconstruct(const Tensor& image, const ChannelConfig& ch, int steps = 0) const;
  Tensor segment_logits(const Tensor& image, const ChannelConfig& ch) const;
  SegmentationMask segment(const Tensor& image, const ChannelConfig& ch) const;
  ComplexSignal transmit_signal(const Tensor& image, TaskId task) const;

  const ExperimentConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const TaskKb& task_kb() const;
  const TxKb& tx_kb() const { return *tx_; }
  const JsccEncoder& encoder() const { return *encoder_; }
  const RxKb& rx_kb() const { return *rx_; }
  const ReconDecoder& recon_decoder() const { return *recon_; }
  const SegDecoder& seg_decoder() const { return *seg_; }
  const SignalLayout& layout() const { return encoder_->layout(); }
  std::uint64_t model_hash() const { return hash_; }
  std::string model_text() const { return model_text_; }

  DatasetSpec dataset_spec(Split split) const;

 private:
  ExperimentConfig cfg_;
  std::uint64_t hash_;
  std::string model_text_;
  ParamStore params_;
  std::unique_ptr<TxKb> tx_;
  std::unique_ptr<JsccEncoder> encoder_;
  std::unique_ptr<RxKb> rx_;
  std::unique_ptr<ReconDecoder> recon_;
  std::unique_ptr<SegDecoder> seg_;
  mutable std::unique_ptr<TaskKb> task_kb_;  // built on first use
};

// Raises NumericalError with the per-module norm dump when the loss is not finite.
void require_finite_loss(const Pipeline::Forward& fwd, const Graph& g,
                         const std::string& context);

}  // namespace semcom
