#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "clrep/nn/mlp.hpp"
#include "clrep/nn/resnet.hpp"

namespace clrep::nn {

// Where classification heads read from. SL uses backbone features; SL+MLP and
// t-ReX put the (train-only) projector in front of the head.
enum class HeadInput { backbone_features, projector_output };
enum class HeadKind { linear, cosine };

constexpr std::string_view to_string(HeadInput h) {
  return h == HeadInput::backbone_features ? "backbone_features" : "projector_output";
}
constexpr std::string_view to_string(HeadKind k) { return k == HeadKind::linear ? "linear" : "cosine"; }

struct ModelConfig {
  EncoderConfig encoder;
  ProjectorConfig projector;
  HeadInput head_input = HeadInput::backbone_features;
  HeadKind head_kind = HeadKind::linear;
  double cosine_tau = 0.1;  // cosine heads only

  void validate() const {
    encoder.validate();
    projector.validate();
    require(head_input == HeadInput::backbone_features || projector.enabled,
            Errc::validation_error, "projector-fed heads need an enabled projector");
    require(cosine_tau > 0.0, Errc::validation_error, "cosine_tau must be > 0");
  }
};

// Backbone + optional projector + per-task heads. Evaluation-time features are
// always raw backbone outputs; projector and heads exist only for training
// losses and are discarded by every metric path.
class ModelState {
 public:
  ModelState() = default;
  ModelState(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.encoder.feature_dim(); }
  int head_input_dim() const {
    return cfg_.head_input == HeadInput::projector_output ? cfg_.projector.output_dim
                                                          : feature_dim();
  }
  bool has_projector() const { return projector_.has_value(); }
  int task_index() const { return task_index_; }
  void set_task_index(int t) { task_index_ = t; }

  // ----- evaluation-mode forwards (const: no caches, BN running stats) -----
  // B×feature_dim, one row per sample; the single path every metric consumes.
  MatF forward_features(const data::ImageBatchF& images) const;
  // B×output_dim; l2-normalized rows iff the projector is configured so.
  MatF forward_projected(const data::ImageBatchF& images) const;
  // B×classes logits of one head, or of all heads concatenated in task order.
  MatF forward_logits(const data::ImageBatchF& images, int task_id) const;
  MatF forward_logits_all(const data::ImageBatchF& images) const;

  // Column-major (dim × batch) eval helpers used by the training loop for
  // snapshot branches.
  MatF backbone_infer(const data::ImageBatchF& images) const;
  MatF projector_infer(const MatF& features) const;
  MatF head_input_infer(const data::ImageBatchF& images) const;
  MatF head_logits_infer(const MatF& head_input, int task_id) const;

  // ----- training-mode forwards/backwards (caching) -----
  MatF backbone_train(const data::ImageBatchF& images);
  void backbone_backward(const MatF& gfeatures);
  MatF projector_train(const MatF& features);
  MatF projector_backward(const MatF& gprojected);
  MatF head_train(int task_id, const MatF& head_input);   // linear heads
  MatF head_backward(int task_id, const MatF& glogits);

  // ----- heads -----
  void add_head(int task_id, int classes, RngStream& rng);
  bool has_head(int task_id) const { return heads_.count(task_id) != 0; }
  std::vector<int> head_task_ids() const;
  Linear<float>& head(int task_id);
  const Linear<float>& head(int task_id) const;

  // ----- parameters -----
  // Trainable parameter refs for the optimizer; heads restricted to head_ids.
  ParamList<float> trainable_params(const std::vector<int>& head_ids);
  // Everything, including BN buffers (checkpointing, poisoning tests).
  ParamList<float> named_params();

  void save_checkpoint(const std::string& path) const;
  static ModelState load_checkpoint(const std::string& path);

 private:
  ModelConfig cfg_;
  int task_index_ = -1;
  ResNetBackbone<float> backbone_;
  std::optional<ProjectorMLP<float>> projector_;
  std::map<int, Linear<float>> heads_;
  std::map<int, int> head_classes_;
};

// Immutable deep copy taken at a task boundary; safe to share across threads
// because only const (cache-free) forwards are reachable.
class FrozenSnapshot {
 public:
  FrozenSnapshot() = default;
  explicit FrozenSnapshot(const ModelState& state)
      : state_(std::make_shared<const ModelState>(state)) {}

  bool valid() const { return state_ != nullptr; }
  const ModelState& model() const {
    require(valid(), Errc::missing_snapshot, "no snapshot available");
    return *state_;
  }

 private:
  std::shared_ptr<const ModelState> state_;
};

inline FrozenSnapshot snapshot(const ModelState& state) { return FrozenSnapshot(state); }

}  // namespace clrep::nn
