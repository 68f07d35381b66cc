#pragma once

#include <memory>
#include <span>
#include <vector>

#include "clrep/common/rng.hpp"
#include "clrep/data/task_stream.hpp"

namespace clrep::data {

// SSL-style augmentation recipe. Two-view objectives use the full pipeline;
// the CE family keeps crop+flip only. view_count 0 means "evaluation":
// normalization only.
struct AugmentationPolicy {
  int view_count = 1;
  bool random_crop = true;
  double crop_scale_min = 0.2;
  double crop_scale_max = 1.0;
  double hflip_prob = 0.5;
  double jitter_prob = 0.8;
  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;
  double jitter_hue = 0.1;
  double grayscale_prob = 0.2;
  std::array<double, 3> norm_mean{0.5, 0.5, 0.5};
  std::array<double, 3> norm_std{0.25, 0.25, 0.25};

  static AugmentationPolicy two_view(const DatasetInfo& d);
  static AugmentationPolicy single_view_ce(const DatasetInfo& d);
  static AugmentationPolicy evaluation(const DatasetInfo& d);

  void validate(bool needs_two_views) const;
};

// A batch of augmented views sharing one label vector.
struct LabeledBatch {
  std::vector<ImageBatchF> views;
  VecI labels;

  int view_count() const { return static_cast<int>(views.size()); }
};

// Samples from one task: the backing split plus the indices that fall in the
// task's class set. Immutable once built; safe to share.
class TaskDataView {
 public:
  TaskDataView(TaskSpec task, std::shared_ptr<const ImageSet> set);

  static TaskDataView open(const TaskSpec& task, const std::string& data_root = "");

  const TaskSpec& task() const { return task_; }
  const ImageSet& images() const { return *set_; }
  int size() const { return static_cast<int>(indices_.size()); }
  int sample_index(int i) const { return indices_[static_cast<std::size_t>(i)]; }
  int label(int i) const { return set_->labels[static_cast<std::size_t>(sample_index(i))]; }

  // Deterministically drop all but `cap` samples (desk-profile subsampling).
  void subsample(int cap, RngStream rng);

 private:
  TaskSpec task_;
  std::shared_ptr<const ImageSet> set_;
  std::vector<int> indices_;
};

// Augment the given view-local indices into a batch. Pure function of the rng
// state: replaying the same stream yields a bit-identical batch.
LabeledBatch assemble_batch(const TaskDataView& view, std::span<const int> local_indices,
                            const AugmentationPolicy& policy, RngStream& rng);

// Spec-level convenience: draw batch_size samples without replacement.
LabeledBatch make_batch(const TaskDataView& view, const AugmentationPolicy& policy, int batch_size,
                        RngStream& rng);

// Normalization-only transform of a whole set slice (for feature extraction).
ImageBatchF normalized_images(const ImageSet& set, std::span<const int> indices,
                              const AugmentationPolicy& policy);

}  // namespace clrep::data
