#include "clrep/data/augment.hpp"

#include <algorithm>
#include <cmath>

namespace clrep::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct FloatImage {
  std::vector<float> px;  // CHW
  int c, h, w;
  float& at(int ch, int y, int x) { return px[static_cast<std::size_t>((ch * h + y) * w + x)]; }
  float at(int ch, int y, int x) const { return px[static_cast<std::size_t>((ch * h + y) * w + x)]; }
};

FloatImage to_float(const ImageSet& set, int index) {
  FloatImage img{std::vector<float>(static_cast<std::size_t>(set.sample_size())), set.channels,
                 set.height, set.width};
  const std::uint8_t* src = set.sample(index);
  for (int i = 0; i < set.sample_size(); ++i)
    img.px[static_cast<std::size_t>(i)] = static_cast<float>(src[i]) / 255.0f;
  return img;
}

// Bilinear sample with clamped borders; coordinates in source pixel space.
float sample_bilinear(const FloatImage& img, int ch, float y, float x) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.w - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.h - 1);
  const int x1 = std::min(x0 + 1, img.w - 1);
  const int y1 = std::min(y0 + 1, img.h - 1);
  const float fx = std::clamp(x - static_cast<float>(x0), 0.0f, 1.0f);
  const float fy = std::clamp(y - static_cast<float>(y0), 0.0f, 1.0f);
  const float top = img.at(ch, y0, x0) * (1 - fx) + img.at(ch, y0, x1) * fx;
  const float bot = img.at(ch, y1, x0) * (1 - fx) + img.at(ch, y1, x1) * fx;
  return top * (1 - fy) + bot * fy;
}

// Random resized crop (area scale + aspect jitter as in the standard SSL
// pipeline), resized back to the native resolution.
FloatImage random_resized_crop(const FloatImage& img, double scale_min, double scale_max,
                               RngStream& rng) {
  const double area = static_cast<double>(img.h) * img.w;
  double crop_w = img.w, crop_h = img.h;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale_min, scale_max);
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    const double cw = std::sqrt(target * ratio);
    const double ch = std::sqrt(target / ratio);
    if (cw <= img.w && ch <= img.h) {
      crop_w = cw;
      crop_h = ch;
      break;
    }
  }
  const double x0 = rng.uniform(0.0, static_cast<double>(img.w) - crop_w);
  const double y0 = rng.uniform(0.0, static_cast<double>(img.h) - crop_h);

  FloatImage out{std::vector<float>(img.px.size()), img.c, img.h, img.w};
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const float sy = static_cast<float>(y0 + (y + 0.5) * crop_h / img.h - 0.5);
        const float sx = static_cast<float>(x0 + (x + 0.5) * crop_w / img.w - 0.5);
        out.at(ch, y, x) = sample_bilinear(img, ch, sy, sx);
      }
  return out;
}

void hflip(FloatImage& img) {
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w / 2; ++x) std::swap(img.at(ch, y, x), img.at(ch, y, img.w - 1 - x));
}

float luma(const FloatImage& img, int y, int x) {
  return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

// Brightness, contrast, saturation, hue in that fixed order. Hue rotates the
// chroma plane in YIQ space, which matches the usual small-angle jitter.
void color_jitter(FloatImage& img, const AugmentationPolicy& p, RngStream& rng) {
  const float b = static_cast<float>(rng.uniform(1.0 - p.jitter_brightness, 1.0 + p.jitter_brightness));
  const float c = static_cast<float>(rng.uniform(1.0 - p.jitter_contrast, 1.0 + p.jitter_contrast));
  const float s = static_cast<float>(rng.uniform(1.0 - p.jitter_saturation, 1.0 + p.jitter_saturation));
  const float hue_angle = static_cast<float>(rng.uniform(-p.jitter_hue, p.jitter_hue) * 2.0 * kPi);

  for (auto& v : img.px) v = std::clamp(v * b, 0.0f, 1.0f);

  float mean = 0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) mean += luma(img, y, x);
  mean /= static_cast<float>(img.h * img.w);
  for (auto& v : img.px) v = std::clamp(mean + (v - mean) * c, 0.0f, 1.0f);

  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float g = luma(img, y, x);
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, y, x) = std::clamp(g + (img.at(ch, y, x) - g) * s, 0.0f, 1.0f);
    }

  if (hue_angle != 0.0f) {
    const float cosa = std::cos(hue_angle), sina = std::sin(hue_angle);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const float r = img.at(0, y, x), g = img.at(1, y, x), bl = img.at(2, y, x);
        const float yy = 0.299f * r + 0.587f * g + 0.114f * bl;
        const float ii = 0.596f * r - 0.274f * g - 0.322f * bl;
        const float qq = 0.211f * r - 0.523f * g + 0.312f * bl;
        const float ir = ii * cosa - qq * sina;
        const float qr = ii * sina + qq * cosa;
        img.at(0, y, x) = std::clamp(yy + 0.956f * ir + 0.621f * qr, 0.0f, 1.0f);
        img.at(1, y, x) = std::clamp(yy - 0.272f * ir - 0.647f * qr, 0.0f, 1.0f);
        img.at(2, y, x) = std::clamp(yy - 1.106f * ir + 1.703f * qr, 0.0f, 1.0f);
      }
  }
}

void to_grayscale(FloatImage& img) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float g = luma(img, y, x);
      for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = g;
    }
}

void augment_one(FloatImage& img, const AugmentationPolicy& p, RngStream& rng) {
  if (p.random_crop) img = random_resized_crop(img, p.crop_scale_min, p.crop_scale_max, rng);
  if (rng.bernoulli(p.hflip_prob)) hflip(img);
  if (p.jitter_prob > 0.0 && rng.bernoulli(p.jitter_prob)) color_jitter(img, p, rng);
  if (p.grayscale_prob > 0.0 && rng.bernoulli(p.grayscale_prob)) to_grayscale(img);
}

void normalize_into(const FloatImage& img, const AugmentationPolicy& p, float* dst) {
  const int plane = img.h * img.w;
  for (int ch = 0; ch < img.c; ++ch) {
    const float mean = static_cast<float>(p.norm_mean[static_cast<std::size_t>(ch)]);
    const float inv_std = 1.0f / static_cast<float>(p.norm_std[static_cast<std::size_t>(ch)]);
    for (int i = 0; i < plane; ++i)
      dst[ch * plane + i] = (img.px[static_cast<std::size_t>(ch * plane + i)] - mean) * inv_std;
  }
}

}  // namespace

AugmentationPolicy AugmentationPolicy::two_view(const DatasetInfo& d) {
  AugmentationPolicy p;
  p.view_count = 2;
  p.norm_mean = d.norm_mean;
  p.norm_std = d.norm_std;
  return p;
}

AugmentationPolicy AugmentationPolicy::single_view_ce(const DatasetInfo& d) {
  AugmentationPolicy p;
  p.view_count = 1;
  p.crop_scale_min = 0.6;
  p.jitter_prob = 0.0;
  p.grayscale_prob = 0.0;
  p.norm_mean = d.norm_mean;
  p.norm_std = d.norm_std;
  return p;
}

AugmentationPolicy AugmentationPolicy::evaluation(const DatasetInfo& d) {
  AugmentationPolicy p;
  p.view_count = 1;
  p.random_crop = false;
  p.hflip_prob = 0.0;
  p.jitter_prob = 0.0;
  p.grayscale_prob = 0.0;
  p.norm_mean = d.norm_mean;
  p.norm_std = d.norm_std;
  return p;
}

void AugmentationPolicy::validate(bool needs_two_views) const {
  require(view_count == 1 || view_count == 2, Errc::validation_error, "view_count must be 1 or 2");
  require(!needs_two_views || view_count == 2, Errc::validation_error,
          "this objective requires a two-view augmentation policy");
  require(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0,
          Errc::validation_error, "bad crop scale range");
}

TaskDataView::TaskDataView(TaskSpec task, std::shared_ptr<const ImageSet> set)
    : task_(std::move(task)), set_(std::move(set)) {
  indices_ = task_sample_indices(task_, *set_);
}

TaskDataView TaskDataView::open(const TaskSpec& task, const std::string& data_root) {
  auto set = DatasetRegistry::instance().load(task.dataset_name, task.split, data_root);
  return TaskDataView(task, std::move(set));
}

void TaskDataView::subsample(int cap, RngStream rng) {
  if (cap <= 0 || static_cast<int>(indices_.size()) <= cap) return;
  const auto perm = rng.permutation(static_cast<int>(indices_.size()));
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(cap));
  for (int i = 0; i < cap; ++i) kept.push_back(indices_[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  std::sort(kept.begin(), kept.end());
  indices_ = std::move(kept);
}

LabeledBatch assemble_batch(const TaskDataView& view, std::span<const int> local_indices,
                            const AugmentationPolicy& policy, RngStream& rng) {
  require(view.size() > 0, Errc::empty_task,
          "task " + std::to_string(view.task().task_id) + " has no samples");
  const ImageSet& set = view.images();
  const int b = static_cast<int>(local_indices.size());
  const int sample_size = set.sample_size();

  LabeledBatch batch;
  batch.labels.resize(b);
  batch.views.resize(static_cast<std::size_t>(policy.view_count));
  for (auto& v : batch.views) {
    v.channels = set.channels;
    v.height = set.height;
    v.width = set.width;
    v.data.resize(sample_size, b);
  }

  for (int i = 0; i < b; ++i) {
    const int local = local_indices[static_cast<std::size_t>(i)];
    require(local >= 0 && local < view.size(), Errc::shape_mismatch, "batch index out of range");
    const int global = view.sample_index(local);
    batch.labels[i] = set.labels[static_cast<std::size_t>(global)];
    const FloatImage base = to_float(set, global);
    for (int v = 0; v < policy.view_count; ++v) {
      FloatImage img = base;
      augment_one(img, policy, rng);
      normalize_into(img, policy, batch.views[static_cast<std::size_t>(v)].data.col(i).data());
    }
  }
  return batch;
}

LabeledBatch make_batch(const TaskDataView& view, const AugmentationPolicy& policy, int batch_size,
                        RngStream& rng) {
  require(view.size() > 0, Errc::empty_task,
          "task " + std::to_string(view.task().task_id) + " has no samples");
  require(batch_size >= 1, Errc::validation_error, "batch_size must be >= 1");
  const auto perm = rng.permutation(view.size());
  const int b = std::min(batch_size, view.size());
  std::vector<int> picks(perm.begin(), perm.begin() + b);
  return assemble_batch(view, picks, policy, rng);
}

ImageBatchF normalized_images(const ImageSet& set, std::span<const int> indices,
                              const AugmentationPolicy& policy) {
  ImageBatchF out;
  out.channels = set.channels;
  out.height = set.height;
  out.width = set.width;
  out.data.resize(set.sample_size(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const FloatImage img = to_float(set, indices[i]);
    normalize_into(img, policy, out.data.col(static_cast<Eigen::Index>(i)).data());
  }
  return out;
}

}  // namespace clrep::data
