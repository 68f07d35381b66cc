#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clrep/nn/layers.hpp"

namespace clrep::nn {

// Backbone description. feature_dim is derived: the final stage of the
// ResNet-18 topology is 8× the stem width (512 at the canonical width 64;
// desk-profile runs shrink width_base to fit CPU budgets).
struct EncoderConfig {
  std::string backbone_name = "resnet18";
  int width_base = 64;
  bool small_input_stem = true;  // 3×3 stem without max-pool for 32×32 inputs

  int feature_dim() const { return width_base * 8; }

  void validate() const {
    require(backbone_name == "resnet18", Errc::validation_error,
            "unsupported backbone '" + backbone_name + "'");
    require(width_base >= 4 && width_base <= 64, Errc::validation_error,
            "width_base must be in [4,64]");
  }
};

template <typename S>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(int in_c, int out_c, int stride, RngStream& rng)
      : conv1_(in_c, out_c, 3, stride, 1, false, rng),
        bn1_(out_c),
        conv2_(out_c, out_c, 3, 1, 1, false, rng),
        bn2_(out_c),
        has_projection_(stride != 1 || in_c != out_c) {
    if (has_projection_) {
      sc_conv_.emplace(in_c, out_c, 1, stride, 0, false, rng);
      sc_bn_.emplace(out_c);
    }
  }

  ImageBatch<S> forward(const ImageBatch<S>& x, bool train) {
    ImageBatch<S> main = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    main = bn2_.forward(conv2_.forward(main, train), train);
    ImageBatch<S> shortcut =
        has_projection_ ? sc_bn_->forward(sc_conv_->forward(x, train), train) : x;
    main.data += shortcut.data;
    return relu2_.forward(main, train);
  }

  ImageBatch<S> infer(const ImageBatch<S>& x) const {
    ImageBatch<S> main = relu1_.infer(bn1_.infer(conv1_.infer(x)));
    main = bn2_.infer(conv2_.infer(main));
    const ImageBatch<S> shortcut = has_projection_ ? sc_bn_->infer(sc_conv_->infer(x)) : x;
    main.data += shortcut.data;
    return relu2_.infer(main);
  }

  ImageBatch<S> backward(const ImageBatch<S>& gy) {
    const ImageBatch<S> gsum = relu2_.backward(gy);
    ImageBatch<S> gmain = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(gsum)))));
    if (has_projection_) {
      const ImageBatch<S> gshort = sc_conv_->backward(sc_bn_->backward(gsum));
      gmain.data += gshort.data;
    } else {
      gmain.data += gsum.data;
    }
    return gmain;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    conv1_.collect(prefix + ".conv1", out);
    bn1_.collect(prefix + ".bn1", out);
    conv2_.collect(prefix + ".conv2", out);
    bn2_.collect(prefix + ".bn2", out);
    if (has_projection_) {
      sc_conv_->collect(prefix + ".shortcut.conv", out);
      sc_bn_->collect(prefix + ".shortcut.bn", out);
    }
  }

 private:
  Conv2d<S> conv1_;
  BatchNorm<S> bn1_;
  Conv2d<S> conv2_;
  BatchNorm<S> bn2_;
  ReLU<S> relu1_, relu2_;
  bool has_projection_ = false;
  std::optional<Conv2d<S>> sc_conv_;
  std::optional<BatchNorm<S>> sc_bn_;
};

// ResNet-18 topology: stem + 4 stages of two basic blocks, global average
// pool. Returns pooled features as (feature_dim × batch).
template <typename S>
class ResNetBackbone {
 public:
  ResNetBackbone() = default;
  ResNetBackbone(const EncoderConfig& cfg, RngStream& rng) : cfg_(cfg) {
    cfg.validate();
    const int w = cfg.width_base;
    if (cfg.small_input_stem) {
      stem_conv_ = Conv2d<S>(3, w, 3, 1, 1, false, rng);
    } else {
      stem_conv_ = Conv2d<S>(3, w, 7, 2, 3, false, rng);
      stem_pool_.emplace(3, 2, 1);
    }
    stem_bn_ = BatchNorm<S>(w);
    const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
    int in_c = w;
    for (int stage = 0; stage < 4; ++stage) {
      const int stride = stage == 0 ? 1 : 2;
      blocks_.emplace_back(in_c, widths[stage], stride, rng);
      blocks_.emplace_back(widths[stage], widths[stage], 1, rng);
      in_c = widths[stage];
    }
  }

  const EncoderConfig& config() const { return cfg_; }

  Mat<S> forward(const ImageBatch<S>& x, bool train) {
    check_input(x);
    ImageBatch<S> h = stem_relu_.forward(stem_bn_.forward(stem_conv_.forward(x, train), train), train);
    if (stem_pool_) h = stem_pool_->forward(h, train);
    for (auto& block : blocks_) h = block.forward(h, train);
    return pool_.forward(h, train);
  }

  Mat<S> infer(const ImageBatch<S>& x) const {
    check_input(x);
    ImageBatch<S> h = stem_relu_.infer(stem_bn_.infer(stem_conv_.infer(x)));
    if (stem_pool_) h = stem_pool_->infer(h);
    for (const auto& block : blocks_) h = block.infer(h);
    return pool_.infer(h);
  }

  void backward(const Mat<S>& gfeatures) {
    ImageBatch<S> g = pool_.backward(gfeatures);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    if (stem_pool_) g = stem_pool_->backward(g);
    stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(g)));
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    stem_conv_.collect(prefix + ".stem.conv", out);
    stem_bn_.collect(prefix + ".stem.bn", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".layer" + std::to_string(i / 2 + 1) + "." + std::to_string(i % 2),
                         out);
  }

 private:
  void check_input(const ImageBatch<S>& x) const {
    require(x.channels == 3, Errc::shape_mismatch, "backbone expects 3-channel input");
    require(x.data.rows() == static_cast<Eigen::Index>(3) * x.height * x.width,
            Errc::shape_mismatch, "image buffer does not match declared resolution");
    require(x.height >= 8 && x.width >= 8, Errc::shape_mismatch, "input resolution too small");
  }

  EncoderConfig cfg_;
  Conv2d<S> stem_conv_;
  BatchNorm<S> stem_bn_;
  ReLU<S> stem_relu_;
  std::optional<MaxPool2d<S>> stem_pool_;
  std::vector<BasicBlock<S>> blocks_;
  GlobalAvgPool<S> pool_;
};

}  // namespace clrep::nn
