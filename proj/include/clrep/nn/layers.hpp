#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "clrep/common/error.hpp"
#include "clrep/common/matrix.hpp"
#include "clrep/common/rng.hpp"
#include "clrep/data/image.hpp"

namespace clrep::nn {

using data::ImageBatch;

// A named view into a layer's parameter (or buffer). Buffers (BN running
// stats) have trainable=false and no gradient; weight decay skips biases and
// batch-norm affine terms.
template <typename S>
struct ParamRef {
  std::string name;
  Mat<S>* value = nullptr;
  Mat<S>* grad = nullptr;
  bool decay = false;
  bool trainable = true;
};

template <typename S>
using ParamList = std::vector<ParamRef<S>>;

namespace detail {

template <typename S>
void he_normal_init(Mat<S>& w, Eigen::Index fan_in, RngStream& rng, double gain = 2.0) {
  const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<S>(rng.normal(0.0, stddev));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 2-D convolution via patch-major im2col + GEMM. Weight layout is
// (out_c) × (in_c*k*k); activations are (c*h*w) × batch.
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_c, int out_c, int kernel, int stride, int pad, bool bias, RngStream& rng)
      : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad), has_bias_(bias) {
    w_.resize(out_c, in_c * kernel * kernel);
    detail::he_normal_init(w_, w_.cols(), rng);
    gw_ = Mat<S>::Zero(w_.rows(), w_.cols());
    if (has_bias_) {
      b_ = Mat<S>::Zero(out_c, 1);
      gb_ = Mat<S>::Zero(out_c, 1);
    }
  }

  int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
  int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

  ImageBatch<S> forward(const ImageBatch<S>& x, bool train) {
    require(x.channels == in_c_, Errc::shape_mismatch,
            "conv expects " + std::to_string(in_c_) + " channels, got " + std::to_string(x.channels));
    if (train) cached_input_ = x;
    return apply(x);
  }

  ImageBatch<S> infer(const ImageBatch<S>& x) const { return apply(x); }

  // Consumes the upstream gradient in image layout and returns the input
  // gradient. Recomputes im2col from the cached input instead of caching the
  // (much larger) patch matrix.
  ImageBatch<S> backward(const ImageBatch<S>& gy) {
    const ImageBatch<S>& x = cached_input_;
    const int oh = out_h(x.height), ow = out_w(x.width);
    const Eigen::Index n = x.size();
    const Eigen::Index patches = n * oh * ow;

    Mat<S> gout(patches, out_c_);
    from_image_layout(gy, gout, oh, ow);

    const Mat<S> cols = im2col(x, oh, ow);
    gw_.noalias() += gout.transpose() * cols;
    if (has_bias_) gb_.col(0).noalias() += gout.colwise().sum().transpose();

    Mat<S> gcols(patches, w_.cols());
    gcols.noalias() = gout * w_;

    ImageBatch<S> gx;
    gx.channels = x.channels;
    gx.height = x.height;
    gx.width = x.width;
    gx.data = Mat<S>::Zero(x.data.rows(), n);
    col2im(gcols, gx, oh, ow);
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".w", &w_, &gw_, true, true});
    if (has_bias_) out.push_back({prefix + ".b", &b_, &gb_, false, true});
  }

  Mat<S>& weight() { return w_; }

 private:
  ImageBatch<S> apply(const ImageBatch<S>& x) const {
    const int oh = out_h(x.height), ow = out_w(x.width);
    require(oh > 0 && ow > 0, Errc::shape_mismatch, "input smaller than kernel");
    const Eigen::Index n = x.size();
    const Mat<S> cols = im2col(x, oh, ow);
    Mat<S> out_mat(n * oh * ow, out_c_);
    out_mat.noalias() = cols * w_.transpose();
    if (has_bias_) out_mat.rowwise() += b_.col(0).transpose();

    ImageBatch<S> y;
    y.channels = out_c_;
    y.height = oh;
    y.width = ow;
    y.data.resize(static_cast<Eigen::Index>(out_c_) * oh * ow, n);
    to_image_layout(out_mat, y, oh, ow);
    return y;
  }

  // (n*oh*ow) × (in_c*k*k); patch index p = (n*oh + oy)*ow + ox is the fast
  // (contiguous) dimension of the column-major result.
  Mat<S> im2col(const ImageBatch<S>& x, int oh, int ow) const {
    const Eigen::Index n = x.size();
    Mat<S> cols = Mat<S>::Zero(n * oh * ow, static_cast<Eigen::Index>(in_c_) * k_ * k_);
    const int h = x.height, w = x.width;
    for (int ci = 0; ci < in_c_; ++ci) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(ci) * k_ + ky) * k_ + kx;
          S* dst_base = cols.col(r).data();
          for (Eigen::Index img = 0; img < n; ++img) {
            const S* src_base = x.data.col(img).data() + static_cast<std::ptrdiff_t>(ci) * h * w;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              S* dst = dst_base + (img * oh + oy) * ow;
              const S* src_row = src_base + static_cast<std::ptrdiff_t>(iy) * w;
              if (stride_ == 1) {
                const int ox_lo = std::max(0, pad_ - kx);
                const int ox_hi = std::min(ow, w + pad_ - kx);
                if (ox_hi > ox_lo)
                  std::memcpy(dst + ox_lo, src_row + ox_lo + kx - pad_,
                              static_cast<std::size_t>(ox_hi - ox_lo) * sizeof(S));
              } else {
                for (int ox = 0; ox < ow; ++ox) {
                  const int ix = ox * stride_ + kx - pad_;
                  if (ix >= 0 && ix < w) dst[ox] = src_row[ix];
                }
              }
            }
          }
        }
      }
    }
    return cols;
  }

  void col2im(const Mat<S>& gcols, ImageBatch<S>& gx, int oh, int ow) const {
    const Eigen::Index n = gx.size();
    const int h = gx.height, w = gx.width;
    for (int ci = 0; ci < in_c_; ++ci) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(ci) * k_ + ky) * k_ + kx;
          const S* src_base = gcols.col(r).data();
          for (Eigen::Index img = 0; img < n; ++img) {
            S* dst_base = gx.data.col(img).data() + static_cast<std::ptrdiff_t>(ci) * h * w;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              const S* src = src_base + (img * oh + oy) * ow;
              S* dst_row = dst_base + static_cast<std::ptrdiff_t>(iy) * w;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride_ + kx - pad_;
                if (ix >= 0 && ix < w) dst_row[ix] += src[ox];
              }
            }
          }
        }
      }
    }
  }

  // (patches × out_c) GEMM result → image activation layout, and back.
  void to_image_layout(const Mat<S>& mat, ImageBatch<S>& y, int oh, int ow) const {
    const Eigen::Index n = y.size();
    for (int co = 0; co < out_c_; ++co) {
      const S* src = mat.col(co).data();
      for (Eigen::Index img = 0; img < n; ++img) {
        S* dst = y.data.col(img).data() + static_cast<std::ptrdiff_t>(co) * oh * ow;
        std::memcpy(dst, src + img * oh * ow, static_cast<std::size_t>(oh) * ow * sizeof(S));
      }
    }
  }

  void from_image_layout(const ImageBatch<S>& y, Mat<S>& mat, int oh, int ow) const {
    const Eigen::Index n = y.size();
    for (int co = 0; co < out_c_; ++co) {
      S* dst = mat.col(co).data();
      for (Eigen::Index img = 0; img < n; ++img) {
        const S* src = y.data.col(img).data() + static_cast<std::ptrdiff_t>(co) * oh * ow;
        std::memcpy(dst + img * oh * ow, src, static_cast<std::size_t>(oh) * ow * sizeof(S));
      }
    }
  }

  int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  bool has_bias_ = false;
  Mat<S> w_, gw_, b_, gb_;
  ImageBatch<S> cached_input_;
};

// ---------------------------------------------------------------------------
// Batch norm over (batch × spatial) per channel. Training normalizes with the
// biased batch variance; running_var keeps the unbiased estimate, matching
// the usual convention.
template <typename S>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = Mat<S>::Ones(channels, 1);
    beta_ = Mat<S>::Zero(channels, 1);
    ggamma_ = Mat<S>::Zero(channels, 1);
    gbeta_ = Mat<S>::Zero(channels, 1);
    running_mean_ = Mat<S>::Zero(channels, 1);
    running_var_ = Mat<S>::Ones(channels, 1);
  }

  ImageBatch<S> forward(const ImageBatch<S>& x, bool train) {
    check(x);
    if (!train) return infer(x);
    const Eigen::Index hw = static_cast<Eigen::Index>(x.height) * x.width;
    const Eigen::Index m = hw * x.size();
    require(m >= 2, Errc::degenerate_batch, "batch norm needs at least 2 values per channel");

    ImageBatch<S> y = x;
    xhat_ = x;
    inv_std_.resize(channels_);
    for (int c = 0; c < channels_; ++c) {
      auto block = y.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw);
      const S mean = block.mean();
      const S var = (block.array() - mean).square().sum() / static_cast<S>(m);
      const S inv = S(1) / std::sqrt(var + static_cast<S>(eps_));
      inv_std_[c] = inv;
      auto xhat_block = xhat_.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw);
      xhat_block = (block.array() - mean).matrix() * inv;
      block = (xhat_block.array() * gamma_(c, 0) + beta_(c, 0)).matrix();

      const S unbiased = var * static_cast<S>(m) / static_cast<S>(m - 1);
      running_mean_(c, 0) = static_cast<S>((1.0 - momentum_) * running_mean_(c, 0) + momentum_ * mean);
      running_var_(c, 0) = static_cast<S>((1.0 - momentum_) * running_var_(c, 0) + momentum_ * unbiased);
    }
    return y;
  }

  ImageBatch<S> infer(const ImageBatch<S>& x) const {
    check(x);
    const Eigen::Index hw = static_cast<Eigen::Index>(x.height) * x.width;
    ImageBatch<S> y = x;
    for (int c = 0; c < channels_; ++c) {
      const S inv = S(1) / std::sqrt(running_var_(c, 0) + static_cast<S>(eps_));
      auto block = y.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw);
      block = ((block.array() - running_mean_(c, 0)) * inv * gamma_(c, 0) + beta_(c, 0)).matrix();
    }
    return y;
  }

  ImageBatch<S> backward(const ImageBatch<S>& gy) {
    const Eigen::Index hw = static_cast<Eigen::Index>(gy.height) * gy.width;
    const Eigen::Index m = hw * gy.size();
    ImageBatch<S> gx = gy;
    for (int c = 0; c < channels_; ++c) {
      auto g = gx.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw);
      const auto xh = xhat_.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw);
      ggamma_(c, 0) += (g.array() * xh.array()).sum();
      gbeta_(c, 0) += g.sum();
      const S gmean = g.mean();
      const S gdot = (g.array() * xh.array()).sum() / static_cast<S>(m);
      g = ((g.array() - gmean - xh.array() * gdot) * gamma_(c, 0) * inv_std_[c]).matrix();
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_, false, true});
    out.push_back({prefix + ".beta", &beta_, &gbeta_, false, true});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr, false, false});
    out.push_back({prefix + ".running_var", &running_var_, nullptr, false, false});
  }

 private:
  void check(const ImageBatch<S>& x) const {
    require(x.channels == channels_, Errc::shape_mismatch, "batch norm channel mismatch");
  }

  int channels_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  Mat<S> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_;
  ImageBatch<S> xhat_;
  std::vector<S> inv_std_;
};

// ---------------------------------------------------------------------------
template <typename S>
class ReLU {
 public:
  ImageBatch<S> forward(const ImageBatch<S>& x, bool train) {
    ImageBatch<S> y = x;
    y.data = y.data.cwiseMax(S(0));
    if (train) cached_output_ = y;
    return y;
  }

  ImageBatch<S> infer(const ImageBatch<S>& x) const {
    ImageBatch<S> y = x;
    y.data = y.data.cwiseMax(S(0));
    return y;
  }

  ImageBatch<S> backward(const ImageBatch<S>& gy) {
    ImageBatch<S> gx = gy;
    gx.data = (cached_output_.data.array() > S(0)).select(gy.data, Mat<S>::Zero(gy.data.rows(), gy.data.cols()));
    return gx;
  }

 private:
  ImageBatch<S> cached_output_;
};

// ---------------------------------------------------------------------------
// Max pooling (used only by the large-input stem).
template <typename S>
class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(int kernel, int stride, int pad) : k_(kernel), stride_(stride), pad_(pad) {}

  ImageBatch<S> forward(const ImageBatch<S>& x, bool train) {
    const int oh = (x.height + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (x.width + 2 * pad_ - k_) / stride_ + 1;
    ImageBatch<S> y;
    y.channels = x.channels;
    y.height = oh;
    y.width = ow;
    y.data.resize(static_cast<Eigen::Index>(x.channels) * oh * ow, x.size());
    if (train) {
      argmax_.resize(static_cast<std::size_t>(y.data.rows()) * static_cast<std::size_t>(y.data.cols()));
      in_shape_ = {x.channels, x.height, x.width};
    }
    for (Eigen::Index img = 0; img < x.size(); ++img) {
      const S* src = x.data.col(img).data();
      S* dst = y.data.col(img).data();
      for (int c = 0; c < x.channels; ++c)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            S best = std::numeric_limits<S>::lowest();
            int best_idx = -1;
            for (int ky = 0; ky < k_; ++ky)
              for (int kx = 0; kx < k_; ++kx) {
                const int iy = oy * stride_ + ky - pad_;
                const int ix = ox * stride_ + kx - pad_;
                if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) continue;
                const int idx = (c * x.height + iy) * x.width + ix;
                if (src[idx] > best) {
                  best = src[idx];
                  best_idx = idx;
                }
              }
            const Eigen::Index out_idx = (static_cast<Eigen::Index>(c) * oh + oy) * ow + ox;
            dst[out_idx] = best;
            if (train)
              argmax_[static_cast<std::size_t>(img * y.data.rows() + out_idx)] = best_idx;
          }
    }
    return y;
  }

  ImageBatch<S> infer(const ImageBatch<S>& x) const { return const_cast<MaxPool2d*>(this)->forward(x, false); }

  ImageBatch<S> backward(const ImageBatch<S>& gy) {
    ImageBatch<S> gx;
    gx.channels = in_shape_[0];
    gx.height = in_shape_[1];
    gx.width = in_shape_[2];
    gx.data = Mat<S>::Zero(static_cast<Eigen::Index>(in_shape_[0]) * in_shape_[1] * in_shape_[2], gy.size());
    for (Eigen::Index img = 0; img < gy.size(); ++img) {
      const S* g = gy.data.col(img).data();
      S* dst = gx.data.col(img).data();
      for (Eigen::Index i = 0; i < gy.data.rows(); ++i)
        dst[argmax_[static_cast<std::size_t>(img * gy.data.rows() + i)]] += g[i];
    }
    return gx;
  }

 private:
  int k_ = 2, stride_ = 2, pad_ = 0;
  std::vector<int> argmax_;
  std::array<int, 3> in_shape_{};
};

// ---------------------------------------------------------------------------
// Global average pool: (c*h*w) × n → c × n features.
template <typename S>
class GlobalAvgPool {
 public:
  Mat<S> forward(const ImageBatch<S>& x, bool train) {
    if (train) in_shape_ = {x.channels, x.height, x.width};
    return reduce(x);
  }

  Mat<S> infer(const ImageBatch<S>& x) const { return reduce(x); }

  ImageBatch<S> backward(const Mat<S>& gy) {
    const auto [c, h, w] = in_shape_;
    const S scale = S(1) / static_cast<S>(h * w);
    ImageBatch<S> gx;
    gx.channels = c;
    gx.height = h;
    gx.width = w;
    gx.data.resize(static_cast<Eigen::Index>(c) * h * w, gy.cols());
    for (int ch = 0; ch < c; ++ch)
      gx.data.middleRows(static_cast<Eigen::Index>(ch) * h * w, static_cast<Eigen::Index>(h) * w) =
          (gy.row(ch) * scale).colwise().replicate(h * w);
    return gx;
  }

 private:
  static Mat<S> reduce(const ImageBatch<S>& x) {
    const Eigen::Index hw = static_cast<Eigen::Index>(x.height) * x.width;
    Mat<S> out(x.channels, x.size());
    for (int c = 0; c < x.channels; ++c)
      out.row(c) = x.data.middleRows(static_cast<Eigen::Index>(c) * hw, hw).colwise().mean();
    return out;
  }

  std::tuple<int, int, int> in_shape_{};
};

// ---------------------------------------------------------------------------
// Fully connected layer on column-major feature batches (features × batch).
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(int in_dim, int out_dim, bool bias, RngStream& rng) : has_bias_(bias) {
    w_.resize(out_dim, in_dim);
    detail::he_normal_init(w_, in_dim, rng, 1.0);
    gw_ = Mat<S>::Zero(out_dim, in_dim);
    if (bias) {
      b_ = Mat<S>::Zero(out_dim, 1);
      gb_ = Mat<S>::Zero(out_dim, 1);
    }
  }

  Mat<S> forward(const Mat<S>& x, bool train) {
    require(x.rows() == w_.cols(), Errc::shape_mismatch,
            "linear expects " + std::to_string(w_.cols()) + " inputs, got " + std::to_string(x.rows()));
    if (train) cached_input_ = x;
    Mat<S> y = w_ * x;
    if (has_bias_) y.colwise() += b_.col(0);
    return y;
  }

  Mat<S> infer(const Mat<S>& x) const {
    require(x.rows() == w_.cols(), Errc::shape_mismatch, "linear input dim mismatch");
    Mat<S> y = w_ * x;
    if (has_bias_) y.colwise() += b_.col(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& gy) {
    gw_.noalias() += gy * cached_input_.transpose();
    if (has_bias_) gb_.col(0).noalias() += gy.rowwise().sum();
    return w_.transpose() * gy;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".w", &w_, &gw_, true, true});
    if (has_bias_) out.push_back({prefix + ".b", &b_, &gb_, false, true});
  }

  Mat<S>& weight() { return w_; }
  const Mat<S>& weight() const { return w_; }
  Mat<S>& weight_grad() { return gw_; }
  Mat<S>& bias() { return b_; }
  int out_dim() const { return static_cast<int>(w_.rows()); }
  int in_dim() const { return static_cast<int>(w_.cols()); }

 private:
  bool has_bias_ = true;
  Mat<S> w_, gw_, b_, gb_;
  Mat<S> cached_input_;
};

// ---------------------------------------------------------------------------
// 1-D batch norm for MLP features (features × batch).
template <typename S>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(int dim, double momentum = 0.1, double eps = 1e-5) : bn_(dim, momentum, eps) {}

  Mat<S> forward(const Mat<S>& x, bool train) { return bn_.forward(wrap(x), train).data; }
  Mat<S> infer(const Mat<S>& x) const { return bn_.infer(wrap(x)).data; }
  Mat<S> backward(const Mat<S>& gy) { return bn_.backward(wrap(gy)).data; }
  void collect(const std::string& prefix, ParamList<S>& out) { bn_.collect(prefix, out); }

 private:
  static ImageBatch<S> wrap(const Mat<S>& x) {
    ImageBatch<S> b;
    b.channels = static_cast<int>(x.rows());
    b.height = 1;
    b.width = 1;
    b.data = x;
    return b;
  }
  BatchNorm<S> bn_;
};

// ---------------------------------------------------------------------------
// Column-wise l2 normalization with full jacobian in backward.
template <typename S>
class L2Normalize {
 public:
  Mat<S> forward(const Mat<S>& x, bool train) {
    Mat<S> y(x.rows(), x.cols());
    Vec<S> norms(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      norms[j] = x.col(j).norm();
      require(norms[j] > S(0), Errc::zero_vector, "zero-norm embedding column");
      y.col(j) = x.col(j) / norms[j];
    }
    if (train) {
      cached_output_ = y;
      cached_norms_ = norms;
    }
    return y;
  }

  Mat<S> infer(const Mat<S>& x) const {
    Mat<S> y(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const S n = x.col(j).norm();
      require(n > S(0), Errc::zero_vector, "zero-norm embedding column");
      y.col(j) = x.col(j) / n;
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& gy) {
    Mat<S> gx(gy.rows(), gy.cols());
    for (Eigen::Index j = 0; j < gy.cols(); ++j) {
      const S dot = gy.col(j).dot(cached_output_.col(j));
      gx.col(j) = (gy.col(j) - dot * cached_output_.col(j)) / cached_norms_[j];
    }
    return gx;
  }

 private:
  Mat<S> cached_output_;
  Vec<S> cached_norms_;
};

}  // namespace clrep::nn
