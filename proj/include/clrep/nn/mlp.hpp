#pragma once

#include <optional>
#include <vector>

#include "clrep/nn/layers.hpp"

namespace clrep::nn {

// MLP projector between backbone and loss head. Default shape follows the
// BarlowTwins convention (linear→BN→ReLU ×2 → linear). Training uses it,
// evaluation never does.
struct ProjectorConfig {
  bool enabled = false;
  int depth = 3;
  int hidden_dim = 2048;
  int output_dim = 2048;
  bool batch_norm = true;
  bool output_l2_normalize = false;

  void validate() const {
    if (!enabled) return;
    require(depth >= 1, Errc::validation_error, "projector depth must be >= 1 when enabled");
    require(hidden_dim >= 1 && output_dim >= 1, Errc::validation_error,
            "projector dims must be positive");
  }
};

// Also reused (without the l2 stage) as the CaSSLe/PFR temporal predictor.
template <typename S>
class ProjectorMLP {
 public:
  ProjectorMLP() = default;
  ProjectorMLP(int in_dim, const ProjectorConfig& cfg, RngStream& rng) : cfg_(cfg) {
    cfg.validate();
    int d = in_dim;
    for (int layer = 0; layer + 1 < cfg.depth; ++layer) {
      linears_.emplace_back(d, cfg.hidden_dim, /*bias=*/!cfg.batch_norm, rng);
      if (cfg.batch_norm) norms_.emplace_back(cfg.hidden_dim);
      d = cfg.hidden_dim;
    }
    linears_.emplace_back(d, cfg.output_dim, /*bias=*/true, rng);
  }

  int output_dim() const { return cfg_.output_dim; }
  const ProjectorConfig& config() const { return cfg_; }

  Mat<S> forward(const Mat<S>& x, bool train) {
    Mat<S> h = x;
    for (std::size_t i = 0; i + 1 < linears_.size(); ++i) {
      h = linears_[i].forward(h, train);
      if (cfg_.batch_norm) h = norms_[i].forward(h, train);
      h = relus(i).forward_mat(h, train);
    }
    h = linears_.back().forward(h, train);
    if (cfg_.output_l2_normalize) h = l2_.forward(h, train);
    return h;
  }

  Mat<S> infer(const Mat<S>& x) const {
    Mat<S> h = x;
    for (std::size_t i = 0; i + 1 < linears_.size(); ++i) {
      h = linears_[i].infer(h);
      if (cfg_.batch_norm) h = norms_[i].infer(h);
      h = h.cwiseMax(S(0));
    }
    h = linears_.back().infer(h);
    if (cfg_.output_l2_normalize) h = l2_.infer(h);
    return h;
  }

  Mat<S> backward(const Mat<S>& gy) {
    Mat<S> g = gy;
    if (cfg_.output_l2_normalize) g = l2_.backward(g);
    g = linears_.back().backward(g);
    for (std::size_t i = linears_.size() - 1; i-- > 0;) {
      g = relus(i).backward_mat(g);
      if (cfg_.batch_norm) g = norms_[i].backward(g);
      g = linears_[i].backward(g);
    }
    return g;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t i = 0; i < linears_.size(); ++i)
      linears_[i].collect(prefix + "." + std::to_string(i) + ".linear", out);
    for (std::size_t i = 0; i < norms_.size(); ++i)
      norms_[i].collect(prefix + "." + std::to_string(i) + ".bn", out);
  }

  // Identity-initialized single-layer projectors are used in tests; expose the
  // layers for that kind of surgery.
  std::vector<Linear<S>>& layers() { return linears_; }

 private:
  // ReLU on feature matrices, with the same caching contract as the image one.
  struct MatReLU {
    Mat<S> cached;
    Mat<S> forward_mat(const Mat<S>& x, bool train) {
      Mat<S> y = x.cwiseMax(S(0));
      if (train) cached = y;
      return y;
    }
    Mat<S> backward_mat(const Mat<S>& gy) {
      return (cached.array() > S(0)).select(gy, Mat<S>::Zero(gy.rows(), gy.cols()));
    }
  };

  MatReLU& relus(std::size_t i) {
    if (relus_.size() <= i) relus_.resize(i + 1);
    return relus_[i];
  }

  ProjectorConfig cfg_;
  std::vector<Linear<S>> linears_;
  std::vector<BatchNorm1d<S>> norms_;
  std::vector<MatReLU> relus_;
  L2Normalize<S> l2_;
};

}  // namespace clrep::nn
