#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "clrep/common/error.hpp"
#include "clrep/common/matrix.hpp"

namespace clrep::objectives {

enum class ObjectiveName { sl, sl_mlp, trex, supcon, barlow, simclr };

constexpr std::string_view to_string(ObjectiveName n) {
  switch (n) {
    case ObjectiveName::sl: return "sl";
    case ObjectiveName::sl_mlp: return "sl_mlp";
    case ObjectiveName::trex: return "trex";
    case ObjectiveName::supcon: return "supcon";
    case ObjectiveName::barlow: return "barlow";
    case ObjectiveName::simclr: return "simclr";
  }
  return "?";
}

inline ObjectiveName objective_from_string(const std::string& s) {
  if (s == "sl") return ObjectiveName::sl;
  if (s == "sl_mlp") return ObjectiveName::sl_mlp;
  if (s == "trex") return ObjectiveName::trex;
  if (s == "supcon") return ObjectiveName::supcon;
  if (s == "barlow") return ObjectiveName::barlow;
  if (s == "simclr") return ObjectiveName::simclr;
  raise(Errc::validation_error, "unknown objective '" + s + "'");
}

struct ObjectiveConfig {
  ObjectiveName name = ObjectiveName::sl;
  double temperature = 0.1;    // contrastive / cosine-softmax losses
  double barlow_lambda = 0.005;  // off-diagonal weight

  static ObjectiveConfig defaults(ObjectiveName n) {
    ObjectiveConfig c;
    c.name = n;
    c.temperature = (n == ObjectiveName::supcon) ? 0.07 : 0.1;
    return c;
  }

  bool requires_two_views() const {
    return name == ObjectiveName::supcon || name == ObjectiveName::barlow ||
           name == ObjectiveName::simclr;
  }
  bool requires_labels() const { return name != ObjectiveName::barlow && name != ObjectiveName::simclr; }
  bool uses_projector() const { return name != ObjectiveName::sl; }
  // CE-family trains through logits (and can pair with LwF).
  bool is_ce_family() const {
    return name == ObjectiveName::sl || name == ObjectiveName::sl_mlp || name == ObjectiveName::trex;
  }
  // Embedding-space losses reusable as a CaSSLe distillation objective.
  bool is_embedding_loss() const { return !is_ce_family(); }

  void validate() const {
    require(temperature > 0.0, Errc::validation_error, "temperature must be > 0");
    require(barlow_lambda > 0.0, Errc::validation_error, "barlow_lambda must be > 0");
  }
};

namespace detail {

// Row-wise softmax with max subtraction; returns probabilities.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& logits) {
  Mat<S> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cross-entropy over logits (mean over the batch). grad_logits, when non-null,
// receives d(loss)/d(logits).
template <typename S>
S ce_loss(const Mat<S>& logits, const VecI& labels, Mat<S>* grad_logits = nullptr) {
  require(logits.rows() == labels.size(), Errc::shape_mismatch, "logit/label count mismatch");
  require(logits.rows() > 0, Errc::shape_mismatch, "empty batch");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < logits.cols(), Errc::label_out_of_range,
            "label " + std::to_string(labels[i]) + " outside [0," + std::to_string(logits.cols()) + ")");

  const Mat<S> p = detail::softmax_rows(logits);
  const S inv_b = S(1) / static_cast<S>(logits.rows());
  S loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    loss -= std::log(std::max(p(i, labels[i]), std::numeric_limits<S>::min()));
  loss *= inv_b;

  if (grad_logits) {
    *grad_logits = p * inv_b;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) (*grad_logits)(i, labels[i]) -= inv_b;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Cosine softmax cross-entropy (t-ReX head): CE over cos(feature, weight_c)/tau
// with both sides l2-normalized. Gradients chain through the normalizations.
template <typename S>
S cosine_softmax_loss(const Mat<S>& features, const Mat<S>& class_weights, const VecI& labels,
                      double tau, Mat<S>* grad_features = nullptr,
                      Mat<S>* grad_weights = nullptr) {
  require(tau > 0.0, Errc::validation_error, "tau must be > 0");
  require(features.cols() == class_weights.cols(), Errc::shape_mismatch,
          "feature/weight dims differ");
  Vec<S> fnorm(features.rows()), wnorm(class_weights.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    fnorm[i] = features.row(i).norm();
    require(fnorm[i] > S(0), Errc::zero_vector, "zero-norm feature row " + std::to_string(i));
  }
  for (Eigen::Index c = 0; c < class_weights.rows(); ++c) {
    wnorm[c] = class_weights.row(c).norm();
    require(wnorm[c] > S(0), Errc::zero_vector, "zero-norm class weight " + std::to_string(c));
  }
  const Mat<S> u = fnorm.cwiseInverse().asDiagonal() * features;       // B×d unit rows
  const Mat<S> w = wnorm.cwiseInverse().asDiagonal() * class_weights;  // C×d unit rows
  const Mat<S> logits = (u * w.transpose()) / static_cast<S>(tau);

  Mat<S> glogits;
  const S loss = ce_loss(logits, labels, (grad_features || grad_weights) ? &glogits : nullptr);

  if (grad_features) {
    Mat<S> gu = glogits * w / static_cast<S>(tau);  // B×d
    grad_features->resize(features.rows(), features.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const S dot = gu.row(i).dot(u.row(i));
      grad_features->row(i) = (gu.row(i) - dot * u.row(i)) / fnorm[i];
    }
  }
  if (grad_weights) {
    Mat<S> gw = glogits.transpose() * u / static_cast<S>(tau);  // C×d
    grad_weights->resize(class_weights.rows(), class_weights.cols());
    for (Eigen::Index c = 0; c < class_weights.rows(); ++c) {
      const S dot = gw.row(c).dot(w.row(c));
      grad_weights->row(c) = (gw.row(c) - dot * w.row(c)) / wnorm[c];
    }
  }
  return loss;
}

namespace detail {

// Shared machinery for the contrastive losses: both are functions of the raw
// similarity matrix sims = Z Z^T. Given g = dL/d(sims), dL/dZ = (g + g^T) Z.
template <typename S>
Mat<S> sims_grad_to_embedding_grad(const Mat<S>& g, const Mat<S>& z) {
  return (g + g.transpose()) * z;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Supervised contrastive loss, "L_out" variant: mean over anchors of the
// negated average positive log-probability. Rows must already be unit-norm
// (the projector's output normalization owns that jacobian).
template <typename S>
S supcon_loss(const Mat<S>& embeddings, const VecI& labels, double tau,
              Mat<S>* grad_embeddings = nullptr) {
  require(tau > 0.0, Errc::validation_error, "tau must be > 0");
  const Eigen::Index n = embeddings.rows();
  require(n == labels.size(), Errc::shape_mismatch, "embedding/label count mismatch");
  require(n >= 2, Errc::shape_mismatch, "need at least 2 samples");

  const Mat<S> sims = embeddings * embeddings.transpose();
  const S inv_tau = S(1) / static_cast<S>(tau);
  Mat<S> g = grad_embeddings ? Mat<S>::Zero(n, n) : Mat<S>();

  S loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index n_pos = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++n_pos;
    require(n_pos > 0, Errc::no_positive,
            "anchor " + std::to_string(i) + " has no same-label partner");

    // log-sum-exp over A(i) = everyone but self, with max subtraction
    S m = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) m = std::max(m, sims(i, j) * inv_tau);
    S denom = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += std::exp(sims(i, j) * inv_tau - m);
    const S lse = m + std::log(denom);

    S anchor_loss = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) anchor_loss -= sims(i, j) * inv_tau - lse;
    loss += anchor_loss / static_cast<S>(n_pos);

    if (grad_embeddings) {
      const S inv_npos = S(1) / static_cast<S>(n_pos);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const S softmax_ij = std::exp(sims(i, j) * inv_tau - m) / denom;
        g(i, j) += inv_tau * (softmax_ij - (labels[j] == labels[i] ? inv_npos : S(0)));
      }
    }
  }
  loss /= static_cast<S>(n);

  if (grad_embeddings) {
    g /= static_cast<S>(n);
    *grad_embeddings = detail::sims_grad_to_embedding_grad(g, embeddings);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// BarlowTwins: drive the cross-correlation of batch-standardized embeddings to
// identity. Standardization uses the population variance (1/B), matching the
// reference implementation's BatchNorm1d, and no epsilon: a zero-variance
// dimension is an error rather than a silent clamp.
template <typename S>
S barlow_twins_loss(const Mat<S>& z1, const Mat<S>& z2, double lambda,
                    Mat<S>* grad_z1 = nullptr, Mat<S>* grad_z2 = nullptr) {
  require(z1.rows() == z2.rows() && z1.cols() == z2.cols(), Errc::shape_mismatch,
          "view shapes differ");
  const Eigen::Index b = z1.rows(), d = z1.cols();
  require(b >= 2, Errc::degenerate_batch, "batch standardization needs B >= 2");

  const auto standardize = [&](const Mat<S>& z, Mat<S>& zn, Vec<S>& inv_std) {
    zn.resize(b, d);
    inv_std.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      const S mean = z.col(k).mean();
      const S var = (z.col(k).array() - mean).square().sum() / static_cast<S>(b);
      require(var > S(1e-20), Errc::degenerate_batch,
              "dimension " + std::to_string(k) + " has zero batch variance");
      inv_std[k] = S(1) / std::sqrt(var);
      zn.col(k) = (z.col(k).array() - mean) * inv_std[k];
    }
  };
  Mat<S> z1n, z2n;
  Vec<S> s1, s2;
  standardize(z1, z1n, s1);
  standardize(z2, z2n, s2);

  const Mat<S> c = (z1n.transpose() * z2n) / static_cast<S>(b);  // d×d cross-correlation
  S on_diag = 0, off_diag = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const S di = S(1) - c(i, i);
    on_diag += di * di;
    for (Eigen::Index j = 0; j < d; ++j)
      if (j != i) off_diag += c(i, j) * c(i, j);
  }
  const S loss = on_diag + static_cast<S>(lambda) * off_diag;

  if (grad_z1 || grad_z2) {
    Mat<S> gc = S(2) * static_cast<S>(lambda) * c;
    for (Eigen::Index i = 0; i < d; ++i) gc(i, i) = S(2) * (c(i, i) - S(1));

    // through C = Z1n' Z2n / B, then through the standardization of each view
    const auto destandardize = [&](const Mat<S>& gzn, const Mat<S>& zn, const Vec<S>& inv_std,
                                   Mat<S>& gz) {
      gz.resize(b, d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const S gmean = gzn.col(k).mean();
        const S gdot = (gzn.col(k).array() * zn.col(k).array()).mean();
        gz.col(k) = (gzn.col(k).array() - gmean - zn.col(k).array() * gdot) * inv_std[k];
      }
    };
    if (grad_z1) destandardize(Mat<S>(z2n * gc.transpose() / static_cast<S>(b)), z1n, s1, *grad_z1);
    if (grad_z2) destandardize(Mat<S>(z1n * gc / static_cast<S>(b)), z2n, s2, *grad_z2);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// SimCLR / NT-Xent. Rows are l2-normalized internally; the positive of row i in
// z1 is row i in z2. Mean over the 2B anchors.
template <typename S>
S simclr_loss(const Mat<S>& z1, const Mat<S>& z2, double tau, Mat<S>* grad_z1 = nullptr,
              Mat<S>* grad_z2 = nullptr) {
  require(tau > 0.0, Errc::validation_error, "tau must be > 0");
  require(z1.rows() == z2.rows() && z1.cols() == z2.cols(), Errc::shape_mismatch,
          "view shapes differ");
  const Eigen::Index b = z1.rows(), n = 2 * b;
  require(b >= 1, Errc::shape_mismatch, "empty batch");

  Mat<S> z(n, z1.cols());
  z.topRows(b) = z1;
  z.bottomRows(b) = z2;
  Vec<S> norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[i] = z.row(i).norm();
    require(norms[i] > S(0), Errc::zero_vector, "zero-norm embedding row " + std::to_string(i));
    z.row(i) /= norms[i];
  }

  const Mat<S> sims = z * z.transpose();
  const S inv_tau = S(1) / static_cast<S>(tau);
  Mat<S> g = (grad_z1 || grad_z2) ? Mat<S>::Zero(n, n) : Mat<S>();

  S loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index pos = (i < b) ? i + b : i - b;
    S m = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) m = std::max(m, sims(i, j) * inv_tau);
    S denom = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += std::exp(sims(i, j) * inv_tau - m);
    const S lse = m + std::log(denom);
    loss -= sims(i, pos) * inv_tau - lse;

    if (grad_z1 || grad_z2) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const S softmax_ij = std::exp(sims(i, j) * inv_tau - m) / denom;
        g(i, j) += inv_tau * (softmax_ij - (j == pos ? S(1) : S(0)));
      }
    }
  }
  loss /= static_cast<S>(n);

  if (grad_z1 || grad_z2) {
    g /= static_cast<S>(n);
    Mat<S> gz_hat = detail::sims_grad_to_embedding_grad(g, z);
    // through the internal row normalization
    Mat<S> gz(n, z.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const S dot = gz_hat.row(i).dot(z.row(i));
      gz.row(i) = (gz_hat.row(i) - dot * z.row(i)) / norms[i];
    }
    if (grad_z1) *grad_z1 = gz.topRows(b);
    if (grad_z2) *grad_z2 = gz.bottomRows(b);
  }
  return loss;
}

}  // namespace clrep::objectives
