#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "clrep/common/error.hpp"
#include "clrep/common/matrix.hpp"
#include "clrep/eval/embedding.hpp"

namespace clrep::eval {

// Zero rows are left as zero directions instead of NaN; callers that must not
// see them pass raise_on_zero.
template <typename S>
Mat<S> l2_normalize_rows(const Mat<S>& x, bool raise_on_zero = false) {
  Mat<S> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S n = x.row(i).norm();
    if (n > S(0)) {
      out.row(i) = x.row(i) / n;
    } else {
      require(!raise_on_zero, Errc::zero_vector, "zero-norm feature row " + std::to_string(i));
      out.row(i).setZero();
    }
  }
  return out;
}

// Similarity-weighted k-NN vote: cosine similarity, vote weight exp(sim/temperature).
// Neighbors are ordered by (similarity desc, train index asc); vote ties resolve to
// the lowest class id. Both rules are what the brute-force oracle must reproduce.
template <typename S>
double knn_accuracy(const EmbeddingMatrix<S>& train, const EmbeddingMatrix<S>& test, int k,
                    double temperature) {
  train.check();
  test.check();
  require(train.rows() > 0, Errc::empty_reference, "k-NN reference set is empty");
  require(train.dim() == test.dim(), Errc::shape_mismatch, "train/test feature dims differ");
  require(temperature > 0.0, Errc::validation_error, "k-NN temperature must be > 0");
  const int kk = std::min<int>(k, static_cast<int>(train.rows()));
  require(kk >= 1, Errc::validation_error, "k must be >= 1");

  const Mat<S> tr = l2_normalize_rows(train.features);
  const Mat<S> te = l2_normalize_rows(test.features);

  // Chunk test rows so the similarity buffer stays bounded.
  const Eigen::Index chunk = std::max<Eigen::Index>(1, (1 << 22) / std::max<Eigen::Index>(1, tr.rows()));
  Eigen::Index correct = 0;
  std::vector<int> order(static_cast<std::size_t>(tr.rows()));
  for (Eigen::Index begin = 0; begin < te.rows(); begin += chunk) {
    const Eigen::Index rows = std::min(chunk, te.rows() - begin);
    Mat<S> sims = te.middleRows(begin, rows) * tr.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::iota(order.begin(), order.end(), 0);
      const auto cmp = [&](int a, int b) {
        if (sims(i, a) != sims(i, b)) return sims(i, a) > sims(i, b);
        return a < b;
      };
      std::partial_sort(order.begin(), order.begin() + kk, order.end(), cmp);
      std::map<int, double> votes;
      for (int j = 0; j < kk; ++j) {
        const int idx = order[static_cast<std::size_t>(j)];
        votes[train.labels[idx]] += std::exp(static_cast<double>(sims(i, idx)) / temperature);
      }
      int best_class = votes.begin()->first;
      double best_vote = votes.begin()->second;
      for (const auto& [cls, v] : votes) {
        if (v > best_vote) {
          best_vote = v;
          best_class = cls;
        }
      }
      if (best_class == test.labels[begin + i]) ++correct;
    }
  }
  return test.rows() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.rows());
}

template <typename S>
struct PrototypeSet {
  Mat<S> prototypes;           // one unit-norm row per class, aligned with class_ids
  std::vector<int> class_ids;  // sorted ascending
  int built_at = -1;

  Eigen::Index index_of(int class_id) const {
    const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
    require(it != class_ids.end() && *it == class_id, Errc::missing_class,
            "no prototype for class " + std::to_string(class_id));
    return static_cast<Eigen::Index>(it - class_ids.begin());
  }
};

// Per-class mean of l2-normalized features, re-normalized (iCaRL-style prototypes).
template <typename S>
PrototypeSet<S> compute_prototypes(const EmbeddingMatrix<S>& train,
                                   const std::vector<int>& expected_classes = {}) {
  train.check();
  require(train.rows() > 0, Errc::empty_reference, "prototype source is empty");
  const Mat<S> z = l2_normalize_rows(train.features, /*raise_on_zero=*/true);

  std::map<int, std::pair<Vec<S>, int>> sums;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto [it, inserted] = sums.try_emplace(train.labels[i], Vec<S>::Zero(z.cols()), 0);
    it->second.first += z.row(i).transpose();
    it->second.second += 1;
  }
  for (int cls : expected_classes)
    require(sums.count(cls) != 0, Errc::missing_class,
            "class " + std::to_string(cls) + " has no samples");

  PrototypeSet<S> out;
  out.prototypes.resize(static_cast<Eigen::Index>(sums.size()), z.cols());
  Eigen::Index row = 0;
  for (const auto& [cls, acc] : sums) {
    Vec<S> mean = acc.first / static_cast<S>(acc.second);
    const S norm = mean.norm();
    require(norm > S(1e-12), Errc::degenerate_mean,
            "zero-norm prototype mean for class " + std::to_string(cls));
    out.prototypes.row(row++) = (mean / norm).transpose();
    out.class_ids.push_back(cls);
  }
  return out;
}

// Nearest prototype by cosine similarity; ties resolve to the lowest class id.
template <typename S>
double nmc_accuracy(const EmbeddingMatrix<S>& test, const PrototypeSet<S>& protos) {
  test.check();
  require(protos.prototypes.rows() > 0, Errc::empty_reference, "prototype set is empty");
  require(test.dim() == protos.prototypes.cols(), Errc::shape_mismatch,
          "test/prototype dims differ");
  for (Eigen::Index i = 0; i < test.rows(); ++i)
    protos.index_of(test.labels[i]);  // raises MissingClass if uncovered

  const Mat<S> te = l2_normalize_rows(test.features);
  const Mat<S> scores = te * protos.prototypes.transpose();
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < te.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;  // strict > keeps the lowest class id on ties
    if (protos.class_ids[static_cast<std::size_t>(best)] == test.labels[i]) ++correct;
  }
  return test.rows() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.rows());
}

// Fig.-5 style stability probe over task-1 data: *_t1 under the task-1 backbone,
// *_t2 the same samples under the task-2 backbone. acc_stale reuses stale task-1
// prototypes; acc_upper recomputes them from old data under the new backbone (the
// oracle that true continual learning cannot run).
struct NmcStabilityResult {
  double acc_after_t1 = 0.0;
  double acc_stale = 0.0;
  double acc_upper = 0.0;
  bool upper_below_stale = false;  // diagnostic only, never asserted
};

template <typename S>
NmcStabilityResult nmc_stability(const EmbeddingMatrix<S>& train_t1,
                                 const EmbeddingMatrix<S>& test_t1,
                                 const EmbeddingMatrix<S>& train_t2,
                                 const EmbeddingMatrix<S>& test_t2) {
  const auto protos_t1 = compute_prototypes(train_t1);
  const auto protos_t2 = compute_prototypes(train_t2);
  NmcStabilityResult r;
  r.acc_after_t1 = nmc_accuracy(test_t1, protos_t1);
  r.acc_stale = nmc_accuracy(test_t2, protos_t1);
  r.acc_upper = nmc_accuracy(test_t2, protos_t2);
  r.upper_below_stale = r.acc_upper < r.acc_stale - 1e-9;
  return r;
}

// Linear CKA between two representation matrices with one row per sample:
// ||Yc' Xc||_F^2 / (||Xc' Xc||_F ||Yc' Yc||_F) on column-centered inputs.
template <typename S>
double linear_cka(const Mat<S>& x, const Mat<S>& y) {
  require(x.rows() == y.rows(), Errc::shape_mismatch, "CKA inputs need equal sample counts");
  require(x.rows() >= 2, Errc::degenerate_input, "CKA needs at least 2 samples");
  const Mat<S> xc = x.rowwise() - x.colwise().mean();
  const Mat<S> yc = y.rowwise() - y.colwise().mean();
  const double xnorm = (xc.transpose() * xc).norm();
  const double ynorm = (yc.transpose() * yc).norm();
  require(xnorm > 0.0 && ynorm > 0.0, Errc::degenerate_input,
          "CKA input has no variance after centering");
  const double cross = (yc.transpose() * xc).squaredNorm();
  return std::clamp(cross / (xnorm * ynorm), 0.0, 1.0);
}

struct SpectrumRecord {
  VecD eigenvalues;  // covariance eigenvalues, descending, clamped at 0
  VecD cumulative;   // cumulative explained-variance ratios
  int var95_index = 0;  // smallest k with cumulative(k) >= 0.95, 1-based
};

// Eigen-decomposition of the feature covariance Xc'Xc/(N-1). For a symmetric PSD
// matrix this matches the paper's SVD of the covariance.
template <typename S>
SpectrumRecord spectrum(const Mat<S>& features) {
  require(features.rows() >= 2, Errc::degenerate_input, "spectrum needs at least 2 samples");
  const Mat<S> xc = features.rowwise() - features.colwise().mean();
  MatD cov = (xc.transpose() * xc).template cast<double>() / static_cast<double>(xc.rows() - 1);
  Eigen::SelfAdjointEigenSolver<MatD> es(cov);
  require(es.info() == Eigen::Success, Errc::degenerate_input, "eigendecomposition failed");

  SpectrumRecord rec;
  rec.eigenvalues = es.eigenvalues().reverse();
  for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i)
    rec.eigenvalues[i] = std::max(0.0, rec.eigenvalues[i]);
  const double total = rec.eigenvalues.sum();
  require(total > 0.0, Errc::degenerate_input, "constant features have an empty spectrum");

  rec.cumulative.resize(rec.eigenvalues.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i) {
    acc += rec.eigenvalues[i];
    rec.cumulative[i] = acc / total;
  }
  rec.cumulative[rec.cumulative.size() - 1] = 1.0;  // pin the tail against roundoff
  rec.var95_index = static_cast<int>(rec.eigenvalues.size());
  for (Eigen::Index i = 0; i < rec.cumulative.size(); ++i) {
    if (rec.cumulative[i] >= 0.95) {
      rec.var95_index = static_cast<int>(i) + 1;
      break;
    }
  }
  return rec;
}

template <typename S>
SpectrumRecord spectrum(const EmbeddingMatrix<S>& emb) {
  emb.check();
  return spectrum(emb.features);
}

// The three derived metrics are plain percentage-point arithmetic; they stay
// exact so reports can re-derive them from their stored inputs.
inline double forgetting(double acc_after_own_task, double acc_after_final) {
  return acc_after_own_task - acc_after_final;
}

inline double forward_transfer(double acc_pretrained, double acc_scratch) {
  return acc_pretrained - acc_scratch;
}

inline double exclusion_difference(double acc_with_task, double acc_without_task) {
  return acc_with_task - acc_without_task;
}

}  // namespace clrep::eval
