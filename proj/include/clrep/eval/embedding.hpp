#pragma once

#include <string>
#include <utility>

#include "clrep/common/binio.hpp"
#include "clrep/common/error.hpp"
#include "clrep/common/matrix.hpp"

namespace clrep::eval {

// Where a feature matrix came from; carried along so reports stay auditable.
struct EmbeddingSource {
  std::string run_id;
  int boundary = -1;  // task boundary index the backbone was taken at
  std::string split;  // "train" | "test"
};

// N×d features with aligned labels in the global label space.
template <typename Scalar>
struct EmbeddingMatrix {
  Mat<Scalar> features;  // one row per sample
  VecI labels;
  EmbeddingSource source;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  void check() const {
    require(features.rows() == labels.size(), Errc::shape_mismatch,
            "embedding rows != label count");
    require(features.allFinite(), Errc::degenerate_input, "embedding has non-finite entries");
  }

  template <typename T>
  EmbeddingMatrix<T> cast() const {
    return EmbeddingMatrix<T>{features.template cast<T>(), labels, source};
  }
};

// Binary container: magic "CLEM", version, N, d, float32 row-major features,
// int64 labels. Metadata lives in a JSON sidecar written by the harness.
template <typename Scalar>
void save_embeddings(const EmbeddingMatrix<Scalar>& emb, const std::string& path) {
  emb.check();
  BinWriter w(path);
  w.magic("CLEM");
  w.u32(1);
  w.u64(static_cast<std::uint64_t>(emb.rows()));
  w.u64(static_cast<std::uint64_t>(emb.dim()));
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
      emb.features.template cast<float>();
  w.array(rm.data(), static_cast<std::size_t>(rm.size()));
  std::vector<std::int64_t> labels(emb.labels.data(), emb.labels.data() + emb.labels.size());
  w.array(labels.data(), labels.size());
  w.str(emb.source.run_id);
  w.i64(emb.source.boundary);
  w.str(emb.source.split);
  w.close();
}

template <typename Scalar = float>
EmbeddingMatrix<Scalar> load_embeddings(const std::string& path) {
  BinReader r(path);
  r.magic("CLEM");
  const auto version = r.u32();
  require(version == 1, Errc::io_error, "unsupported CLEM version " + std::to_string(version));
  const auto n = static_cast<Eigen::Index>(r.u64());
  const auto d = static_cast<Eigen::Index>(r.u64());
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, d);
  r.array_into(rm.data(), static_cast<std::size_t>(n * d));
  const auto labels = r.array<std::int64_t>();
  require(static_cast<Eigen::Index>(labels.size()) == n, Errc::io_error, "label count mismatch");
  EmbeddingMatrix<Scalar> emb;
  emb.features = rm.cast<Scalar>();
  emb.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) emb.labels[i] = static_cast<int>(labels[static_cast<std::size_t>(i)]);
  emb.source.run_id = r.str();
  emb.source.boundary = static_cast<int>(r.i64());
  emb.source.split = r.str();
  return emb;
}

}  // namespace clrep::eval
