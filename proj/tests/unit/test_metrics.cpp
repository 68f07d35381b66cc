#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <map>

#include "clrep/eval/metrics.hpp"
#include "test_util.hpp"

using namespace clrep;
using namespace clrep::eval;
using clrep::testutil::random_matrix;
using clrep::testutil::random_orthogonal;

namespace {

EmbeddingMatrix<double> make_emb(const MatD& f, const std::vector<int>& labels) {
  EmbeddingMatrix<double> e;
  e.features = f;
  e.labels = Eigen::Map<const VecI>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return e;
}

// Exhaustive k-NN oracle: explicit dot products, full sort of all similarities,
// then the documented vote. Shares no code with the implementation.
double knn_oracle(const EmbeddingMatrix<double>& train, const EmbeddingMatrix<double>& test, int k,
                  double temperature) {
  const auto normalize = [](const MatD& m) {
    MatD out = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double n = 0;
      for (Eigen::Index j = 0; j < m.cols(); ++j) n += m(i, j) * m(i, j);
      n = std::sqrt(n);
      if (n > 0) out.row(i) /= n;
    }
    return out;
  };
  const MatD tr = normalize(train.features);
  const MatD te = normalize(test.features);
  const int kk = std::min<int>(k, static_cast<int>(tr.rows()));
  int correct = 0;
  for (Eigen::Index i = 0; i < te.rows(); ++i) {
    std::vector<std::pair<double, int>> sims;
    for (Eigen::Index j = 0; j < tr.rows(); ++j) {
      double s = 0;
      for (Eigen::Index d = 0; d < tr.cols(); ++d) s += te(i, d) * tr(j, d);
      sims.emplace_back(s, static_cast<int>(j));
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::map<int, double> votes;
    for (int j = 0; j < kk; ++j)
      votes[train.labels[sims[static_cast<std::size_t>(j)].second]] +=
          std::exp(sims[static_cast<std::size_t>(j)].first / temperature);
    int best = votes.begin()->first;
    double best_v = votes.begin()->second;
    for (const auto& [cls, v] : votes)
      if (v > best_v) {
        best_v = v;
        best = cls;
      }
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(te.rows());
}

double nmc_oracle(const EmbeddingMatrix<double>& test, const PrototypeSet<double>& protos) {
  int correct = 0;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    Eigen::RowVectorXd f = test.features.row(i);
    const double n = f.norm();
    if (n > 0) f /= n;
    double best_sim = -1e300;
    int best_cls = -1;
    for (Eigen::Index c = 0; c < protos.prototypes.rows(); ++c) {
      double s = 0;
      for (Eigen::Index d = 0; d < f.size(); ++d) s += f[d] * protos.prototypes(c, d);
      if (s > best_sim) {
        best_sim = s;
        best_cls = protos.class_ids[static_cast<std::size_t>(c)];
      }
    }
    if (best_cls == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

}  // namespace

TEST_CASE("knn: identical point wins at k=1") {
  MatD f(3, 4);
  f << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  const auto train = make_emb(f, {5, 6, 7});
  const auto test = make_emb(MatD(f.row(1)), {6});
  CHECK(knn_accuracy(train, test, 1, 0.07) == 1.0);
}

TEST_CASE("knn: chance level on shuffled 2-class labels") {
  RngStream rng(123);
  const int n = 800;
  MatD tr = random_matrix(rng, n, 8);
  MatD te = random_matrix(rng, 300, 8);
  std::vector<int> tr_labels, te_labels;
  for (int i = 0; i < n; ++i) tr_labels.push_back(static_cast<int>(rng.uniform_int(2)));
  for (int i = 0; i < 300; ++i) te_labels.push_back(static_cast<int>(rng.uniform_int(2)));
  const double acc = knn_accuracy(make_emb(tr, tr_labels), make_emb(te, te_labels), 20, 0.07);
  CHECK(acc > 0.4);
  CHECK(acc < 0.6);
}

TEST_CASE("knn matches the exhaustive oracle on random instances") {
  RngStream rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int ntr = 20 + static_cast<int>(rng.uniform_int(180));
    const int nte = 10 + static_cast<int>(rng.uniform_int(40));
    const int d = 3 + static_cast<int>(rng.uniform_int(13));
    const int k = 1 + static_cast<int>(rng.uniform_int(25));
    MatD tr = random_matrix(rng, ntr, d);
    MatD te = random_matrix(rng, nte, d);
    std::vector<int> trl, tel;
    for (int i = 0; i < ntr; ++i) trl.push_back(static_cast<int>(rng.uniform_int(3)));
    for (int i = 0; i < nte; ++i) tel.push_back(static_cast<int>(rng.uniform_int(3)));
    const auto train = make_emb(tr, trl), test = make_emb(te, tel);
    CHECK(knn_accuracy(train, test, k, 0.07) == knn_oracle(train, test, k, 0.07));
  }
}

TEST_CASE("knn: empty reference raises") {
  const auto test = make_emb(MatD::Ones(2, 3), {0, 1});
  EmbeddingMatrix<double> train;
  train.features.resize(0, 3);
  train.labels.resize(0);
  CHECK_THROWS_WITH_AS(knn_accuracy(train, test, 1, 0.07) , doctest::Contains("EmptyReference"), Error);
}

TEST_CASE("prototypes: single sample per class is the normalized sample") {
  MatD f(2, 3);
  f << 3, 0, 0, 0, 0, 2;
  const auto protos = compute_prototypes(make_emb(f, {4, 9}));
  REQUIRE(protos.class_ids == std::vector<int>{4, 9});
  CHECK(protos.prototypes(0, 0) == doctest::Approx(1.0));
  CHECK(protos.prototypes(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("prototypes: antipodal pair degenerates") {
  MatD f(2, 2);
  f << 1, 0, -1, 0;
  CHECK_THROWS_WITH_AS(compute_prototypes(make_emb(f, {0, 0})),
                       doctest::Contains("DegenerateMean"), Error);
}

TEST_CASE("prototypes match a direct per-class mean oracle") {
  RngStream rng(99);
  MatD f = random_matrix(rng, 60, 5);
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(static_cast<int>(rng.uniform_int(4)) * 10);
  const auto protos = compute_prototypes(make_emb(f, labels));

  std::map<int, std::pair<Eigen::RowVectorXd, int>> sums;
  for (int i = 0; i < 60; ++i) {
    Eigen::RowVectorXd row = f.row(i);
    row /= row.norm();
    auto [it, fresh] = sums.try_emplace(labels[static_cast<std::size_t>(i)],
                                        Eigen::RowVectorXd::Zero(5), 0);
    it->second.first += row;
    it->second.second += 1;
  }
  for (std::size_t c = 0; c < protos.class_ids.size(); ++c) {
    auto [sum, count] = sums.at(protos.class_ids[c]);
    Eigen::RowVectorXd mean = sum / count;
    mean /= mean.norm();
    CHECK((protos.prototypes.row(static_cast<Eigen::Index>(c)) - mean).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("prototypes: expected_classes enforces coverage") {
  MatD f = MatD::Identity(2, 4);
  CHECK_THROWS_WITH_AS(compute_prototypes(make_emb(f, {0, 1}), {0, 1, 2}),
                       doctest::Contains("MissingClass"), Error);
}

TEST_CASE("nmc: orthonormal prototypes classify their own points") {
  MatD f = MatD::Identity(4, 4);
  const auto train = make_emb(f, {0, 1, 2, 3});
  const auto protos = compute_prototypes(train);
  CHECK(nmc_accuracy(train, protos) == 1.0);
}

TEST_CASE("nmc: equidistant point breaks ties to the lower class id") {
  MatD trainf(2, 2);
  trainf << 1, 0, 0, 1;
  const auto protos = compute_prototypes(make_emb(trainf, {3, 8}));
  MatD testf(1, 2);
  testf << 1, 1;  // equal cosine to both prototypes
  CHECK(nmc_accuracy(make_emb(testf, {3}), protos) == 1.0);
  CHECK(nmc_accuracy(make_emb(testf, {8}), protos) == 0.0);
}

TEST_CASE("nmc matches the exhaustive oracle on random instances") {
  RngStream rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int ntr = 30 + static_cast<int>(rng.uniform_int(170));
    const int nte = 10 + static_cast<int>(rng.uniform_int(60));
    const int d = 3 + static_cast<int>(rng.uniform_int(13));
    MatD tr = random_matrix(rng, ntr, d);
    MatD te = random_matrix(rng, nte, d);
    std::vector<int> trl, tel;
    const int classes = 2 + static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < ntr; ++i) trl.push_back(static_cast<int>(rng.uniform_int(classes)));
    for (int i = 0; i < nte; ++i) tel.push_back(static_cast<int>(rng.uniform_int(classes)));
    bool all_present = true;
    for (int c = 0; c < classes; ++c)
      all_present = all_present && std::count(trl.begin(), trl.end(), c) > 0;
    if (!all_present) continue;
    const auto protos = compute_prototypes(make_emb(tr, trl));
    const auto test = make_emb(te, tel);
    CHECK(nmc_accuracy(test, protos) == nmc_oracle(test, protos));
  }
}

TEST_CASE("nmc: uncovered test class raises") {
  MatD trainf = MatD::Identity(2, 3);
  const auto protos = compute_prototypes(make_emb(trainf, {0, 1}));
  CHECK_THROWS_WITH_AS(nmc_accuracy(make_emb(MatD::Ones(1, 3), {2}), protos),
                       doctest::Contains("MissingClass"), Error);
}

TEST_CASE("nmc stability: identical checkpoints give three equal accuracies") {
  RngStream rng(5);
  MatD tr = random_matrix(rng, 80, 6);
  MatD te = random_matrix(rng, 40, 6);
  std::vector<int> trl, tel;
  for (int i = 0; i < 80; ++i) trl.push_back(i % 4);
  for (int i = 0; i < 40; ++i) tel.push_back(i % 4);
  const auto a = make_emb(tr, trl), b = make_emb(te, tel);
  const auto r = nmc_stability(a, b, a, b);
  CHECK(r.acc_stale == r.acc_after_t1);
  CHECK(r.acc_upper == r.acc_after_t1);
}

TEST_CASE("nmc stability: orthogonal drift keeps the upper bound, degrades stale") {
  RngStream rng(31);
  const int d = 8;
  // well-separated class clusters so accuracy is high under the right prototypes
  MatD centers = 4.0 * random_matrix(rng, 3, d);
  const auto draw = [&](int n, std::vector<int>& labels) {
    MatD f(n, d);
    for (int i = 0; i < n; ++i) {
      const int c = i % 3;
      labels.push_back(c);
      for (int j = 0; j < d; ++j) f(i, j) = centers(c, j) + 0.3 * rng.normal();
    }
    return f;
  };
  std::vector<int> trl, tel;
  MatD tr = draw(90, trl);
  MatD te = draw(45, tel);
  const MatD q = random_orthogonal(rng, d);
  const auto r = nmc_stability(make_emb(tr, trl), make_emb(te, tel), make_emb(MatD(tr * q), trl),
                               make_emb(MatD(te * q), tel));
  CHECK(r.acc_after_t1 == doctest::Approx(1.0));
  CHECK(r.acc_upper == r.acc_after_t1);  // rotation is invisible once prototypes are recomputed
  CHECK(r.acc_stale < r.acc_upper);
}

TEST_CASE("cka: self-similarity is 1") {
  RngStream rng(1);
  const MatD x = random_matrix(rng, 50, 7);
  CHECK(linear_cka(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cka: invariant to orthogonal maps and isotropic scaling") {
  RngStream rng(2);
  const MatD x = random_matrix(rng, 60, 9);
  const MatD q = random_orthogonal(rng, 9);
  CHECK(linear_cka(x, MatD(2.5 * x * q)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(linear_cka(x, MatD(-0.3 * x * q)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cka: symmetric, bounded, and sensitive to rank collapse") {
  RngStream rng(3);
  const MatD x = random_matrix(rng, 80, 10);
  const MatD y = random_matrix(rng, 80, 6);
  const double xy = linear_cka(x, y);
  CHECK(xy == doctest::Approx(linear_cka(y, x)).epsilon(1e-12));
  CHECK(xy >= 0.0);
  CHECK(xy <= 1.0);

  MatD projector = MatD::Zero(10, 10);
  for (int i = 0; i < 3; ++i) projector(i, i) = 1.0;  // rank-3
  CHECK(linear_cka(x, MatD(x * projector)) < 1.0 - 1e-6);
}

TEST_CASE("cka: degenerate input raises") {
  const MatD x = MatD::Ones(10, 4);  // constant → centered zero
  RngStream rng(4);
  const MatD y = random_matrix(rng, 10, 4);
  CHECK_THROWS_WITH_AS(linear_cka(x, y), doctest::Contains("DegenerateInput"), Error);
}

TEST_CASE("spectrum: isotropic features need every dimension") {
  // 10 orthogonal equal-variance directions: 9/10 < 0.95 so var95 = 10
  MatD f = MatD::Zero(20, 10);
  for (int i = 0; i < 20; ++i) f(i, i % 10) = (i < 10) ? 1.0 : -1.0;
  const auto rec = spectrum(f);
  CHECK(rec.var95_index == 10);
  CHECK(rec.cumulative[rec.cumulative.size() - 1] == 1.0);
}

TEST_CASE("spectrum: rank-1 features collapse to one dimension") {
  RngStream rng(5);
  VecD dir = VecD::Random(6);
  MatD f(30, 6);
  for (int i = 0; i < 30; ++i) f.row(i) = (rng.normal() * dir).transpose();
  CHECK(spectrum(f).var95_index == 1);
}

TEST_CASE("spectrum: diagonal covariance (4,3,2,1)") {
  // columns of a Hadamard block are orthogonal and zero-mean
  MatD h(8, 4);
  h << 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1, 1, 1, 1, 1, -1, -1, 1, -1, -1, 1, -1, -1,
      -1, -1, -1, 1, -1;
  MatD f = h;
  const double scale[4] = {2.0, std::sqrt(3.0), std::sqrt(2.0), 1.0};
  for (int j = 0; j < 4; ++j) f.col(j) *= scale[j];
  const auto rec = spectrum(f);
  REQUIRE(rec.eigenvalues.size() == 4);
  CHECK(rec.cumulative[0] == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(rec.cumulative[1] == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(rec.cumulative[2] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(rec.cumulative[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.var95_index == 4);
}

TEST_CASE("spectrum: eigenvalue sum equals total variance; var95 rotation-invariant") {
  RngStream rng(6);
  const MatD f = random_matrix(rng, 200, 16);
  const auto rec = spectrum(f);
  const MatD fc = f.rowwise() - f.colwise().mean();
  const double trace = (fc.transpose() * fc / 199.0).trace();
  CHECK(rec.eigenvalues.sum() == doctest::Approx(trace).epsilon(1e-6));

  const MatD q = random_orthogonal(rng, 16);
  CHECK(spectrum(MatD(f * q)).var95_index == rec.var95_index);
}

TEST_CASE("spectrum: constant features raise") {
  CHECK_THROWS_WITH_AS(spectrum(MatD(MatD::Constant(10, 3, 2.0))), doctest::Contains("DegenerateInput"),
                       Error);
}

TEST_CASE("derived metrics reproduce the reported identities") {
  CHECK(forgetting(88.8, 79.1) == doctest::Approx(9.7).epsilon(1e-12));
  CHECK(forgetting(93.3, 88.8) == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(forgetting(50.0, 50.0) == 0.0);
  CHECK(forward_transfer(91.5, 92.6) == doctest::Approx(-1.1).epsilon(1e-12));
  CHECK(forward_transfer(93.2, 93.3) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(forward_transfer(10.0, 10.0) == 0.0);
  CHECK(exclusion_difference(88.8, 84.5) == doctest::Approx(4.3).epsilon(1e-12));
  CHECK(exclusion_difference(76.1, 74.9) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(exclusion_difference(33.3, 33.3) == 0.0);
}

TEST_CASE("embedding container round-trips") {
  RngStream rng(8);
  EmbeddingMatrix<float> emb;
  emb.features = random_matrix(rng, 17, 5).cast<float>();
  emb.labels.resize(17);
  for (int i = 0; i < 17; ++i) emb.labels[i] = static_cast<int>(rng.uniform_int(100));
  emb.source = {"run-xyz", 3, "test"};
  const std::string path = "test_emb.clemb";
  save_embeddings(emb, path);
  const auto back = load_embeddings<float>(path);
  CHECK(back.features == emb.features);
  CHECK(back.labels == emb.labels);
  CHECK(back.source.run_id == "run-xyz");
  CHECK(back.source.boundary == 3);
  CHECK(back.source.split == "test");
  std::filesystem::remove(path);
}
