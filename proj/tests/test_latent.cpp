#include <gtest/gtest.h>

#include <sstream>

#include "normpuf/latent.hpp"
#include "normpuf/pipeline.hpp"
#include "oracles.hpp"

using namespace normpuf;

namespace {

/// d×N samples with a decaying spectrum so eigenvalues are well separated.
Eigen::MatrixXd spectral_samples(int d, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd x(d, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i) x(i, j) = nd(rng) * std::pow(0.85, i) * 0.05 + 0.01 * i;
  return x;
}

double dense_check(const Eigen::MatrixXd& x, const LatentCodec& c) {
  const int d = static_cast<int>(x.rows()), n = static_cast<int>(x.cols());
  const Eigen::VectorXd mu = x.rowwise().mean();
  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += (x(a, j) - mu[a]) * (x(b, j) - mu[b]);
      cov[static_cast<std::size_t>(a) * d + b] = s / (n - 1);
    }
  const auto eig = oracle::jacobi(cov, static_cast<std::size_t>(d));
  double worst = 0.0;
  for (std::size_t k = 0; k < c.m(); ++k) {
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += c.basis()(static_cast<Eigen::Index>(k), i) * eig.vectors[k][i];
    const double sign = dot < 0 ? -1.0 : 1.0;
    for (int i = 0; i < d; ++i)
      worst = std::max(worst, std::abs(c.basis()(static_cast<Eigen::Index>(k), i) - sign * eig.vectors[k][i]));
    EXPECT_NEAR(c.explained_variance()[static_cast<Eigen::Index>(k)], eig.values[k], 1e-12 * eig.values[0]);
  }
  return worst;
}

std::vector<NormMap> small_holdout(std::size_t sheets, std::size_t scans, std::uint64_t seed) {
  SurfaceParams sp;
  sp.size = 48;
  const PaperStock stock(StockParams{}, sp);
  std::vector<NormMap> out;
  for (std::size_t s = 0; s < sheets; ++s) {
    const auto sheet = stock.sheet(derive_seed(seed, {s}));
    for (std::size_t k = 0; k < scans; ++k) out.push_back(acquire(sheet, Protocol::mobile(4, 983), derive_seed(seed, {s, k})));
  }
  return out;
}

}  // namespace

TEST(Pca, SnapshotMatchesDenseEigenSolve) {
  for (auto [d, n] : {std::pair{64, 10}, std::pair{64, 40}, std::pair{36, 20}, std::pair{16, 60}}) {
    const auto x = spectral_samples(d, n, static_cast<std::uint64_t>(d * 100 + n));
    const auto c = fit_matrix(x, d, 1, CodecLayout::x, 0.9999);
    EXPECT_LT(dense_check(x, c), 1e-8) << d << "x" << n;
  }
}

TEST(Pca, TwoMapsSpanALine) {
  const auto h = small_holdout(2, 1, 3);
  const auto c = fit(h, 0.99, CodecLayout::x);
  EXPECT_EQ(c.m(), 1u);
  EXPECT_NEAR(c.explained_fraction(1), 1.0, 1e-12);
}

TEST(Pca, BasisOrthonormal) {
  const auto c = fit(small_holdout(6, 3, 4), 0.99, CodecLayout::joint);
  const Eigen::MatrixXd g = c.basis() * c.basis().transpose();
  EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, FortyTwoMapHoldoutReconstruction) {
  const auto h = small_holdout(14, 3, 5);
  ASSERT_EQ(h.size(), 42u);
  const auto c = fit(h, 0.99, CodecLayout::x);
  EXPECT_LE(c.m(), 41u);
  EXPECT_GE(c.explained_fraction(c.m()), 0.99);
  double res = 0.0, tot = 0.0;
  for (const auto& m : h) {
    const auto r = c.reconstruct(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double mu = c.mean()[static_cast<Eigen::Index>(i)];
      res += (r.nx()[i] - m.nx()[i]) * (r.nx()[i] - m.nx()[i]);
      tot += (m.nx()[i] - mu) * (m.nx()[i] - mu);
    }
  }
  EXPECT_LE(std::sqrt(res / tot), std::sqrt(1.0 - 0.99) + 1e-6);
}

TEST(Pca, EncodeDecodeIdentities) {
  const auto h = small_holdout(5, 2, 6);
  const auto c = fit(h, 0.999, CodecLayout::x);
  const auto mean_map = c.decode(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.m())));
  EXPECT_LT(c.encode(mean_map).cwiseAbs().maxCoeff(), 1e-12);
  Rng rng(1);
  std::normal_distribution<double> nd(0.0, 0.05);
  Eigen::VectorXd z(static_cast<Eigen::Index>(c.m()));
  for (auto& v : z) v = nd(rng);
  EXPECT_LT((c.encode(c.decode(z)) - z).cwiseAbs().maxCoeff(), 1e-9);
  // Reconstructing a holdout member within the span is exact.
  const auto full = fit(h, 1.0, CodecLayout::y);
  const auto r = full.reconstruct(h[3]);
  for (std::size_t i = 0; i < r.size(); ++i) ASSERT_NEAR(r.ny()[i], h[3].ny()[i], 1e-9);
}

TEST(Pca, DecodeKeepsOtherComponentAndClamps) {
  const auto h = small_holdout(3, 2, 7);
  const auto c = fit(h, 0.99, CodecLayout::x);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(c.m()), 100.0);
  const auto m = c.decode(z, h[0]);
  for (std::size_t i = 0; i < m.size(); ++i) {
    ASSERT_LE(std::abs(m.nx()[i]), kComponentLimit);
    ASSERT_EQ(m.ny()[i], h[0].ny()[i]);
  }
}

TEST(Pca, Errors) {
  const auto h = small_holdout(2, 1, 8);
  EXPECT_THROW((void)fit(std::span(h).first(1), 0.9, CodecLayout::x), Error);
  std::vector<NormMap> mixed{h[0], NormMap::zeros(10, 10)};
  EXPECT_THROW((void)fit(mixed, 0.9, CodecLayout::x), Error);
  EXPECT_THROW((void)fit(h, 0.0, CodecLayout::x), Error);
  const auto c = fit(h, 0.9, CodecLayout::x);
  EXPECT_THROW((void)c.decode_raw(Eigen::VectorXd::Zero(5)), Error);
  EXPECT_THROW((void)c.encode(NormMap::zeros(10, 10)), Error);
}

TEST(Pca, LpcRoundTrip) {
  const auto c = fit(small_holdout(4, 2, 9), 0.99, CodecLayout::joint);
  std::stringstream ss;
  write_lpc(ss, c);
  const auto back = read_lpc(ss);
  EXPECT_EQ(back.m(), c.m());
  EXPECT_EQ(back.d(), c.d());
  EXPECT_EQ(back.layout(), CodecLayout::joint);
  EXPECT_LT((back.basis() - c.basis()).cwiseAbs().maxCoeff(), 1e-6);
  const Eigen::MatrixXd g = back.basis() * back.basis().transpose();
  EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-12);
}
