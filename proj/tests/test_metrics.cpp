#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "repalign/metrics.hpp"
#include "support.hpp"

using namespace repalign;
using core::FeatureMatrix;
using core::GramKernel;
using core::Matrix;
using metrics::Similarity;

namespace {

FeatureMatrix points1d(const std::vector<double>& xs) {
    Matrix m(static_cast<int>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<int>(i), 0) = xs[i];
    return FeatureMatrix(m);
}

// Brute-force k-NN oracle: full sort of all candidates by (key, index).
std::vector<std::vector<int>> knn_oracle(const Matrix& x, int k, Similarity sim) {
    int n = static_cast<int>(x.rows());
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> cand;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double key = sim == Similarity::inner_product ? -x.row(i).dot(x.row(j))
                                                          : (x.row(i) - x.row(j)).squaredNorm();
            cand.emplace_back(key, j);
        }
        std::sort(cand.begin(), cand.end());
        for (int t = 0; t < k; ++t) out[static_cast<std::size_t>(i)].push_back(cand[static_cast<std::size_t>(t)].second);
    }
    return out;
}

}  // namespace

TEST_CASE("knn_sets: collinear points, k=1, euclidean") {
    auto sets = metrics::knn_sets(points1d({0, 1, 2}), 1, Similarity::euclidean).sets;
    CHECK(sets[0] == std::vector<int>{1});
    CHECK(sets[1] == std::vector<int>{0});
    CHECK(sets[2] == std::vector<int>{1});
}

TEST_CASE("knn_sets: n=2 leaves one choice") {
    auto sets = metrics::knn_sets(points1d({3, 9}), 1, Similarity::euclidean).sets;
    CHECK(sets[0] == std::vector<int>{1});
    CHECK(sets[1] == std::vector<int>{0});
}

TEST_CASE("knn_sets: ties broken toward the lowest index") {
    auto sets = metrics::knn_sets(points1d({5, 5, 5}), 1, Similarity::euclidean).sets;
    CHECK(sets[0] == std::vector<int>{1});
    CHECK(sets[1] == std::vector<int>{0});
    CHECK(sets[2] == std::vector<int>{0});
}

TEST_CASE("knn_sets: k out of range") {
    CHECK_THROWS_AS(metrics::knn_sets(points1d({0, 1}), 2, Similarity::euclidean),
                    validation_error);
    CHECK_THROWS_AS(metrics::knn_sets(points1d({0, 1}), 0, Similarity::euclidean),
                    validation_error);
}

TEST_CASE("knn_sets and knn_ranking match the brute-force oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto f = testsupport::random_features(23, 4, seed);
        for (auto sim : {Similarity::inner_product, Similarity::euclidean}) {
            auto oracle = knn_oracle(f.data(), 5, sim);
            auto ranking = metrics::knn_ranking(f, 5, sim).lists;
            CHECK(ranking == oracle);
            auto sets = metrics::knn_sets(f, 5, sim).sets;
            for (std::size_t i = 0; i < oracle.size(); ++i) {
                auto sorted = oracle[i];
                std::sort(sorted.begin(), sorted.end());
                CHECK(sets[i] == sorted);
            }
        }
    }
}

TEST_CASE("mutual_knn: identical features score 1") {
    auto f = testsupport::random_features(20, 3, 4);
    CHECK(metrics::mutual_knn(f, f, 4).value == doctest::Approx(1.0));
}

TEST_CASE("mutual_knn: disjoint neighbor sets score 0") {
    // F pairs (0,1),(2,3); G pairs (0,2),(1,3)
    Matrix mf(4, 2), mg(4, 2);
    mf << 0, 0, 0.1, 0, 10, 0, 10.1, 0;
    mg << 0, 0, 10, 0, 0.1, 0, 10.1, 0;
    auto s = metrics::mutual_knn(FeatureMatrix(mf), FeatureMatrix(mg), 1, Similarity::euclidean);
    CHECK(s.value == doctest::Approx(0.0));
}

TEST_CASE("mutual_knn: hand-built half agreement at k=2") {
    // F: line 0,1,2,3 / G: swap the roles of samples 2 and 3 far apart
    // Verify the expected 0.5 with the brute-force oracle before asserting.
    Matrix mf(4, 1), mg(4, 1);
    mf << 0, 1, 2, 3;
    mg << 0, 1, 100, 5;
    auto of = knn_oracle(mf, 2, Similarity::euclidean);
    auto og = knn_oracle(mg, 2, Similarity::euclidean);
    double total = 0;
    for (int i = 0; i < 4; ++i) {
        std::set<int> sf(of[static_cast<std::size_t>(i)].begin(), of[static_cast<std::size_t>(i)].end());
        for (int j : og[static_cast<std::size_t>(i)]) total += sf.count(j);
    }
    double expected = total / (4.0 * 2.0);
    CHECK(expected == doctest::Approx(0.5));
    auto s = metrics::mutual_knn(FeatureMatrix(mf), FeatureMatrix(mg), 2, Similarity::euclidean);
    CHECK(s.value == doctest::Approx(expected));
}

TEST_CASE("mutual_knn: mismatched inputs error") {
    auto f = testsupport::random_features(6, 2, 1);
    auto g = testsupport::random_features(7, 2, 2);
    CHECK_THROWS_AS(metrics::mutual_knn(f, g, 2), validation_error);
    FeatureMatrix relabeled(f.data(), {"a", "b", "c", "d", "e", "f"});
    CHECK_THROWS_AS(metrics::mutual_knn(f, relabeled, 2), validation_error);
}

TEST_CASE("mutual_knn: invariant to orthogonal rotation of rows") {
    auto f = testsupport::random_features(18, 5, 8);
    auto g = testsupport::random_features(18, 5, 9);
    Matrix r = testsupport::random_orthogonal(5, 10);
    FeatureMatrix frot(f.data() * r);
    double a = metrics::mutual_knn(f, g, 3).value;
    double b = metrics::mutual_knn(frot, g, 3).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("hsic_biased: zero kernel gives zero") {
    auto k = core::gram(testsupport::random_features(5, 3, 1));
    GramKernel z(Matrix::Zero(5, 5));
    CHECK(metrics::hsic_biased(k, z) == doctest::Approx(0.0));
}

TEST_CASE("hsic_biased: identity kernels at n=2 (hand centering and trace)") {
    // K̄ = HKH = H for K = I; tr(H·H) = tr(H) = 1; divided by (n-1)^2 = 1.
    GramKernel i2(Matrix::Identity(2, 2));
    CHECK(metrics::hsic_biased(i2, i2) == doctest::Approx(1.0));
}

TEST_CASE("hsic_biased: orthogonal centered kernels give zero") {
    // x and y are centered and orthogonal, so tr(K̄L̄) = (x·y)^2 = 0
    Matrix x(3, 1), y(3, 1);
    x << 1, 0, -1;
    y << 1, -2, 1;
    auto kx = core::gram(FeatureMatrix(x));
    auto ky = core::gram(FeatureMatrix(y));
    CHECK(metrics::hsic_biased(kx, ky) == doctest::Approx(0.0).epsilon(1e-12));
}

namespace {

// Literal transcription of the unbiased HSIC estimator (Song et al.),
// independent triple-loop evaluation.
double hsic_unbiased_oracle(Matrix k, Matrix l) {
    int n = static_cast<int>(k.rows());
    for (int i = 0; i < n; ++i) {
        k(i, i) = 0.0;
        l(i, i) = 0.0;
    }
    double trace = 0.0, sk = 0.0, sl = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            trace += k(i, j) * l(j, i);
            sk += k(i, j);
            sl += l(i, j);
            for (int t = 0; t < n; ++t) cross += k(i, j) * l(j, t);
        }
    }
    double nn = n;
    return (trace + sk * sl / ((nn - 1) * (nn - 2)) - 2.0 * cross / (nn - 2)) / (nn * (nn - 3));
}

}  // namespace

TEST_CASE("hsic_unbiased: diagonal-only kernels carry no signal") {
    GramKernel i5(Matrix::Identity(5, 5));
    CHECK(metrics::hsic_unbiased(i5, i5) == doctest::Approx(0.0));
}

TEST_CASE("hsic_unbiased: matches the published formula on random pairs") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        auto k = core::gram(testsupport::random_features(5, 3, seed));
        auto l = core::gram(testsupport::random_features(5, 3, seed + 50));
        double expected = hsic_unbiased_oracle(k.data(), l.data());
        CHECK(metrics::hsic_unbiased(k, l) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("hsic_unbiased: near-zero mean under independence") {
    // Monte-Carlo null: the estimator is unbiased, so the mean over seeded
    // trials of independent features stays within 3 standard errors of 0.
    const int trials = 1000;
    std::vector<double> vals;
    vals.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        auto k = core::gram(testsupport::random_features(10, 3, 2000 + t));
        auto l = core::gram(testsupport::random_features(10, 3, 9000 + t));
        vals.push_back(metrics::hsic_unbiased(k, l));
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= trials;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (trials - 1);
    double se = std::sqrt(var / trials);
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("hsic_unbiased: small n rejected") {
    GramKernel i3(Matrix::Identity(3, 3));
    CHECK_THROWS_AS(metrics::hsic_unbiased(i3, i3), validation_error);
}

TEST_CASE("cka: self-comparison and isotropic scaling give 1") {
    auto k = core::gram(testsupport::random_features(9, 4, 3));
    CHECK(metrics::cka(k, k).value == doctest::Approx(1.0).epsilon(1e-12));
    GramKernel scaled(3.7 * k.data());
    CHECK(metrics::cka(k, scaled).value == doctest::Approx(1.0).epsilon(1e-12));
}

namespace {

// CKA oracle via explicit HKH / HLH loops.
double cka_oracle(const Matrix& k, const Matrix& l) {
    int n = static_cast<int>(k.rows());
    Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
    Matrix kc = h * k * h;
    Matrix lc = h * l * h;
    double kl = 0.0, kk = 0.0, ll = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            kl += kc(i, j) * lc(i, j);
            kk += kc(i, j) * kc(i, j);
            ll += lc(i, j) * lc(i, j);
        }
    }
    return kl / std::sqrt(kk * ll);
}

}  // namespace

TEST_CASE("cka: matches the direct trace formula") {
    auto f = testsupport::random_features(6, 3, 21);
    auto g = testsupport::random_features(6, 3, 22);
    auto k = core::gram(f);
    auto l = core::gram(g);
    CHECK(metrics::cka(k, l).value ==
          doctest::Approx(cka_oracle(k.data(), l.data())).epsilon(1e-12));
}

TEST_CASE("cka: constant features rejected") {
    GramKernel c(Matrix::Constant(4, 4, 1.0));
    auto l = core::gram(testsupport::random_features(4, 2, 5));
    CHECK_THROWS_AS(metrics::cka(c, l), numeric_error);
}

namespace {

// Full independent CKNNA oracle: kernel, row centering, neighbor sets by
// sorting kernel entries, masked double loop.
double cknna_oracle(const Matrix& xf, const Matrix& xg, int k) {
    int n = static_cast<int>(xf.rows());
    Matrix km = xf * xf.transpose();
    Matrix lm = xg * xg.transpose();
    auto sets_of = [&](const Matrix& km_) {
        std::vector<std::set<int>> sets(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> cand;
            for (int j = 0; j < n; ++j) {
                if (j != i) cand.emplace_back(-km_(i, j), j);
            }
            std::sort(cand.begin(), cand.end());
            for (int t = 0; t < k; ++t) sets[static_cast<std::size_t>(i)].insert(cand[static_cast<std::size_t>(t)].second);
        }
        return sets;
    };
    auto sk = sets_of(km);
    auto sl = sets_of(lm);
    Matrix kc = km, lc = lm;
    for (int i = 0; i < n; ++i) {
        kc.row(i).array() -= km.row(i).mean();
        lc.row(i).array() -= lm.row(i).mean();
    }
    double num = 0.0, df = 0.0, dg = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (!sk[static_cast<std::size_t>(i)].count(j) || !sl[static_cast<std::size_t>(i)].count(j)) continue;
            num += kc(i, j) * lc(i, j);
            df += kc(i, j) * kc(i, j);
            dg += lc(i, j) * lc(i, j);
        }
    }
    return num / std::sqrt(df * dg);
}

}  // namespace

TEST_CASE("cknna: self-comparison scores 1 for any k") {
    auto f = testsupport::random_features(11, 3, 7);
    for (int k : {1, 3, 10}) {
        CHECK(metrics::cknna(f, f, k).value == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cknna: k = n-1 recovers diagonal-excluded cka") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto f = testsupport::random_features(12, 4, 100 + seed);
        auto g = testsupport::random_features(12, 5, 200 + seed);
        double a = metrics::cknna(f, g, 11).value;
        double b = metrics::cka_excluding_diagonal(f, g).value;
        CHECK(a == doctest::Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("cknna: matches the brute-force masked sum") {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        auto f = testsupport::random_features(5, 3, seed);
        auto g = testsupport::random_features(5, 3, seed + 7);
        double expected = cknna_oracle(f.data(), g.data(), 2);
        CHECK(metrics::cknna(f, g, 2).value == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("cknna: empty mutual mask is an error") {
    Matrix mf(4, 2), mg(4, 2);
    mf << 0, 0, 0.1, 0, 10, 0, 10.1, 0;
    mg << 0, 0, 10, 0, 0.1, 0, 10.1, 0;
    // inner products reproduce the euclidean neighborhoods for these layouts
    CHECK_THROWS_AS(metrics::cknna(FeatureMatrix(mf), FeatureMatrix(mg), 1), numeric_error);
}

TEST_CASE("mutual neighbor pair count: row sums bounded by k, total equals n*k*m_NN") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto f = testsupport::random_features(15, 4, 300 + seed);
        auto g = testsupport::random_features(15, 4, 400 + seed);
        long total = metrics::mutual_neighbor_pair_count(f, g, 4);
        double mnn = metrics::mutual_knn(f, g, 4).value;
        CHECK(static_cast<double>(total) == doctest::Approx(15.0 * 4.0 * mnn));
        // row bound via the oracle sets
        auto of = knn_oracle(f.data(), 4, Similarity::inner_product);
        auto og = knn_oracle(g.data(), 4, Similarity::inner_product);
        long oracle_total = 0;
        for (int i = 0; i < 15; ++i) {
            std::set<int> sf(of[static_cast<std::size_t>(i)].begin(), of[static_cast<std::size_t>(i)].end());
            long row = 0;
            for (int j : og[static_cast<std::size_t>(i)]) row += sf.count(j);
            CHECK(row <= 4);
            oracle_total += row;
        }
        CHECK(total == oracle_total);
    }
}

namespace {

// Textbook CCA oracle on explicitly projected data: whiten with the inverse
// square root of each covariance and read singular values.
double svcca_oracle(const Matrix& xf, const Matrix& xg, double variance_kept) {
    auto project = [&](const Matrix& x) {
        Matrix c = x.rowwise() - x.colwise().mean();
        Eigen::BDCSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
        auto s = svd.singularValues();
        double total = s.squaredNorm();
        double run = 0.0;
        int keep = 0;
        for (int i = 0; i < s.size(); ++i) {
            ++keep;
            run += s(i) * s(i);
            if (run >= variance_kept * total) break;
        }
        return Matrix(c * svd.matrixV().leftCols(keep));
    };
    Matrix pf = project(xf);
    Matrix pg = project(xg);
    auto inv_sqrt = [](const Matrix& m) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(m);
        Matrix d = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal();
        return Matrix(es.eigenvectors() * d * es.eigenvectors().transpose());
    };
    Matrix cff = pf.transpose() * pf;
    Matrix cgg = pg.transpose() * pg;
    Matrix cfg = pf.transpose() * pg;
    Matrix m = inv_sqrt(cff) * cfg * inv_sqrt(cgg);
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues().mean();
}

}  // namespace

TEST_CASE("svcca: identical subspaces and invertible maps score 1") {
    auto f = testsupport::random_features(20, 3, 55);
    CHECK(metrics::svcca(f, f, 0.99).value == doctest::Approx(1.0).epsilon(1e-10));
    Matrix r = testsupport::random_orthogonal(3, 56);
    FeatureMatrix g(f.data() * r);
    CHECK(metrics::svcca(f, g, 0.99).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("svcca: matches the whitened cross-covariance oracle") {
    auto f = testsupport::random_features(20, 3, 61);
    auto g = testsupport::random_features(20, 3, 62);
    double expected = svcca_oracle(f.data(), g.data(), 1.0);
    CHECK(metrics::svcca(f, g, 1.0).value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("svcca: constant features collapse") {
    Matrix c = Matrix::Constant(8, 2, 3.0);
    auto g = testsupport::random_features(8, 2, 63);
    CHECK_THROWS_AS(metrics::svcca(FeatureMatrix(c), g, 0.99), numeric_error);
    CHECK_THROWS_AS(metrics::svcca(g, g, 1.5), validation_error);
}

TEST_CASE("cycle_knn: self-comparison scores 1") {
    for (std::uint64_t seed : {71u, 72u}) {
        auto f = testsupport::random_features(30, 4, seed);
        CHECK(metrics::cycle_knn(f, f, 3).value == doctest::Approx(1.0));
    }
}

TEST_CASE("cycle_knn: layout where no neighborhood survives at k=1") {
    Matrix mf(4, 1), mg(4, 1);
    mf << 0, 1, 4, 5;
    mg << 0, 10, 0.5, 10.5;
    auto s = metrics::cycle_knn(FeatureMatrix(mf), FeatureMatrix(mg), 1, Similarity::euclidean);
    CHECK(s.value == doctest::Approx(0.0));
}

namespace {

double cycle_oracle(const Matrix& xf, const Matrix& xg, int k, Similarity sim) {
    int n = static_cast<int>(xf.rows());
    auto nf = knn_oracle(xf, 1, sim);
    auto ng = knn_oracle(xg, k, sim);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        int j = nf[static_cast<std::size_t>(i)][0];
        const auto& neigh = ng[static_cast<std::size_t>(i)];
        if (std::find(neigh.begin(), neigh.end(), j) != neigh.end()) ++hits;
    }
    return static_cast<double>(hits) / n;
}

}  // namespace

TEST_CASE("cycle_knn: matches the double-lookup oracle and is asymmetric") {
    bool saw_asymmetry = false;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto f = testsupport::random_features(12, 3, 500 + seed);
        auto g = testsupport::random_features(12, 3, 600 + seed);
        double fg = metrics::cycle_knn(f, g, 2).value;
        double gf = metrics::cycle_knn(g, f, 2).value;
        CHECK(fg == doctest::Approx(cycle_oracle(f.data(), g.data(), 2,
                                                 Similarity::inner_product)));
        if (fg != gf) saw_asymmetry = true;
    }
    CHECK(saw_asymmetry);
}

namespace {

// memoized recursive Levenshtein, independent of the iterative DP
int lev_rec(const std::vector<int>& a, const std::vector<int>& b, std::size_t i, std::size_t j,
            std::vector<std::vector<int>>& memo) {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    int sub = lev_rec(a, b, i - 1, j - 1, memo) + (a[i - 1] == b[j - 1] ? 0 : 1);
    int del = lev_rec(a, b, i - 1, j, memo) + 1;
    int ins = lev_rec(a, b, i, j - 1, memo) + 1;
    return m = std::min({sub, del, ins});
}

int lev_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
    return lev_rec(a, b, a.size(), b.size(), memo);
}

int lcs_rec(const std::vector<int>& a, const std::vector<int>& b, std::size_t i, std::size_t j,
            std::vector<std::vector<int>>& memo) {
    if (i == 0 || j == 0) return 0;
    int& m = memo[i][j];
    if (m >= 0) return m;
    if (a[i - 1] == b[j - 1]) return m = lcs_rec(a, b, i - 1, j - 1, memo) + 1;
    return m = std::max(lcs_rec(a, b, i - 1, j, memo), lcs_rec(a, b, i, j - 1, memo));
}

int lcs_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
    return lcs_rec(a, b, a.size(), b.size(), memo);
}

}  // namespace

TEST_CASE("levenshtein and lcs agree with recursive oracles") {
    CHECK(metrics::levenshtein({1, 2, 3}, {2, 1, 3}) == 2);
    CHECK(metrics::lcs_length({1, 2, 3, 4}, {2, 4, 1, 3}) == 2);
    Rng rng(99);
    for (int t = 0; t < 50; ++t) {
        std::vector<int> a, b;
        for (int i = 0; i < 8; ++i) {
            a.push_back(static_cast<int>(rng.index(10)));
            b.push_back(static_cast<int>(rng.index(10)));
        }
        CHECK(metrics::levenshtein(a, b) == lev_oracle(a, b));
        CHECK(metrics::lcs_length(a, b) == lcs_oracle(a, b));
    }
}

TEST_CASE("edit_knn / lcs_knn: self-score 1, disjoint rankings 0") {
    auto f = testsupport::random_features(10, 3, 81);
    CHECK(metrics::edit_knn(f, f, 3).value == doctest::Approx(1.0));
    CHECK(metrics::lcs_knn(f, f, 3).value == doctest::Approx(1.0));
    Matrix mf(4, 2), mg(4, 2);
    mf << 0, 0, 0.1, 0, 10, 0, 10.1, 0;
    mg << 0, 0, 10, 0, 0.1, 0, 10.1, 0;
    FeatureMatrix ff(mf), gg(mg);
    CHECK(metrics::edit_knn(ff, gg, 1, Similarity::euclidean).value == doctest::Approx(0.0));
    CHECK(metrics::lcs_knn(ff, gg, 1, Similarity::euclidean).value == doctest::Approx(0.0));
}

TEST_CASE("edit_knn / lcs_knn: seeded pairs match ranking-level oracles") {
    for (std::uint64_t seed : {82u, 83u}) {
        auto f = testsupport::random_features(12, 3, seed);
        auto g = testsupport::random_features(12, 3, seed + 11);
        auto rf = knn_oracle(f.data(), 4, Similarity::inner_product);
        auto rg = knn_oracle(g.data(), 4, Similarity::inner_product);
        double edit_total = 0.0, lcs_total = 0.0;
        for (std::size_t i = 0; i < rf.size(); ++i) {
            edit_total += lev_oracle(rf[i], rg[i]) / 4.0;
            lcs_total += lcs_oracle(rf[i], rg[i]) / 4.0;
        }
        CHECK(metrics::edit_knn(f, g, 4).value ==
              doctest::Approx(1.0 - edit_total / 12.0).epsilon(1e-12));
        CHECK(metrics::lcs_knn(f, g, 4).value ==
              doctest::Approx(lcs_total / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("symmetric metrics are symmetric; every normalized metric is 1 on itself") {
    auto f = testsupport::random_features(16, 4, 91);
    auto g = testsupport::random_features(16, 4, 92);
    auto kf = core::gram(f);
    auto kg = core::gram(g);
    CHECK(metrics::mutual_knn(f, g, 3).value == metrics::mutual_knn(g, f, 3).value);
    CHECK(metrics::cka(kf, kg).value == metrics::cka(kg, kf).value);
    CHECK(metrics::cknna(f, g, 3).value == metrics::cknna(g, f, 3).value);
    CHECK(metrics::edit_knn(f, g, 3).value == metrics::edit_knn(g, f, 3).value);
    CHECK(metrics::lcs_knn(f, g, 3).value == metrics::lcs_knn(g, f, 3).value);

    CHECK(metrics::mutual_knn(f, f, 5).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics::cka(kf, kf).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics::cknna(f, f, 5).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics::cycle_knn(f, f, 5).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics::edit_knn(f, f, 5).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics::lcs_knn(f, f, 5).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mutual_knn and cknna rank 20 planted pairs consistently") {
    std::vector<double> mnn, ck;
    for (int t = 0; t < 20; ++t) {
        double noise = 0.05 + 0.1 * t;
        auto [f, g] = testsupport::planted_pair(24, 4, noise, 700 + t);
        mnn.push_back(metrics::mutual_knn(f, g, 4).value);
        ck.push_back(metrics::cknna(f, g, 4).value);
    }
    CHECK(core::spearman_rank_corr(mnn, ck) > 0.0);
}

TEST_CASE("best_layer_alignment: single pair, tie-break, exhaustive max") {
    metrics::MetricSpec spec;
    spec.kind = metrics::MetricKind::mutual_knn;
    spec.k = 3;
    auto l0 = testsupport::random_features(14, 3, 110);
    auto l1 = testsupport::random_features(14, 3, 111);
    auto g0 = testsupport::random_features(14, 3, 112);
    auto g1 = testsupport::random_features(14, 3, 113);

    auto single = metrics::best_layer_alignment({l0}, {g0}, spec);
    CHECK(single.score.value == metrics::mutual_knn(l0, g0, 3).value);
    CHECK(single.pair == std::pair<int, int>{0, 0});

    auto grid = metrics::best_layer_alignment({l0, l1}, {g0, g1}, spec);
    double best = -1.0;
    for (const auto& a : {l0, l1}) {
        for (const auto& b : {g0, g1}) {
            best = std::max(best, metrics::mutual_knn(a, b, 3).value);
        }
    }
    CHECK(grid.score.value == doctest::Approx(best));

    // duplicate of the best F-layer appended: same score, first index kept
    auto& best_layer = grid.pair.first == 0 ? l0 : l1;
    auto dup = metrics::best_layer_alignment({best_layer, best_layer}, {g0, g1}, spec);
    CHECK(dup.score.value == doctest::Approx(grid.score.value));
    CHECK(dup.pair.first == 0);
}

TEST_CASE("best_layer_alignment: per-pair failures recorded, all-fail raises") {
    metrics::MetricSpec spec;
    spec.kind = metrics::MetricKind::mutual_knn;
    spec.k = 3;
    auto good = testsupport::random_features(14, 3, 120);
    auto small = testsupport::random_features(4, 3, 121);  // k=3 invalid at n=4 paired with n=14
    auto res = metrics::best_layer_alignment({good, small}, {good}, spec);
    CHECK(res.pair_errors.size() == 1);
    CHECK(res.pair.first == 0);
    CHECK_THROWS_AS(metrics::best_layer_alignment({small}, {good}, spec), numeric_error);
}

TEST_CASE("metric dispatch by name") {
    auto f = testsupport::random_features(12, 3, 130);
    metrics::MetricSpec spec;
    spec.kind = metrics::metric_from_name("cknna");
    spec.k = 2;
    CHECK(metrics::compute_metric(f, f, spec).value == doctest::Approx(1.0));
    CHECK_THROWS_AS(metrics::metric_from_name("nope"), validation_error);
}
