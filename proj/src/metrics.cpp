#include "repalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repalign/linalg.hpp"

namespace repalign::metrics {

using repalign::numeric_error;
using repalign::validation_error;
using core::Vector;

Similarity similarity_from_name(const std::string& name) {
    if (name == "inner_product") return Similarity::inner_product;
    if (name == "euclidean") return Similarity::euclidean;
    throw validation_error("unknown similarity '" + name + "' (inner_product|euclidean)");
}

std::string to_string(Similarity s) {
    return s == Similarity::inner_product ? "inner_product" : "euclidean";
}

namespace {

void check_k(int k, Eigen::Index n) {
    if (k < 1 || k > n - 1) {
        throw validation_error("k must lie in [1, n-1] = [1, " + std::to_string(n - 1) +
                               "], got " + std::to_string(k));
    }
}

void check_aligned(const FeatureMatrix& f, const FeatureMatrix& g) {
    if (f.rows() != g.rows()) {
        throw validation_error("sample count mismatch: " + std::to_string(f.rows()) + " vs " +
                               std::to_string(g.rows()));
    }
    if (f.sample_ids() != g.sample_ids()) {
        throw validation_error("sample ids differ between the two feature matrices");
    }
}

// Keys to sort candidates by: lower is closer. Inner product is negated so a
// single ascending comparator covers both similarities.
Matrix neighbor_keys(const FeatureMatrix& f, Similarity similarity) {
    const Matrix& x = f.data();
    Eigen::Index n = x.rows();
    Matrix keys(n, n);
    if (similarity == Similarity::inner_product) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                keys(i, j) = -x.row(i).dot(x.row(j));
            }
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                keys(i, j) = (x.row(i) - x.row(j)).squaredNorm();
            }
        }
    }
    return keys;
}

// k smallest keys for row i, self excluded, ties by ascending index,
// nearest first.
std::vector<int> select_row_knn(const Matrix& keys, Eigen::Index i, int k) {
    Eigen::Index n = keys.rows();
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) idx.push_back(static_cast<int>(j));
    }
    auto cmp = [&](int a, int b) {
        if (keys(i, a) != keys(i, b)) return keys(i, a) < keys(i, b);
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::vector<std::vector<int>> knn_lists_from_keys(const Matrix& keys, int k) {
    Eigen::Index n = keys.rows();
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        lists[static_cast<std::size_t>(i)] = select_row_knn(keys, i, k);
    }
    return lists;
}

}  // namespace

NeighborSets knn_sets(const FeatureMatrix& f, int k, Similarity similarity) {
    check_k(k, f.rows());
    auto lists = knn_lists_from_keys(neighbor_keys(f, similarity), k);
    for (auto& l : lists) std::sort(l.begin(), l.end());
    return NeighborSets{k, std::move(lists)};
}

NeighborRanking knn_ranking(const FeatureMatrix& f, int k, Similarity similarity) {
    check_k(k, f.rows());
    return NeighborRanking{k, knn_lists_from_keys(neighbor_keys(f, similarity), k)};
}

namespace {

int sorted_intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
    int count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++count;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return count;
}

}  // namespace

AlignmentScore mutual_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                          Similarity similarity) {
    check_aligned(f, g);
    auto sf = knn_sets(f, k, similarity);
    auto sg = knn_sets(g, k, similarity);
    Eigen::Index n = f.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += static_cast<double>(
            sorted_intersection_size(sf.sets[static_cast<std::size_t>(i)],
                                     sg.sets[static_cast<std::size_t>(i)]));
    }
    AlignmentScore out{"mutual_knn", total / (static_cast<double>(n) * k),
                       {{"k", static_cast<double>(k)}}};
    core::validate_score(out);
    return out;
}

double hsic_biased(const GramKernel& k, const GramKernel& l) {
    if (k.size() != l.size()) {
        throw validation_error("hsic_biased: kernel size mismatch " + std::to_string(k.size()) +
                               " vs " + std::to_string(l.size()));
    }
    Eigen::Index n = k.size();
    if (n < 2) throw validation_error("hsic_biased: need n >= 2");
    Matrix kc = core::double_center(k.data());
    Matrix lc = core::double_center(l.data());
    double tr = kc.cwiseProduct(lc).sum();
    double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return tr / denom;
}

double hsic_unbiased(const GramKernel& k, const GramKernel& l) {
    if (k.size() != l.size()) {
        throw validation_error("hsic_unbiased: kernel size mismatch");
    }
    Eigen::Index n = k.size();
    if (n < 4) {
        throw validation_error("hsic_unbiased: estimator requires n >= 4, got " +
                               std::to_string(n));
    }
    Matrix kt = k.data();
    Matrix lt = l.data();
    kt.diagonal().setZero();
    lt.diagonal().setZero();
    double nn = static_cast<double>(n);
    double trace_kl = kt.cwiseProduct(lt.transpose()).sum();
    double sum_k = kt.sum();
    double sum_l = lt.sum();
    double cross = (Vector::Ones(n).transpose() * kt * lt * Vector::Ones(n))(0);
    return (trace_kl + sum_k * sum_l / ((nn - 1.0) * (nn - 2.0)) - 2.0 * cross / (nn - 2.0)) /
           (nn * (nn - 3.0));
}

AlignmentScore cka(const GramKernel& k, const GramKernel& l, HsicEstimator estimator) {
    auto hsic = (estimator == HsicEstimator::biased) ? hsic_biased : hsic_unbiased;
    double kk = hsic(k, k);
    double ll = hsic(l, l);
    if (kk <= 0.0 || ll <= 0.0) {
        throw numeric_error("cka: zero self-HSIC (constant features leave nothing to align)");
    }
    double value = hsic(k, l) / std::sqrt(kk * ll);
    AlignmentScore out{estimator == HsicEstimator::biased ? "cka" : "unbiased_cka", value, {}};
    core::validate_score(out);
    return out;
}

namespace {

// Row-centered kernel entries, K̄_ij = K_ij - mean_l K_il, as in the masked
// alignment sum.
Matrix row_center(const Matrix& k) {
    Matrix out = k;
    out.colwise() -= k.rowwise().mean();
    return out;
}

struct MaskedAlignment {
    double value = 0.0;   // cross term
    double self_f = 0.0;  // masked K̄∘K̄ sum
    double self_g = 0.0;  // masked L̄∘L̄ sum
    long pair_count = 0;
};

// alpha(i,j) = 1 iff j is within the k nearest neighbors of i under both
// kernels (i != j). The same mask weights the cross and both self terms.
MaskedAlignment masked_alignment(const Matrix& kc, const Matrix& lc,
                                 const std::vector<std::vector<bool>>& mask) {
    MaskedAlignment out;
    Eigen::Index n = kc.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
            out.value += kc(i, j) * lc(i, j);
            out.self_f += kc(i, j) * kc(i, j);
            out.self_g += lc(i, j) * lc(i, j);
            ++out.pair_count;
        }
    }
    return out;
}

std::vector<std::vector<bool>> mutual_mask(const Matrix& keys_f, const Matrix& keys_g, int k) {
    Eigen::Index n = keys_f.rows();
    auto lf = knn_lists_from_keys(keys_f, k);
    auto lg = knn_lists_from_keys(keys_g, k);
    std::vector<std::vector<bool>> in_f(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), false));
    auto mask = in_f;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j : lf[static_cast<std::size_t>(i)]) {
            in_f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j : lg[static_cast<std::size_t>(i)]) {
            if (in_f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
                mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
            }
        }
    }
    return mask;
}

AlignmentScore cknna_impl(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                          const char* name) {
    check_aligned(f, g);
    check_k(k, f.rows());
    Matrix kmat = core::gram(f).data();
    Matrix lmat = core::gram(g).data();
    // Neighbor keys straight from the kernels: similarity is the kernel entry.
    Matrix keys_f = -kmat;
    Matrix keys_g = -lmat;
    auto mask = mutual_mask(keys_f, keys_g, k);
    auto acc = masked_alignment(row_center(kmat), row_center(lmat), mask);
    if (acc.pair_count == 0) {
        throw numeric_error(std::string(name) + ": no mutual neighbors anywhere, score undefined");
    }
    if (acc.self_f <= 0.0 || acc.self_g <= 0.0) {
        throw numeric_error(std::string(name) + ": degenerate masked self-alignment");
    }
    AlignmentScore out{"cknna", acc.value / std::sqrt(acc.self_f * acc.self_g),
                       {{"k", static_cast<double>(k)}}};
    core::validate_score(out);
    return out;
}

}  // namespace

AlignmentScore cknna(const FeatureMatrix& f, const FeatureMatrix& g, int k) {
    return cknna_impl(f, g, k, "cknna");
}

AlignmentScore cka_excluding_diagonal(const FeatureMatrix& f, const FeatureMatrix& g) {
    check_aligned(f, g);
    Eigen::Index n = f.rows();
    Matrix kc = row_center(core::gram(f).data());
    Matrix lc = row_center(core::gram(g).data());
    double value = 0.0, self_f = 0.0, self_g = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            value += kc(i, j) * lc(i, j);
            self_f += kc(i, j) * kc(i, j);
            self_g += lc(i, j) * lc(i, j);
        }
    }
    if (self_f <= 0.0 || self_g <= 0.0) {
        throw numeric_error("cka_excluding_diagonal: constant features");
    }
    AlignmentScore out{"cka_excluding_diagonal", value / std::sqrt(self_f * self_g), {}};
    return out;
}

long mutual_neighbor_pair_count(const FeatureMatrix& f, const FeatureMatrix& g, int k) {
    check_aligned(f, g);
    check_k(k, f.rows());
    Matrix keys_f = -core::gram(f).data();
    Matrix keys_g = -core::gram(g).data();
    auto mask = mutual_mask(keys_f, keys_g, k);
    long count = 0;
    for (const auto& row : mask) {
        for (bool b : row) count += b ? 1 : 0;
    }
    return count;
}

AlignmentScore svcca(const FeatureMatrix& f, const FeatureMatrix& g, double variance_kept) {
    check_aligned(f, g);
    if (!(variance_kept > 0.0) || variance_kept > 1.0) {
        throw validation_error("svcca: variance_kept must lie in (0,1], got " +
                               std::to_string(variance_kept));
    }
    auto top_directions = [&](const Matrix& x) {
        Matrix centered = x.rowwise() - x.colwise().mean();
        auto svd = core::thin_svd(centered);
        double total = svd.singular_values.squaredNorm();
        if (total <= 0.0) {
            throw numeric_error("svcca: constant features on one side (rank collapse)");
        }
        double running = 0.0;
        Eigen::Index keep = 0;
        for (Eigen::Index i = 0; i < svd.singular_values.size(); ++i) {
            ++keep;
            running += svd.singular_values(i) * svd.singular_values(i);
            if (running >= variance_kept * total) break;
        }
        // guard against retaining numerically-null directions
        while (keep > 1 && svd.singular_values(keep - 1) <= 1e-12 * svd.singular_values(0)) {
            --keep;
        }
        return Matrix(svd.u.leftCols(keep));
    };
    Matrix uf = top_directions(f.data());
    Matrix ug = top_directions(g.data());
    // With orthonormal bases on both sides, the canonical correlations of the
    // projections are the singular values of U_f^T U_g.
    auto svd = core::thin_svd(uf.transpose() * ug);
    double mean = svd.singular_values.mean();
    AlignmentScore out{"svcca", mean, {{"variance_kept", variance_kept}}};
    core::validate_score(out);
    return out;
}

AlignmentScore cycle_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                         Similarity similarity) {
    check_aligned(f, g);
    check_k(k, f.rows());
    Eigen::Index n = f.rows();
    Matrix keys_f = neighbor_keys(f, similarity);
    Matrix keys_g = neighbor_keys(g, similarity);
    auto lists_g = knn_lists_from_keys(keys_g, k);
    int hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int j = select_row_knn(keys_f, i, 1)[0];
        const auto& neigh = lists_g[static_cast<std::size_t>(i)];
        if (std::find(neigh.begin(), neigh.end(), j) != neigh.end()) ++hits;
    }
    AlignmentScore out{"cycle_knn", static_cast<double>(hits) / static_cast<double>(n),
                       {{"k", static_cast<double>(k)}}};
    core::validate_score(out);
    return out;
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t la = a.size(), lb = b.size();
    std::vector<int> prev(lb + 1), cur(lb + 1);
    for (std::size_t j = 0; j <= lb; ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= la; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= lb; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[lb];
}

int lcs_length(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t la = a.size(), lb = b.size();
    std::vector<int> prev(lb + 1, 0), cur(lb + 1, 0);
    for (std::size_t i = 1; i <= la; ++i) {
        for (std::size_t j = 1; j <= lb; ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
        std::fill(cur.begin(), cur.end(), 0);
    }
    return prev[lb];
}

AlignmentScore edit_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                        Similarity similarity) {
    check_aligned(f, g);
    auto rf = knn_ranking(f, k, similarity);
    auto rg = knn_ranking(g, k, similarity);
    Eigen::Index n = f.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += static_cast<double>(levenshtein(rf.lists[static_cast<std::size_t>(i)],
                                                 rg.lists[static_cast<std::size_t>(i)])) /
                 static_cast<double>(k);
    }
    AlignmentScore out{"edit_knn", 1.0 - total / static_cast<double>(n),
                       {{"k", static_cast<double>(k)}}};
    core::validate_score(out);
    return out;
}

AlignmentScore lcs_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                       Similarity similarity) {
    check_aligned(f, g);
    auto rf = knn_ranking(f, k, similarity);
    auto rg = knn_ranking(g, k, similarity);
    Eigen::Index n = f.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += static_cast<double>(lcs_length(rf.lists[static_cast<std::size_t>(i)],
                                                rg.lists[static_cast<std::size_t>(i)])) /
                 static_cast<double>(k);
    }
    AlignmentScore out{"lcs_knn", total / static_cast<double>(n), {{"k", static_cast<double>(k)}}};
    core::validate_score(out);
    return out;
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "mutual_knn") return MetricKind::mutual_knn;
    if (name == "cka") return MetricKind::cka;
    if (name == "unbiased_cka") return MetricKind::unbiased_cka;
    if (name == "cknna") return MetricKind::cknna;
    if (name == "svcca") return MetricKind::svcca;
    if (name == "cycle_knn") return MetricKind::cycle_knn;
    if (name == "edit_knn") return MetricKind::edit_knn;
    if (name == "lcs_knn") return MetricKind::lcs_knn;
    throw validation_error("unknown metric '" + name + "'");
}

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::mutual_knn: return "mutual_knn";
        case MetricKind::cka: return "cka";
        case MetricKind::unbiased_cka: return "unbiased_cka";
        case MetricKind::cknna: return "cknna";
        case MetricKind::svcca: return "svcca";
        case MetricKind::cycle_knn: return "cycle_knn";
        case MetricKind::edit_knn: return "edit_knn";
        case MetricKind::lcs_knn: return "lcs_knn";
    }
    throw validation_error("bad MetricKind");
}

AlignmentScore compute_metric(const FeatureMatrix& f, const FeatureMatrix& g,
                              const MetricSpec& spec) {
    switch (spec.kind) {
        case MetricKind::mutual_knn: return mutual_knn(f, g, spec.k, spec.similarity);
        case MetricKind::cka: return cka(core::gram(f), core::gram(g), HsicEstimator::biased);
        case MetricKind::unbiased_cka:
            return cka(core::gram(f), core::gram(g), HsicEstimator::unbiased);
        case MetricKind::cknna: return cknna(f, g, spec.k);
        case MetricKind::svcca: return svcca(f, g, spec.variance_kept);
        case MetricKind::cycle_knn: return cycle_knn(f, g, spec.k, spec.similarity);
        case MetricKind::edit_knn: return edit_knn(f, g, spec.k, spec.similarity);
        case MetricKind::lcs_knn: return lcs_knn(f, g, spec.k, spec.similarity);
    }
    throw validation_error("bad MetricKind");
}

LayerPairResult best_layer_alignment(const std::vector<FeatureMatrix>& layers_f,
                                     const std::vector<FeatureMatrix>& layers_g,
                                     const MetricSpec& spec) {
    if (layers_f.empty() || layers_g.empty()) {
        throw validation_error("best_layer_alignment: both layer lists must be non-empty");
    }
    LayerPairResult result;
    bool have = false;
    for (std::size_t i = 0; i < layers_f.size(); ++i) {
        for (std::size_t j = 0; j < layers_g.size(); ++j) {
            try {
                AlignmentScore s = compute_metric(layers_f[i], layers_g[j], spec);
                if (!have || s.value > result.score.value) {
                    have = true;
                    result.score = s;
                    result.pair = {static_cast<int>(i), static_cast<int>(j)};
                }
            } catch (const std::exception& e) {
                result.pair_errors.push_back(std::to_string(i) + "," + std::to_string(j) + ": " +
                                             e.what());
            }
        }
    }
    if (!have) {
        throw numeric_error("best_layer_alignment: every layer pair failed (" +
                            std::to_string(result.pair_errors.size()) + " errors)");
    }
    return result;
}

}  // namespace repalign::metrics
