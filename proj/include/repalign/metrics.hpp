#pragma once

// Kernel-alignment metrics: mutual k-NN, HSIC (biased and unbiased), CKA,
// CKNNA, SVCCA, cycle/edit/LCS k-NN, and the layer-pairwise maximum.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "repalign/matrix.hpp"

namespace repalign::metrics {

using core::AlignmentScore;
using core::FeatureMatrix;
using core::GramKernel;
using core::Matrix;

enum class Similarity { inner_product, euclidean };

Similarity similarity_from_name(const std::string& name);
std::string to_string(Similarity s);

// The k nearest neighbors of each sample, self excluded, ties broken by
// ascending index. `sets` holds each neighborhood sorted by index (for set
// intersection); use knn_ranking when order matters.
struct NeighborSets {
    int k = 0;
    std::vector<std::vector<int>> sets;
};

// Same neighborhoods, nearest first.
struct NeighborRanking {
    int k = 0;
    std::vector<std::vector<int>> lists;
};

NeighborSets knn_sets(const FeatureMatrix& f, int k, Similarity similarity);
NeighborRanking knn_ranking(const FeatureMatrix& f, int k, Similarity similarity);

// m_NN: mean over samples of |S(phi_i) ∩ S(psi_i)| / k.
AlignmentScore mutual_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                          Similarity similarity = Similarity::inner_product);

// tr(K̄ L̄) / (n-1)^2 with the HKH centering.
double hsic_biased(const GramKernel& k, const GramKernel& l);

// The unbiased estimator of Song et al. (kernel diagonals zeroed); needs n >= 4.
double hsic_unbiased(const GramKernel& k, const GramKernel& l);

enum class HsicEstimator { biased, unbiased };

AlignmentScore cka(const GramKernel& k, const GramKernel& l,
                   HsicEstimator estimator = HsicEstimator::biased);

// CKNNA: CKA restricted to mutually nearest-neighbor pairs. Kernel entries are
// centered per row (K̄_ij = K_ij - mean_l K_il); the self-normalization terms
// use the same mutual mask so the self-score is 1 by construction. At k = n-1
// the value coincides with cka_excluding_diagonal.
AlignmentScore cknna(const FeatureMatrix& f, const FeatureMatrix& g, int k);

// CKA with the i = j terms removed from every sum, same row centering as
// cknna; this is the k -> n limit of cknna.
AlignmentScore cka_excluding_diagonal(const FeatureMatrix& f, const FeatureMatrix& g);

// Total number of mutually-neighboring (i, j) pairs, i.e. the number of ones
// in the cknna mask. Equals n * k * mutual_knn when similarity is the inner
// product.
long mutual_neighbor_pair_count(const FeatureMatrix& f, const FeatureMatrix& g, int k);

// SVCCA: project each side onto the top singular directions keeping
// `variance_kept` of the squared singular mass (columns are mean-centered
// first), then report the mean canonical correlation between the projections.
AlignmentScore svcca(const FeatureMatrix& f, const FeatureMatrix& g, double variance_kept = 0.99);

// Fraction of samples whose single nearest neighbor under F is still one of
// the k nearest neighbors under G. Not symmetric in (F, G).
AlignmentScore cycle_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                         Similarity similarity = Similarity::inner_product);

// 1 - mean(levenshtein(ranking_F[i], ranking_G[i]) / k).
AlignmentScore edit_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                        Similarity similarity = Similarity::inner_product);

// mean(lcs(ranking_F[i], ranking_G[i]) / k).
AlignmentScore lcs_knn(const FeatureMatrix& f, const FeatureMatrix& g, int k,
                       Similarity similarity = Similarity::inner_product);

int levenshtein(const std::vector<int>& a, const std::vector<int>& b);
int lcs_length(const std::vector<int>& a, const std::vector<int>& b);

enum class MetricKind {
    mutual_knn,
    cka,
    unbiased_cka,
    cknna,
    svcca,
    cycle_knn,
    edit_knn,
    lcs_knn,
};

MetricKind metric_from_name(const std::string& name);
std::string to_string(MetricKind kind);

struct MetricSpec {
    MetricKind kind = MetricKind::mutual_knn;
    int k = 10;
    Similarity similarity = Similarity::inner_product;
    double variance_kept = 0.99;
};

AlignmentScore compute_metric(const FeatureMatrix& f, const FeatureMatrix& g,
                              const MetricSpec& spec);

struct LayerPairResult {
    AlignmentScore score;
    std::pair<int, int> pair;                 // (index into layersF, index into layersG)
    std::vector<std::string> pair_errors;     // per-pair failure messages, "i,j: what"
};

// Maximum metric value over the cross product of layer pairs; ties resolved
// toward the lexicographically smallest pair. Errors on individual pairs are
// recorded; only an all-pair failure raises.
LayerPairResult best_layer_alignment(const std::vector<FeatureMatrix>& layers_f,
                                     const std::vector<FeatureMatrix>& layers_g,
                                     const MetricSpec& spec);

}  // namespace repalign::metrics
