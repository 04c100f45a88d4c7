#pragma once

// Dense-matrix foundation: feature matrices (rows = samples), Gram kernels,
// centering, preprocessing and rank statistics. Everything downstream (the
// alignment metrics, the discrete-world PMI machinery, the color pipeline)
// consumes these types.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "repalign/common.hpp"

namespace repalign::core {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// n x d matrix of sample representations plus opaque per-row identifiers.
// Rows are the feature vectors f(x_i). Immutable after construction.
class FeatureMatrix {
public:
    FeatureMatrix(Matrix data, std::vector<std::string> sample_ids);
    explicit FeatureMatrix(Matrix data);  // ids default to "0", "1", ...

    const Matrix& data() const { return data_; }
    const std::vector<std::string>& sample_ids() const { return ids_; }
    Eigen::Index rows() const { return data_.rows(); }
    Eigen::Index dim() const { return data_.cols(); }

    // Row subset in the given order (used for batching).
    FeatureMatrix select_rows(const std::vector<int>& indices) const;

private:
    Matrix data_;
    std::vector<std::string> ids_;
};

// n x n symmetric inner-product kernel K(x_i, x_j) = <f(x_i), f(x_j)>.
class GramKernel {
public:
    explicit GramKernel(Matrix data);

    const Matrix& data() const { return data_; }
    Eigen::Index size() const { return data_.rows(); }

private:
    Matrix data_;
};

// Result record for any alignment metric.
struct AlignmentScore {
    std::string metric_name;
    double value = 0.0;
    std::map<std::string, double> params;
};

// Metrics documented as normalized map into [0, 1].
bool is_normalized_metric(const std::string& metric_name);
void validate_score(const AlignmentScore& score);

// K[i][j] = dot(row i, row j); upper triangle computed, then mirrored so the
// result is bit-exactly symmetric.
GramKernel gram(const FeatureMatrix& f);

// Every row scaled to unit Euclidean norm; a zero row is an error naming the
// offending sample id.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& f);

// Entries strictly above the matrix-global percentile (linear interpolation
// between order statistics of the flattened matrix) are set to that value.
FeatureMatrix clamp_outliers(const FeatureMatrix& f, double percentile);

// Matrix-global percentile with linear interpolation, exposed for reuse.
double percentile_linear(std::vector<double> values, double percentile);

// K - row means - column means + grand mean (the biased HSIC centering HKH).
GramKernel double_center(const GramKernel& k);
Matrix double_center(const Matrix& k);

// Midrank ranks (ties get average rank), 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

// Pearson correlation of midrank vectors; errors when either input has zero
// rank variance.
double spearman_rank_corr(const std::vector<double>& a, const std::vector<double>& b);

// Plain Pearson correlation; returns false in `defined` when either side has
// zero variance.
double pearson_corr(const std::vector<double>& a, const std::vector<double>& b, bool* defined = nullptr);

void require_finite(const Matrix& m, const std::string& what);

}  // namespace repalign::core
