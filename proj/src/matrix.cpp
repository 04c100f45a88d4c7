#include "repalign/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace repalign::core {

void require_finite(const Matrix& m, const std::string& what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!std::isfinite(m(i, j))) {
                throw validation_error(what + ": non-finite entry at row " + std::to_string(i) +
                                       ", col " + std::to_string(j));
            }
        }
    }
}

namespace {

std::vector<std::string> default_ids(Eigen::Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return ids;
}

}  // namespace

FeatureMatrix::FeatureMatrix(Matrix data, std::vector<std::string> sample_ids)
    : data_(std::move(data)), ids_(std::move(sample_ids)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
        throw validation_error("FeatureMatrix: need at least 1 row and 1 column, got " +
                               std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()));
    }
    if (ids_.empty()) ids_ = default_ids(data_.rows());
    if (static_cast<Eigen::Index>(ids_.size()) != data_.rows()) {
        throw validation_error("FeatureMatrix: " + std::to_string(ids_.size()) +
                               " sample ids for " + std::to_string(data_.rows()) + " rows");
    }
    std::set<std::string> seen;
    for (const auto& id : ids_) {
        if (!seen.insert(id).second) {
            throw validation_error("FeatureMatrix: duplicate sample id '" + id + "'");
        }
    }
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
        for (Eigen::Index j = 0; j < data_.cols(); ++j) {
            if (!std::isfinite(data_(i, j))) {
                throw validation_error("FeatureMatrix: non-finite entry in row '" + ids_[static_cast<std::size_t>(i)] + "'");
            }
        }
    }
}

FeatureMatrix::FeatureMatrix(Matrix data) : FeatureMatrix(std::move(data), {}) {}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<int>& indices) const {
    Matrix out(static_cast<Eigen::Index>(indices.size()), data_.cols());
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        int i = indices[r];
        if (i < 0 || i >= data_.rows()) {
            throw validation_error("select_rows: index " + std::to_string(i) + " out of range");
        }
        out.row(static_cast<Eigen::Index>(r)) = data_.row(i);
        ids.push_back(ids_[static_cast<std::size_t>(i)]);
    }
    return FeatureMatrix(std::move(out), std::move(ids));
}

GramKernel::GramKernel(Matrix data) : data_(std::move(data)) {
    if (data_.rows() != data_.cols()) {
        throw validation_error("GramKernel: matrix must be square, got " +
                               std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()));
    }
    require_finite(data_, "GramKernel");
    double scale = std::max(data_.cwiseAbs().maxCoeff(), 1e-300);
    double asym = (data_ - data_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw numeric_error("GramKernel: asymmetry " + std::to_string(asym) +
                            " exceeds 1e-10 relative tolerance");
    }
}

bool is_normalized_metric(const std::string& metric_name) {
    return metric_name == "mutual_knn" || metric_name == "cka" || metric_name == "cknna" ||
           metric_name == "cycle_knn" || metric_name == "edit_knn" || metric_name == "lcs_knn";
}

void validate_score(const AlignmentScore& score) {
    if (!std::isfinite(score.value)) {
        throw numeric_error("AlignmentScore(" + score.metric_name + "): non-finite value");
    }
    if (is_normalized_metric(score.metric_name)) {
        if (score.value < -1e-9 || score.value > 1.0 + 1e-9) {
            throw numeric_error("AlignmentScore(" + score.metric_name + "): value " +
                                std::to_string(score.value) + " outside [0,1]");
        }
    }
}

GramKernel gram(const FeatureMatrix& f) {
    const Matrix& x = f.data();
    Eigen::Index n = x.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            k(i, j) = x.row(i).dot(x.row(j));
        }
    }
    for (Eigen::Index i = 1; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = k(j, i);
        }
    }
    return GramKernel(std::move(k));
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& f) {
    Matrix out = f.data();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double norm = out.row(i).norm();
        if (norm == 0.0) {
            throw validation_error("l2_normalize_rows: zero row for sample '" +
                                   f.sample_ids()[static_cast<std::size_t>(i)] + "'");
        }
        out.row(i) /= norm;
    }
    return FeatureMatrix(std::move(out), f.sample_ids());
}

double percentile_linear(std::vector<double> values, double percentile) {
    if (percentile <= 0.0 || percentile >= 100.0) {
        if (percentile != 100.0) {
            throw validation_error("percentile must lie in (0,100], got " + std::to_string(percentile));
        }
    }
    if (values.empty()) throw validation_error("percentile of empty set");
    std::sort(values.begin(), values.end());
    double h = percentile / 100.0 * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

FeatureMatrix clamp_outliers(const FeatureMatrix& f, double percentile) {
    if (!(percentile > 0.0) || percentile > 100.0) {
        throw validation_error("clamp_outliers: percentile must lie in (0,100], got " +
                               std::to_string(percentile));
    }
    const Matrix& x = f.data();
    std::vector<double> flat(x.data(), x.data() + x.size());
    double cut = percentile_linear(std::move(flat), percentile);
    Matrix out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            if (out(i, j) > cut) out(i, j) = cut;
        }
    }
    return FeatureMatrix(std::move(out), f.sample_ids());
}

Matrix double_center(const Matrix& k) {
    Eigen::Index n = k.rows();
    Vector row_mean = k.rowwise().mean();
    Vector col_mean = k.colwise().mean();
    double grand = k.mean();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = k(i, j) - row_mean(i) - col_mean(j) + grand;
        }
    }
    return out;
}

GramKernel double_center(const GramKernel& k) {
    Matrix out = double_center(k.data());
    // mirror to keep the result bit-exactly symmetric
    for (Eigen::Index i = 1; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            out(i, j) = out(j, i);
        }
    }
    return GramKernel(std::move(out));
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b, bool* defined) {
    if (a.size() != b.size() || a.size() < 2) {
        throw validation_error("pearson_corr: need two equal-length vectors of size >= 2");
    }
    double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        if (defined) {
            *defined = false;
            return 0.0;
        }
        throw numeric_error("pearson_corr: zero variance input");
    }
    if (defined) *defined = true;
    return sab / std::sqrt(saa * sbb);
}

double spearman_rank_corr(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw validation_error("spearman_rank_corr: need two equal-length vectors of size >= 2");
    }
    auto ra = average_ranks(a);
    auto rb = average_ranks(b);
    bool defined = true;
    double r = pearson_corr(ra, rb, &defined);
    if (!defined) {
        throw numeric_error("spearman_rank_corr: constant input vector (zero rank variance)");
    }
    return r;
}

}  // namespace repalign::core
