#pragma once

// Contrastive learners over discrete worlds: binary NCE and InfoNCE with
// analytic gradients, in exact-expectation and sampled modes, plus the
// gradient-descent trainer and kernel-recovery diagnostics.

#include <utility>
#include <vector>

#include "repalign/matrix.hpp"
#include "repalign/world.hpp"

namespace repalign::learners {

using core::GramKernel;
using core::Matrix;
using core::Vector;
using world::CooccurrenceTable;
using world::PmiKernel;

// One row per symbol; the model scores a pair as
// g(a, b) = <vectors[a], vectors[b]> + bias.
struct EmbeddingTable {
    Matrix vectors;    // N x d
    double bias = 0.0;

    Matrix scores() const;  // g over all pairs
    GramKernel gram() const;
};

enum class Objective { binary_nce, infonce };
enum class SampleMode { expectation, sampled };

Objective objective_from_name(const std::string& name);
SampleMode mode_from_name(const std::string& name);

struct TrainConfig {
    Objective objective = Objective::binary_nce;
    double p_pos = 0.5;        // binary NCE positive-pair prior
    int num_negatives = 2;     // InfoNCE K
    double temperature = 1.0;  // InfoNCE tau
    double learning_rate = 1.0;
    int steps = 4000;
    std::uint64_t seed = 0;
    SampleMode mode = SampleMode::expectation;
    int batch_size = 1024;     // sampled mode only
    double grad_tolerance = 1e-7;

    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    Matrix grad_vectors;       // dL/dV
    double grad_bias = 0.0;
};

// Loss and gradient at the level of an arbitrary symmetric score matrix
// g(a, b). These carry the Bayes-optimum structure: the binary-NCE gradient
// vanishes identically at g = K_PMI + log(p_pos / (1 - p_pos)).
std::pair<double, Matrix> binary_nce_score_loss(const Matrix& scores, const CooccurrenceTable& c,
                                                double p_pos);
std::pair<double, Matrix> infonce_score_loss(const Matrix& scores, const CooccurrenceTable& c,
                                             int num_negatives, double temperature);

// Embedding-level losses. Expectation mode weights every pair exactly by the
// table; sampled mode draws a seeded minibatch, making the loss a
// deterministic function of (parameters, seed).
LossResult binary_nce_loss(const EmbeddingTable& e, const CooccurrenceTable& c, double p_pos,
                           SampleMode mode, std::uint64_t seed, int batch_size = 1024);
LossResult infonce_loss(const EmbeddingTable& e, const CooccurrenceTable& c, int num_negatives,
                        double temperature, SampleMode mode, std::uint64_t seed,
                        int batch_size = 1024);

struct TrainReport {
    double final_loss = 0.0;
    std::vector<std::pair<int, double>> loss_curve;
    double grad_check = 0.0;  // max relative error, analytic vs central differences at init
    Matrix learned_gram;
    std::string stop_reason;
    int steps_taken = 0;
};

// Plain gradient descent from a small seeded initialization with a halving
// line search; stops when the gradient max-abs falls below grad_tolerance or
// the step budget runs out.
std::pair<EmbeddingTable, TrainReport> train(const CooccurrenceTable& c, int dim,
                                             const TrainConfig& cfg);

struct RecoveryReport {
    double centered_max_abs = 0.0;  // max-abs of DC(gram) - DC(K_PMI)
    double offdiag_pearson = 0.0;
    bool pearson_defined = true;    // false when off-diagonal PMI is constant
    double fitted_scale = 0.0;      // least-squares slope of gram on PMI, off-diagonal
};

RecoveryReport kernel_recovery_error(const EmbeddingTable& e, const PmiKernel& k);

// Max relative error between the analytic gradient and central finite
// differences (h = 1e-5) over every coordinate, for the given objective/mode.
double gradient_check(const EmbeddingTable& e, const CooccurrenceTable& c, const TrainConfig& cfg,
                      std::uint64_t loss_seed);

}  // namespace repalign::learners
