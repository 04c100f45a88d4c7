#include "repalign/learners.hpp"

#include <algorithm>
#include <functional>
#include <cmath>

namespace repalign::learners {

using repalign::numeric_error;
using repalign::validation_error;

Matrix EmbeddingTable::scores() const {
    Matrix g = vectors * vectors.transpose();
    for (Eigen::Index i = 1; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            g(i, j) = g(j, i);
        }
    }
    return g.array() + bias;
}

GramKernel EmbeddingTable::gram() const {
    Matrix g = vectors * vectors.transpose();
    for (Eigen::Index i = 1; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            g(i, j) = g(j, i);
        }
    }
    return GramKernel(std::move(g));
}

Objective objective_from_name(const std::string& name) {
    if (name == "binary_nce") return Objective::binary_nce;
    if (name == "infonce") return Objective::infonce;
    throw validation_error("unknown objective '" + name + "' (binary_nce|infonce)");
}

SampleMode mode_from_name(const std::string& name) {
    if (name == "expectation") return SampleMode::expectation;
    if (name == "sampled") return SampleMode::sampled;
    throw validation_error("unknown mode '" + name + "' (expectation|sampled)");
}

void TrainConfig::validate() const {
    if (!(p_pos > 0.0) || !(p_pos < 1.0)) {
        throw validation_error("train: p_pos must lie in (0,1), got " + std::to_string(p_pos));
    }
    if (num_negatives < 1) throw validation_error("train: num_negatives must be >= 1");
    if (!(temperature > 0.0)) throw validation_error("train: temperature must be positive");
    if (!(learning_rate > 0.0)) throw validation_error("train: learning_rate must be positive");
    if (steps < 1) throw validation_error("train: steps must be >= 1");
    if (batch_size < 1) throw validation_error("train: batch_size must be >= 1");
}

namespace {

// log(1 + exp(x)) without overflow
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Enumerate all negative-sample multisets (compositions of K over N symbols)
// together with their multinomial log probabilities.
struct MultisetTable {
    std::vector<std::vector<int>> counts;
    std::vector<double> log_prob;
};

MultisetTable enumerate_multisets(int n, int k, const Vector& marginal) {
    MultisetTable table;
    std::vector<double> log_fact(static_cast<std::size_t>(k) + 1, 0.0);
    for (int i = 2; i <= k; ++i) {
        log_fact[static_cast<std::size_t>(i)] =
            log_fact[static_cast<std::size_t>(i - 1)] + std::log(static_cast<double>(i));
    }
    std::vector<double> log_m(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) log_m[static_cast<std::size_t>(i)] = std::log(marginal(i));
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == n - 1) {
            cur[static_cast<std::size_t>(pos)] = left;
            double lp = log_fact[static_cast<std::size_t>(k)];
            for (int s = 0; s < n; ++s) {
                int c = cur[static_cast<std::size_t>(s)];
                lp -= log_fact[static_cast<std::size_t>(c)];
                lp += c * log_m[static_cast<std::size_t>(s)];
            }
            table.counts.push_back(cur);
            table.log_prob.push_back(lp);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            rec(pos + 1, left - v);
        }
    };
    rec(0, k);
    return table;
}

int sample_categorical(const Vector& probs, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        acc += probs(i);
        if (u < acc) return i;
    }
    return n - 1;
}

std::pair<int, int> sample_joint_pair(const CooccurrenceTable& c, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    int n = c.size();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            acc += c.joint()(i, j);
            if (u < acc) return {i, j};
        }
    }
    return {n - 1, n - 1};
}

void check_table_for_scores(const Matrix& scores, const CooccurrenceTable& c, const char* what) {
    if (scores.rows() != c.size() || scores.cols() != c.size()) {
        throw validation_error(std::string(what) + ": score matrix is " +
                               std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
                               " but the table has " + std::to_string(c.size()) + " symbols");
    }
}

}  // namespace

std::pair<double, Matrix> binary_nce_score_loss(const Matrix& scores, const CooccurrenceTable& c,
                                                double p_pos) {
    if (!(p_pos > 0.0) || !(p_pos < 1.0)) {
        throw validation_error("binary_nce: p_pos must lie in (0,1), got " + std::to_string(p_pos));
    }
    check_table_for_scores(scores, c, "binary_nce");
    int n = c.size();
    double loss = 0.0;
    Matrix grad = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            double g = scores(a, b);
            double w_pos = p_pos * c.joint()(a, b);
            double w_neg = (1.0 - p_pos) * c.marginal()(a) * c.marginal()(b);
            loss += w_pos * softplus(-g) + w_neg * softplus(g);
            grad(a, b) = -w_pos * sigmoid(-g) + w_neg * sigmoid(g);
        }
    }
    return {loss, std::move(grad)};
}

std::pair<double, Matrix> infonce_score_loss(const Matrix& scores, const CooccurrenceTable& c,
                                             int num_negatives, double temperature) {
    if (num_negatives < 1) throw validation_error("infonce: num_negatives must be >= 1");
    if (!(temperature > 0.0)) throw validation_error("infonce: temperature must be positive");
    check_table_for_scores(scores, c, "infonce");
    int n = c.size();
    auto ms = enumerate_multisets(n, num_negatives, c.marginal());
    std::size_t m = ms.counts.size();
    double inv_tau = 1.0 / temperature;
    double loss = 0.0;
    Matrix grad = Matrix::Zero(n, n);
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<double> svals(m);
    std::vector<double> coef_nt(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        // stabilize exp(g/tau) by the row max
        double row_max = scores.row(x).maxCoeff();
        for (int s = 0; s < n; ++s) {
            w[static_cast<std::size_t>(s)] = std::exp((scores(x, s) - row_max) * inv_tau);
        }
        for (std::size_t u = 0; u < m; ++u) {
            double sum = 0.0;
            const auto& cnt = ms.counts[u];
            for (int s = 0; s < n; ++s) {
                sum += cnt[static_cast<std::size_t>(s)] * w[static_cast<std::size_t>(s)];
            }
            svals[u] = sum;
        }
        for (int xp = 0; xp < n; ++xp) {
            double weight = c.joint()(x, xp);
            if (weight <= 0.0) continue;
            double coef_total = 0.0;
            std::fill(coef_nt.begin(), coef_nt.end(), 0.0);
            double term = 0.0;
            for (std::size_t u = 0; u < m; ++u) {
                double prob = std::exp(ms.log_prob[u]);
                double denom = w[static_cast<std::size_t>(xp)] + svals[u];
                term += prob * (std::log(denom) + row_max * inv_tau -
                                scores(x, xp) * inv_tau);
                double cf = prob / denom;
                coef_total += cf;
                const auto& cnt = ms.counts[u];
                for (int s = 0; s < n; ++s) {
                    coef_nt[static_cast<std::size_t>(s)] += cf * cnt[static_cast<std::size_t>(s)];
                }
            }
            loss += weight * term;
            for (int s = 0; s < n; ++s) {
                grad(x, s) +=
                    weight * coef_nt[static_cast<std::size_t>(s)] * w[static_cast<std::size_t>(s)] * inv_tau;
            }
            grad(x, xp) += weight * (coef_total * w[static_cast<std::size_t>(xp)] * inv_tau - inv_tau);
        }
    }
    return {loss, std::move(grad)};
}

namespace {

// Sampled-mode variants: seeded minibatch, loss is the batch mean, gradient
// is the exact derivative of that mean.
std::pair<double, Matrix> binary_nce_sampled(const Matrix& scores, const CooccurrenceTable& c,
                                             double p_pos, std::uint64_t seed, int batch) {
    int n = c.size();
    Rng rng(seed);
    double loss = 0.0;
    Matrix grad = Matrix::Zero(n, n);
    double inv_b = 1.0 / static_cast<double>(batch);
    for (int s = 0; s < batch; ++s) {
        auto [a, b] = sample_joint_pair(c, rng);
        double g = scores(a, b);
        loss += p_pos * softplus(-g) * inv_b;
        grad(a, b) += -p_pos * sigmoid(-g) * inv_b;
        int na = sample_categorical(c.marginal(), rng);
        int nb = sample_categorical(c.marginal(), rng);
        double gn = scores(na, nb);
        loss += (1.0 - p_pos) * softplus(gn) * inv_b;
        grad(na, nb) += (1.0 - p_pos) * sigmoid(gn) * inv_b;
    }
    return {loss, std::move(grad)};
}

std::pair<double, Matrix> infonce_sampled(const Matrix& scores, const CooccurrenceTable& c,
                                          int num_negatives, double temperature,
                                          std::uint64_t seed, int batch) {
    int n = c.size();
    Rng rng(seed);
    double inv_tau = 1.0 / temperature;
    double loss = 0.0;
    Matrix grad = Matrix::Zero(n, n);
    double inv_b = 1.0 / static_cast<double>(batch);
    std::vector<int> negs(static_cast<std::size_t>(num_negatives));
    for (int s = 0; s < batch; ++s) {
        auto [x, xp] = sample_joint_pair(c, rng);
        for (int i = 0; i < num_negatives; ++i) {
            negs[static_cast<std::size_t>(i)] = sample_categorical(c.marginal(), rng);
        }
        double mx = scores(x, xp);
        for (int i = 0; i < num_negatives; ++i) {
            mx = std::max(mx, scores(x, negs[static_cast<std::size_t>(i)]));
        }
        double e_pos = std::exp((scores(x, xp) - mx) * inv_tau);
        double denom = e_pos;
        for (int i = 0; i < num_negatives; ++i) {
            denom += std::exp((scores(x, negs[static_cast<std::size_t>(i)]) - mx) * inv_tau);
        }
        loss += (std::log(denom) - (scores(x, xp) - mx) * inv_tau) * inv_b;
        grad(x, xp) += (e_pos / denom - 1.0) * inv_tau * inv_b;
        for (int i = 0; i < num_negatives; ++i) {
            int nb = negs[static_cast<std::size_t>(i)];
            grad(x, nb) +=
                std::exp((scores(x, nb) - mx) * inv_tau) / denom * inv_tau * inv_b;
        }
    }
    return {loss, std::move(grad)};
}

LossResult backprop_scores(const EmbeddingTable& e, std::pair<double, Matrix> score_loss) {
    LossResult out;
    out.loss = score_loss.first;
    const Matrix& dg = score_loss.second;
    out.grad_vectors = (dg + dg.transpose()) * e.vectors;
    out.grad_bias = dg.sum();
    return out;
}

}  // namespace

LossResult binary_nce_loss(const EmbeddingTable& e, const CooccurrenceTable& c, double p_pos,
                           SampleMode mode, std::uint64_t seed, int batch_size) {
    Matrix scores = e.scores();
    auto sl = (mode == SampleMode::expectation)
                  ? binary_nce_score_loss(scores, c, p_pos)
                  : binary_nce_sampled(scores, c, p_pos, seed, batch_size);
    return backprop_scores(e, std::move(sl));
}

LossResult infonce_loss(const EmbeddingTable& e, const CooccurrenceTable& c, int num_negatives,
                        double temperature, SampleMode mode, std::uint64_t seed, int batch_size) {
    Matrix scores = e.scores();
    auto sl = (mode == SampleMode::expectation)
                  ? infonce_score_loss(scores, c, num_negatives, temperature)
                  : infonce_sampled(scores, c, num_negatives, temperature, seed, batch_size);
    return backprop_scores(e, std::move(sl));
}

namespace {

LossResult eval_loss(const EmbeddingTable& e, const CooccurrenceTable& c, const TrainConfig& cfg,
                     std::uint64_t loss_seed) {
    if (cfg.objective == Objective::binary_nce) {
        return binary_nce_loss(e, c, cfg.p_pos, cfg.mode, loss_seed, cfg.batch_size);
    }
    return infonce_loss(e, c, cfg.num_negatives, cfg.temperature, cfg.mode, loss_seed,
                        cfg.batch_size);
}

}  // namespace

double gradient_check(const EmbeddingTable& e, const CooccurrenceTable& c, const TrainConfig& cfg,
                      std::uint64_t loss_seed) {
    LossResult base = eval_loss(e, c, cfg, loss_seed);
    const double h = 1e-5;
    double max_rel = 0.0;
    auto probe = [&](double analytic, double plus, double minus) {
        double fd = (plus - minus) / (2.0 * h);
        double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, rel);
    };
    EmbeddingTable work = e;
    for (Eigen::Index i = 0; i < e.vectors.rows(); ++i) {
        for (Eigen::Index j = 0; j < e.vectors.cols(); ++j) {
            work.vectors(i, j) = e.vectors(i, j) + h;
            double up = eval_loss(work, c, cfg, loss_seed).loss;
            work.vectors(i, j) = e.vectors(i, j) - h;
            double down = eval_loss(work, c, cfg, loss_seed).loss;
            work.vectors(i, j) = e.vectors(i, j);
            probe(base.grad_vectors(i, j), up, down);
        }
    }
    work.bias = e.bias + h;
    double up = eval_loss(work, c, cfg, loss_seed).loss;
    work.bias = e.bias - h;
    double down = eval_loss(work, c, cfg, loss_seed).loss;
    probe(base.grad_bias, up, down);
    return max_rel;
}

std::pair<EmbeddingTable, TrainReport> train(const CooccurrenceTable& c, int dim,
                                             const TrainConfig& cfg) {
    cfg.validate();
    if (dim < 1) throw validation_error("train: dim must be >= 1");
    int n = c.size();
    EmbeddingTable e;
    e.vectors = Matrix(n, dim);
    Rng rng(cfg.seed);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) {
            e.vectors(i, j) = rng.uniform(-0.01, 0.01);
        }
    }
    e.bias = 0.0;

    TrainReport report;
    report.grad_check = gradient_check(e, c, cfg, repalign::derive_seed(cfg.seed, 0));

    double prev_loss = std::numeric_limits<double>::infinity();
    int increases = 0;
    int step_index = 0;
    std::string reason = "step budget exhausted";
    for (; step_index < cfg.steps; ++step_index) {
        std::uint64_t loss_seed = repalign::derive_seed(cfg.seed, static_cast<std::uint64_t>(step_index));
        LossResult cur = eval_loss(e, c, cfg, loss_seed);
        if (!std::isfinite(cur.loss)) {
            throw numeric_error("train: loss became non-finite at step " +
                                std::to_string(step_index));
        }
        report.loss_curve.emplace_back(step_index, cur.loss);
        double grad_max = std::max(cur.grad_vectors.cwiseAbs().maxCoeff(), std::abs(cur.grad_bias));
        if (grad_max < cfg.grad_tolerance) {
            reason = "gradient below tolerance";
            report.final_loss = cur.loss;
            break;
        }
        if (cur.loss > prev_loss) {
            if (++increases >= 100) {
                throw numeric_error("train: loss increased for 100 consecutive steps; diverging "
                                    "(final loss " + std::to_string(cur.loss) + ")");
            }
        } else {
            increases = 0;
        }
        prev_loss = cur.loss;
        // halving line search on the same loss evaluation
        double step = cfg.learning_rate;
        EmbeddingTable candidate = e;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            candidate.vectors = e.vectors - step * cur.grad_vectors;
            candidate.bias = e.bias - step * cur.grad_bias;
            double cand_loss = eval_loss(candidate, c, cfg, loss_seed).loss;
            if (cand_loss <= cur.loss) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            reason = "line search stalled";
            report.final_loss = cur.loss;
            break;
        }
        e = candidate;
        report.final_loss = cur.loss;
    }
    report.steps_taken = step_index;
    report.stop_reason = reason;
    report.learned_gram = e.gram().data();
    return {std::move(e), std::move(report)};
}

RecoveryReport kernel_recovery_error(const EmbeddingTable& e, const PmiKernel& k) {
    if (!k.full_support()) {
        throw validation_error("kernel_recovery_error: PMI kernel has masked entries");
    }
    Matrix g = e.gram().data();
    if (g.rows() != k.data.rows()) {
        throw validation_error("kernel_recovery_error: embedding has " + std::to_string(g.rows()) +
                               " symbols, kernel has " + std::to_string(k.data.rows()));
    }
    RecoveryReport out;
    Matrix diff = core::double_center(g) - core::double_center(k.data);
    out.centered_max_abs = diff.cwiseAbs().maxCoeff();
    int n = static_cast<int>(g.rows());
    std::vector<double> gv, kv;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            gv.push_back(g(i, j));
            kv.push_back(k.data(i, j));
        }
    }
    bool defined = true;
    out.offdiag_pearson = core::pearson_corr(kv, gv, &defined);
    out.pearson_defined = defined;
    // least-squares slope of gram on PMI over off-diagonal entries
    double mk = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < kv.size(); ++i) {
        mk += kv[i];
        mg += gv[i];
    }
    mk /= static_cast<double>(kv.size());
    mg /= static_cast<double>(gv.size());
    double skk = 0.0, skg = 0.0;
    for (std::size_t i = 0; i < kv.size(); ++i) {
        skk += (kv[i] - mk) * (kv[i] - mk);
        skg += (kv[i] - mk) * (gv[i] - mg);
    }
    out.fitted_scale = skk > 0.0 ? skg / skk : 0.0;
    return out;
}

}  // namespace repalign::learners
