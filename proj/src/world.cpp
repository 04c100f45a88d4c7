#include "repalign/world.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "repalign/linalg.hpp"

namespace repalign::world {

using repalign::numeric_error;
using repalign::validation_error;

void DiscreteWorld::validate() const {
    if (alphabet_size < 1) throw validation_error("world: alphabet_size must be positive");
    if (transition.rows() != alphabet_size || transition.cols() != alphabet_size) {
        throw validation_error("world: transition must be " + std::to_string(alphabet_size) + "x" +
                               std::to_string(alphabet_size));
    }
    if (initial.size() != alphabet_size) {
        throw validation_error("world: initial must have length " + std::to_string(alphabet_size));
    }
    for (int i = 0; i < alphabet_size; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < alphabet_size; ++j) {
            double p = transition(i, j);
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw validation_error("world: transition[" + std::to_string(i) + "][" +
                                       std::to_string(j) + "] is not a probability");
            }
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12) {
            throw validation_error("world: transition row " + std::to_string(i) + " sums to " +
                                   std::to_string(row_sum) + ", expected 1");
        }
    }
    double init_sum = 0.0;
    for (int i = 0; i < alphabet_size; ++i) {
        if (!(initial(i) >= 0.0)) {
            throw validation_error("world: initial[" + std::to_string(i) + "] is negative");
        }
        init_sum += initial(i);
    }
    if (std::abs(init_sum - 1.0) > 1e-12) {
        throw validation_error("world: initial distribution sums to " + std::to_string(init_sum));
    }
    if (horizon < 2) throw validation_error("world: horizon must be at least 2");
    if (window < 1 || window >= horizon) {
        throw validation_error("world: window must satisfy 1 <= window < horizon");
    }
}

DiscreteWorld DiscreteWorld::uniform(int alphabet_size, int horizon, int window) {
    DiscreteWorld w;
    w.alphabet_size = alphabet_size;
    w.transition = Matrix::Constant(alphabet_size, alphabet_size, 1.0 / alphabet_size);
    w.initial = Vector::Constant(alphabet_size, 1.0 / alphabet_size);
    w.horizon = horizon;
    w.window = window;
    w.validate();
    return w;
}

DiscreteWorld DiscreteWorld::random(int alphabet_size, int horizon, int window,
                                    std::uint64_t seed) {
    Rng rng(seed);
    DiscreteWorld w;
    w.alphabet_size = alphabet_size;
    w.transition = Matrix(alphabet_size, alphabet_size);
    w.initial = Vector(alphabet_size);
    for (int i = 0; i < alphabet_size; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < alphabet_size; ++j) {
            double v = 0.1 + rng.uniform();
            w.transition(i, j) = v;
            row_sum += v;
        }
        for (int j = 0; j < alphabet_size; ++j) w.transition(i, j) /= row_sum;
        // renormalize exactly so validation at 1e-12 always passes
        w.transition(i, alphabet_size - 1) +=
            1.0 - w.transition.row(i).sum();
        w.initial(i) = 0.1 + rng.uniform();
    }
    w.initial /= w.initial.sum();
    w.initial(alphabet_size - 1) += 1.0 - w.initial.sum();
    w.horizon = horizon;
    w.window = window;
    w.validate();
    return w;
}

void ObservationMap::validate() const {
    int n = static_cast<int>(permutation.size());
    if (n == 0) throw validation_error("observation map: empty permutation");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int v : permutation) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) {
            throw validation_error("observation map: not a bijection on [0," + std::to_string(n) +
                                   ")");
        }
        seen[static_cast<std::size_t>(v)] = true;
    }
}

ObservationMap ObservationMap::inverse() const {
    validate();
    ObservationMap inv;
    inv.permutation.resize(permutation.size());
    for (std::size_t i = 0; i < permutation.size(); ++i) {
        inv.permutation[static_cast<std::size_t>(permutation[i])] = static_cast<int>(i);
    }
    return inv;
}

ObservationMap ObservationMap::identity(int n) {
    ObservationMap m;
    m.permutation.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) m.permutation[static_cast<std::size_t>(i)] = i;
    return m;
}

ObservationMap ObservationMap::random(int n, std::uint64_t seed) {
    ObservationMap m = identity(n);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        std::size_t j = rng.index(static_cast<std::size_t>(i) + 1);
        std::swap(m.permutation[static_cast<std::size_t>(i)], m.permutation[j]);
    }
    return m;
}

CooccurrenceTable::CooccurrenceTable(Matrix joint) : joint_(std::move(joint)) {
    if (joint_.rows() != joint_.cols() || joint_.rows() < 1) {
        throw validation_error("cooccurrence table: joint must be square and non-empty");
    }
    core::require_finite(joint_, "cooccurrence joint");
    double total = 0.0;
    for (Eigen::Index i = 0; i < joint_.rows(); ++i) {
        for (Eigen::Index j = 0; j < joint_.cols(); ++j) {
            if (joint_(i, j) < 0.0) {
                throw validation_error("cooccurrence table: negative mass at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            }
            total += joint_(i, j);
        }
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw validation_error("cooccurrence table: total mass " + std::to_string(total) +
                               " differs from 1 beyond 1e-10");
    }
    double asym = (joint_ - joint_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        throw validation_error("cooccurrence table: asymmetry " + std::to_string(asym));
    }
    marginal_ = joint_.rowwise().sum();
}

bool PmiKernel::full_support() const {
    for (const auto& row : support) {
        for (bool b : row) {
            if (!b) return false;
        }
    }
    return true;
}

CooccurrenceTable exact_cooccurrence(const DiscreteWorld& w, bool include_same_time) {
    w.validate();
    int n = w.alphabet_size;
    // time-t marginals
    std::vector<Vector> p(static_cast<std::size_t>(w.horizon));
    p[0] = w.initial;
    for (int t = 1; t < w.horizon; ++t) {
        p[static_cast<std::size_t>(t)] = w.transition.transpose() * p[static_cast<std::size_t>(t - 1)];
    }
    Matrix ordered = Matrix::Zero(n, n);  // sum over t < t' of P(X_t = a, X_t' = b)
    Matrix power = Matrix::Identity(n, n);
    for (int delta = 1; delta <= w.window; ++delta) {
        power = power * w.transition;  // P^delta
        for (int t = 0; t + delta < w.horizon; ++t) {
            ordered += p[static_cast<std::size_t>(t)].asDiagonal() * power;
        }
    }
    Matrix joint = ordered + ordered.transpose();
    if (include_same_time) {
        for (int t = 0; t < w.horizon; ++t) {
            joint += Matrix(p[static_cast<std::size_t>(t)].asDiagonal());
        }
    }
    joint /= joint.sum();
    // exact symmetry by construction of M + M^T can still drift a bit; mirror
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            joint(i, j) = joint(j, i);
        }
    }
    return CooccurrenceTable(std::move(joint));
}

namespace {

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

Matrix count_chunk(const DiscreteWorld& w, long sequences, std::uint64_t seed,
                   bool include_same_time) {
    int n = w.alphabet_size;
    Matrix counts = Matrix::Zero(n, n);
    Rng rng(seed);
    std::vector<int> z(static_cast<std::size_t>(w.horizon));
    for (long s = 0; s < sequences; ++s) {
        z[0] = sample_categorical(w.initial, rng);
        for (int t = 1; t < w.horizon; ++t) {
            z[static_cast<std::size_t>(t)] =
                sample_categorical(w.transition.row(z[static_cast<std::size_t>(t - 1)]), rng);
        }
        for (int t = 0; t < w.horizon; ++t) {
            if (include_same_time) {
                counts(z[static_cast<std::size_t>(t)], z[static_cast<std::size_t>(t)]) += 0.5;
            }
            for (int d = 1; d <= w.window && t + d < w.horizon; ++d) {
                counts(z[static_cast<std::size_t>(t)], z[static_cast<std::size_t>(t + d)]) += 1.0;
            }
        }
    }
    return counts;
}

}  // namespace

CooccurrenceTable empirical_cooccurrence(const DiscreteWorld& w, long num_sequences,
                                         std::uint64_t seed, bool include_same_time,
                                         int threads) {
    w.validate();
    if (num_sequences < 1) {
        throw validation_error("empirical_cooccurrence: num_sequences must be >= 1");
    }
    if (threads < 1) threads = 1;
    // fixed chunking, independent of the worker count
    const long chunk_size = 4096;
    long num_chunks = (num_sequences + chunk_size - 1) / chunk_size;
    std::vector<Matrix> partial(static_cast<std::size_t>(num_chunks));
    auto run_chunk = [&](long c) {
        long lo = c * chunk_size;
        long hi = std::min(num_sequences, lo + chunk_size);
        partial[static_cast<std::size_t>(c)] = count_chunk(
            w, hi - lo, repalign::derive_seed(seed, static_cast<std::uint64_t>(c)), include_same_time);
    };
    if (threads == 1 || num_chunks == 1) {
        for (long c = 0; c < num_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        std::atomic<long> next{0};
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (long c = next.fetch_add(1); c < num_chunks; c = next.fetch_add(1)) {
                    run_chunk(c);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    int n = w.alphabet_size;
    Matrix counts = Matrix::Zero(n, n);
    for (long c = 0; c < num_chunks; ++c) counts += partial[static_cast<std::size_t>(c)];
    Matrix joint = counts + counts.transpose();
    double total = joint.sum();
    if (total <= 0.0) throw numeric_error("empirical_cooccurrence: no pairs observed");
    joint /= total;
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            joint(i, j) = joint(j, i);
        }
    }
    return CooccurrenceTable(std::move(joint));
}

PmiKernel pmi_kernel(const CooccurrenceTable& c) {
    int n = c.size();
    for (int i = 0; i < n; ++i) {
        if (c.marginal()(i) <= 0.0) {
            throw validation_error("pmi_kernel: symbol " + std::to_string(i) +
                                   " has zero marginal probability (unreachable)");
        }
    }
    PmiKernel k;
    k.data = Matrix::Zero(n, n);
    k.support.assign(static_cast<std::size_t>(n),
                     std::vector<bool>(static_cast<std::size_t>(n), false));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double joint = c.joint()(i, j);
            if (joint > 0.0) {
                k.support[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
                k.data(i, j) =
                    std::log(joint) - std::log(c.marginal()(i)) - std::log(c.marginal()(j));
            }
        }
    }
    return k;
}

CooccurrenceTable apply_observation(const CooccurrenceTable& c, const ObservationMap& m) {
    m.validate();
    int n = c.size();
    if (static_cast<int>(m.permutation.size()) != n) {
        throw validation_error("apply_observation: map size " +
                               std::to_string(m.permutation.size()) + " != table size " +
                               std::to_string(n));
    }
    Matrix joint(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            joint(m.permutation[static_cast<std::size_t>(i)],
                  m.permutation[static_cast<std::size_t>(j)]) = c.joint()(i, j);
        }
    }
    return CooccurrenceTable(std::move(joint));
}

double psd_shift_constant(const PmiKernel& k) {
    if (!k.full_support()) {
        throw validation_error("psd_shift_constant: kernel has masked entries (zero joint mass)");
    }
    double min_row_mean = k.data.rowwise().mean().minCoeff();
    return -min_row_mean;
}

PropositionReport check_proposition(const PmiKernel& k) {
    if (!k.full_support()) {
        throw validation_error("check_proposition: requires full support");
    }
    int n = static_cast<int>(k.data.rows());
    if (n < 2) throw validation_error("check_proposition: need at least 2 symbols");
    double off_min = std::numeric_limits<double>::infinity();
    double off_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = k.data(i, j);
            if (v > 0.0) {
                throw validation_error(
                    "check_proposition: off-diagonal PMI " + std::to_string(v) + " at (" +
                    std::to_string(i) + "," + std::to_string(j) +
                    ") is positive; the proposition assumes off-diagonals in (-inf, 0]");
            }
            off_min = std::min(off_min, v);
            off_max = std::max(off_max, v);
        }
    }
    PropositionReport report;
    report.rho_min = std::exp(off_min);
    report.delta = off_max - off_min;
    report.condition_holds = true;
    double bound = n * report.delta + off_min;  // N*delta + log(rho_min)
    for (int i = 0; i < n; ++i) {
        if (k.data(i, i) < bound) {
            report.condition_holds = false;
            break;
        }
    }
    report.shift = psd_shift_constant(k);
    Matrix shifted = k.data.array() + report.shift;
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            shifted(i, j) = shifted(j, i);
        }
    }
    auto eig = core::sym_eig(shifted);
    report.min_eigenvalue = eig.eigenvalues(eig.eigenvalues.size() - 1);
    double scale = k.data.cwiseAbs().maxCoeff();
    report.psd = report.min_eigenvalue >= -1e-8 * scale;
    if (report.condition_holds && !report.psd) {
        throw numeric_error("check_proposition: smoothness condition holds but K + C*11^T is not "
                            "PSD (min eigenvalue " + std::to_string(report.min_eigenvalue) + ")");
    }
    return report;
}

double total_variation(const CooccurrenceTable& a, const CooccurrenceTable& b) {
    if (a.size() != b.size()) {
        throw validation_error("total_variation: table sizes differ");
    }
    return 0.5 * (a.joint() - b.joint()).cwiseAbs().sum();
}

}  // namespace repalign::world
