#pragma once

// The idealized discrete world: a finite event alphabet evolving as a Markov
// chain, windowed cooccurrence distributions (exact and Monte-Carlo),
// bijective observation maps, PMI kernels, and the PSD-after-shift check for
// smooth worlds.

#include <vector>

#include "repalign/matrix.hpp"

namespace repalign::world {

using core::Matrix;
using core::Vector;

// Time-homogeneous Markov chain over N events observed for `horizon` steps;
// cooccurrence pairs events at temporal distance <= `window`.
struct DiscreteWorld {
    int alphabet_size = 0;
    Matrix transition;  // N x N, row-stochastic
    Vector initial;     // length N, sums to 1
    int horizon = 0;    // T
    int window = 0;     // T_window < T

    void validate() const;

    static DiscreteWorld uniform(int alphabet_size, int horizon, int window);
    // Random row-stochastic transition and initial, entries bounded away from
    // zero so every pair keeps positive probability.
    static DiscreteWorld random(int alphabet_size, int horizon, int window, std::uint64_t seed);
};

// A bijective relabeling of the alphabet: permutation[event] = symbol.
struct ObservationMap {
    std::vector<int> permutation;

    void validate() const;
    ObservationMap inverse() const;
    static ObservationMap identity(int n);
    static ObservationMap random(int n, std::uint64_t seed);
};

// Symmetric joint distribution over observation pairs plus its marginal.
class CooccurrenceTable {
public:
    CooccurrenceTable(Matrix joint);

    const Matrix& joint() const { return joint_; }
    const Vector& marginal() const { return marginal_; }
    int size() const { return static_cast<int>(joint_.rows()); }

private:
    Matrix joint_;
    Vector marginal_;
};

// PMI values on the support of the joint; entries with zero joint mass are
// masked rather than set to -inf.
struct PmiKernel {
    Matrix data;                            // log joint - log marginal_i - log marginal_j
    std::vector<std::vector<bool>> support; // true where joint > 0

    bool full_support() const;
};

// Exact windowed cooccurrence by marginalizing the chain: sums
// diag(p_t) * P^delta over t and delta in [1, window], symmetrized over the
// (a,b)/(b,a) pairing and normalized to total mass 1. Pairs with t = t' are
// excluded unless include_same_time is set.
CooccurrenceTable exact_cooccurrence(const DiscreteWorld& w, bool include_same_time = false);

// Monte-Carlo counterpart: samples `num_sequences` sequences and counts
// within-window pairs. The pair budget is split into fixed chunks with
// derived seeds, so results do not depend on the worker count.
CooccurrenceTable empirical_cooccurrence(const DiscreteWorld& w, long num_sequences,
                                         std::uint64_t seed, bool include_same_time = false,
                                         int threads = 1);

// data[i][j] = log joint[i][j] - log marginal[i] - log marginal[j].
PmiKernel pmi_kernel(const CooccurrenceTable& c);

// Relabel the table through a bijection; PMI of the result equals the
// permuted PMI of the input bit-for-bit.
CooccurrenceTable apply_observation(const CooccurrenceTable& c, const ObservationMap& m);

// C = -min_i mean_j K_ij, the shift that makes a smooth-world PMI kernel PSD.
double psd_shift_constant(const PmiKernel& k);

struct PropositionReport {
    double rho_min = 0.0;         // exp(min off-diagonal PMI)
    double delta = 0.0;           // off-diagonal spread
    bool condition_holds = false; // diag_i >= N*delta + log(rho_min) for all i
    double shift = 0.0;           // C
    double min_eigenvalue = 0.0;  // of K + C*11^T
    bool psd = false;
};

// Evaluates the smoothness condition and verifies that K + C*11^T is PSD
// (eigenvalue tolerance -1e-8 scaled by the kernel's max-abs entry). Requires
// full support and non-positive off-diagonal entries.
PropositionReport check_proposition(const PmiKernel& k);

// Total-variation distance between two tables on the same alphabet.
double total_variation(const CooccurrenceTable& a, const CooccurrenceTable& b);

}  // namespace repalign::world
