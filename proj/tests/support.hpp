#pragma once

// Helpers shared by the test suites: seeded fixtures and small independent
// constructions. Oracles that double-check specific operations live next to
// the tests that use them, not here, so they stay independent of the library
// code paths they verify.

#include <Eigen/Dense>
#include <vector>

#include "repalign/matrix.hpp"

namespace testsupport {

inline repalign::core::Matrix random_matrix(int n, int d, std::uint64_t seed) {
    repalign::Rng rng(seed);
    repalign::core::Matrix m(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            m(i, j) = rng.normal();
        }
    }
    return m;
}

inline repalign::core::FeatureMatrix random_features(int n, int d, std::uint64_t seed) {
    return repalign::core::FeatureMatrix(random_matrix(n, d, seed));
}

inline repalign::core::Matrix random_orthogonal(int d, std::uint64_t seed) {
    Eigen::HouseholderQR<repalign::core::Matrix> qr(random_matrix(d, d, seed));
    repalign::core::Matrix q = qr.householderQ();
    return q;
}

// Two feature matrices sharing planted structure plus independent noise;
// noise = 0 gives identical matrices.
inline std::pair<repalign::core::FeatureMatrix, repalign::core::FeatureMatrix> planted_pair(
    int n, int d, double noise, std::uint64_t seed) {
    auto base = random_matrix(n, d, seed);
    auto a = base + noise * random_matrix(n, d, seed + 1000);
    auto b = base + noise * random_matrix(n, d, seed + 2000);
    return {repalign::core::FeatureMatrix(a), repalign::core::FeatureMatrix(b)};
}

}  // namespace testsupport
