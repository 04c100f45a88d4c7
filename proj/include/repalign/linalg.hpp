#pragma once

// Shared linear-algebra contracts: symmetric eigendecomposition with
// descending eigenvalues and thin SVD. Backed by Eigen's solvers.

#include "repalign/matrix.hpp"

namespace repalign::core {

struct SymEig {
    Vector eigenvalues;   // sorted descending
    Matrix eigenvectors;  // columns, orthonormal, matching order
};

// Eigendecomposition of a symmetric matrix; the reconstruction V diag(L) V^T
// matches the input to 1e-8 relative in max norm.
SymEig sym_eig(const Matrix& k);
SymEig sym_eig(const GramKernel& k);

struct ThinSvd {
    Matrix u;
    Vector singular_values;  // descending
    Matrix v;
};

ThinSvd thin_svd(const Matrix& m);

}  // namespace repalign::core
