#include "repalign/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace repalign::core {

SymEig sym_eig(const Matrix& k) {
    if (k.rows() != k.cols()) {
        throw validation_error("sym_eig: matrix must be square");
    }
    double scale = std::max(k.cwiseAbs().maxCoeff(), 1e-300);
    double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale) {
        throw validation_error("sym_eig: input is not symmetric (max asymmetry " +
                               std::to_string(asym) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
    if (solver.info() != Eigen::Success) {
        throw numeric_error("sym_eig: eigensolver failed to converge on a " +
                            std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + " matrix");
    }
    // Eigen returns ascending order; flip to descending.
    Eigen::Index n = k.rows();
    SymEig out;
    out.eigenvalues = Vector(n);
    out.eigenvectors = Matrix(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);
        out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return out;
}

SymEig sym_eig(const GramKernel& k) { return sym_eig(k.data()); }

ThinSvd thin_svd(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ThinSvd out;
    out.u = svd.matrixU();
    out.singular_values = svd.singularValues();
    out.v = svd.matrixV();
    return out;
}

}  // namespace repalign::core
