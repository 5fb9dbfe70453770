#include "mimo/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace mimo {

CplxMatrix matmul(const CplxMatrix& a, const CplxMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractError("matmul: inner dimensions differ (" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    }
    return a * b;
}

CplxMatrix conj_transpose(const CplxMatrix& a) { return a.adjoint(); }

CplxMatrix pseudo_inverse(const CplxMatrix& h) {
    if (h.rows() < h.cols()) {
        throw ContractError("pseudo_inverse: needs rows >= cols (tall or square input)");
    }
    const CplxMatrix gram = h.adjoint() * h;
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd diag = llt.matrixLLT().diagonal().real();
        const double largest = diag.maxCoeff();
        const double smallest = diag.minCoeff();
        if (smallest > 1e-12 * largest) {
            return llt.solve(CplxMatrix(h.adjoint()));
        }
    }
    // Degenerate Gram pivot: decide rank from the singular values.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double smin = s.size() > 0 ? s(s.size() - 1) : 0.0;
    if (smax <= 0.0 || smin <= 1e-12 * smax) {
        throw SingularityError("pseudo_inverse: rank-deficient matrix", smin);
    }
    return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

RealVector svd_values(const CplxMatrix& h) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h);
    return svd.singularValues();
}

std::pair<RealMatrix, RealVector> real_embed(const CplxMatrix& h, const CplxVector& y) {
    if (y.size() != h.rows()) {
        throw ContractError("real_embed: y length does not match H rows");
    }
    const Eigen::Index m = h.rows(), n = h.cols();
    RealMatrix he(2 * m, 2 * n);
    he.topLeftCorner(m, n) = h.real();
    he.topRightCorner(m, n) = -h.imag();
    he.bottomLeftCorner(m, n) = h.imag();
    he.bottomRightCorner(m, n) = h.real();
    RealVector ye(2 * m);
    ye.head(m) = y.real();
    ye.tail(m) = y.imag();
    return {std::move(he), std::move(ye)};
}

void check_finite(const CplxMatrix& m, const char* what) {
    if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

void check_finite(const CplxVector& v, const char* what) {
    if (!v.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

} // namespace mimo
