#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mimo/errors.hpp"
#include "mimo/rng.hpp"

namespace mimo {

using CplxScalar = std::complex<double>;

/// Complex matrix, row-major storage. Eigen provides the arithmetic and
/// decompositions behind the operations below.
using CplxMatrix =
    Eigen::Matrix<CplxScalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CplxVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// a * b with an explicit dimension check (ContractError instead of an
/// Eigen assert).
CplxMatrix matmul(const CplxMatrix& a, const CplxMatrix& b);

/// Conjugate transpose.
CplxMatrix conj_transpose(const CplxMatrix& a);

/// Moore-Penrose pseudo-inverse (H^H H)^{-1} H^H for full-column-rank H.
/// Fast path: Cholesky of the Gram matrix. When the smallest pivot drops
/// below 1e-12 x largest, falls back to an SVD-based inverse; a genuinely
/// rank-deficient matrix raises SingularityError with the offending pivot.
CplxMatrix pseudo_inverse(const CplxMatrix& h);

/// Singular values, descending. Zero matrix yields all zeros.
RealVector svd_values(const CplxMatrix& h);

/// Real embedding of a complex system:
///   [[Re H, -Im H], [Im H, Re H]] and [Re y; Im y].
/// Least-squares solutions of the embedded system coincide with the
/// complex ones.
std::pair<RealMatrix, RealVector> real_embed(const CplxMatrix& h, const CplxVector& y);

/// Throws NumericalError if any entry is NaN/Inf.
void check_finite(const CplxMatrix& m, const char* what);
void check_finite(const CplxVector& v, const char* what);

} // namespace mimo
