#pragma once

// Dense complex eigen-decomposition (LAPACK zgeev, balanced) and the matrix
// exponential used by the linear propagator.

#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <lapacke.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "pfeq/types.hpp"

namespace pfeq::linalg {

struct EigenDecomposition {
    CVector values;
    CMatrix vectors;  // right eigenvectors as columns (empty if not requested)
};

inline EigenDecomposition eig(const CMatrix& X, bool with_vectors) {
    if (X.rows() != X.cols()) throw Error(ErrorKind::DimensionMismatch, "eigenvalues of a non-square matrix");
    const auto n = static_cast<lapack_int>(X.rows());
    EigenDecomposition out;
    out.values.resize(n);
    if (n == 0) return out;
    CMatrix work = X;  // column-major, overwritten
    CMatrix vr = with_vectors ? CMatrix(n, n) : CMatrix(1, 1);
    lapack_complex_double dummy{};
    const lapack_int info = LAPACKE_zgeev(
        LAPACK_COL_MAJOR, 'N', with_vectors ? 'V' : 'N', n, reinterpret_cast<lapack_complex_double*>(work.data()), n,
        reinterpret_cast<lapack_complex_double*>(out.values.data()), &dummy, 1,
        reinterpret_cast<lapack_complex_double*>(vr.data()), with_vectors ? n : 1);
    if (info != 0) throw Error(ErrorKind::DimensionMismatch, "zgeev failed with info " + std::to_string(info));
    if (with_vectors) out.vectors = std::move(vr);
    return out;
}

inline CVector eigenvalues(const CMatrix& X) { return eig(X, false).values; }

/// Largest singular value (spectral norm).
inline double spectral_norm(const CMatrix& X) {
    if (X.size() == 0) return 0.0;
    return Eigen::JacobiSVD<CMatrix>(X).singularValues()[0];
}

/// exp(dt X). Uses the eigendecomposition when cond(V) stays below
/// `max_condition`, otherwise Pade scaling-and-squaring.
inline CMatrix expm(const CMatrix& X, double dt, double max_condition = 1e8) {
    const auto n = X.rows();
    if (n == 0) return CMatrix(0, 0);
    const EigenDecomposition ed = eig(X, true);
    const Eigen::PartialPivLU<CMatrix> lu(ed.vectors);
    const double cond = lu.rcond() > 0.0 ? 1.0 / lu.rcond() : std::numeric_limits<double>::infinity();
    if (cond <= max_condition) {
        CMatrix scaled = ed.vectors;
        for (Eigen::Index j = 0; j < n; ++j) scaled.col(j) *= std::exp(dt * ed.values[j]);
        return scaled * lu.inverse();
    }
    const CMatrix scaledX = dt * X;
    return scaledX.exp();
}

}  // namespace pfeq::linalg
