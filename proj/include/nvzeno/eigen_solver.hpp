#pragma once

#include <cstddef>

#include "nvzeno/core.hpp"

namespace nvzeno {

struct HermitianEigen {
  Eigen::VectorXd values;  // ascending
  CMatrix vectors;         // columns are eigenvectors
};

/// Matrices up to this dimension go through Eigen's self-adjoint solver;
/// larger ones are handed to LAPACK zheevd.
inline constexpr std::size_t kLapackThresholdDim = 192;

/// Above this dimension LAPACK zheev replaces zheevd to avoid its n^2 workspace.
inline constexpr std::size_t kLowMemoryThresholdDim = 4096;

/// Full eigendecomposition of a Hermitian matrix. Only the lower triangle is
/// read. Throws NumericalError on non-finite input or solver failure.
HermitianEigen hermitian_eigen(const CMatrix& h);
/// Same, but reuses the storage of `h` for the eigenvectors when LAPACK is used.
HermitianEigen hermitian_eigen(CMatrix&& h);

/// Forces a specific backend; used to cross-check the two paths.
HermitianEigen hermitian_eigen_eigen(const CMatrix& h);
HermitianEigen hermitian_eigen_lapack(CMatrix h);

}  // namespace nvzeno
