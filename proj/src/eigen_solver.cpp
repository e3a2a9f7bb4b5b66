#include "nvzeno/eigen_solver.hpp"

#include <lapacke.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "nvzeno/errors.hpp"

namespace nvzeno {

namespace {

void require_finite(const CMatrix& h) {
  if (!h.allFinite()) throw NumericalError("hermitian_eigen: non-finite matrix entries");
}

}  // namespace

HermitianEigen hermitian_eigen_eigen(const CMatrix& h) {
  require_finite(h);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw NumericalError("hermitian_eigen: Eigen solver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

HermitianEigen hermitian_eigen_lapack(CMatrix h) {
  require_finite(h);
  const auto n = static_cast<lapack_int>(h.rows());
  Eigen::VectorXd w(n);
  // Column-major storage with lda = n; 'L' matches Eigen's lower-triangle read.
  // zheevd needs two extra n x n work arrays, so very large matrices use the
  // slower QR driver whose workspace is linear in n.
  auto* a = reinterpret_cast<lapack_complex_double*>(h.data());
  const bool low_memory = static_cast<std::size_t>(n) > kLowMemoryThresholdDim;
  const lapack_int info = low_memory
                              ? LAPACKE_zheev(LAPACK_COL_MAJOR, 'V', 'L', n, a, n, w.data())
                              : LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, a, n, w.data());
  if (info != 0)
    throw NumericalError(std::string("hermitian_eigen: ") + (low_memory ? "zheev" : "zheevd") +
                         " failed, info = " + std::to_string(info));
  return {std::move(w), std::move(h)};
}

HermitianEigen hermitian_eigen(const CMatrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("hermitian_eigen: matrix not square");
  if (static_cast<std::size_t>(h.rows()) <= kLapackThresholdDim) return hermitian_eigen_eigen(h);
  return hermitian_eigen_lapack(h);
}

HermitianEigen hermitian_eigen(CMatrix&& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("hermitian_eigen: matrix not square");
  if (static_cast<std::size_t>(h.rows()) <= kLapackThresholdDim) return hermitian_eigen_eigen(h);
  return hermitian_eigen_lapack(std::move(h));
}

}  // namespace nvzeno
