#include "nvzeno/core.hpp"

#include <cmath>
#include <vector>

namespace nvzeno {

Tensor3 dipole_tensor(const Vec3& r, double g1, double g2,
                      const PhysConstants& phys) {
  const double r2 = r.squaredNorm();
  if (!(r2 > 0.0)) throw std::domain_error("dipole_tensor: zero displacement");
  const double rn = std::sqrt(r2);
  const double pref = phys.dipolar_scale() * g1 * g2 / (r2 * rn);
  Tensor3 t = Tensor3::Identity() - 3.0 * (r * r.transpose()) / r2;
  t *= pref;
  // exact symmetry; the outer product above is symmetric up to rounding order
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) t(j, i) = t(i, j);
  return t;
}

namespace {

CMatrix make_spin1(char axis) {
  const double s = 1.0 / std::numbers::sqrt2;
  const Complex i{0.0, 1.0};
  CMatrix m = CMatrix::Zero(3, 3);
  switch (axis) {
    case 'x':
      m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = s;
      break;
    case 'y':
      m(0, 1) = -i * s;
      m(1, 0) = i * s;
      m(1, 2) = -i * s;
      m(2, 1) = i * s;
      break;
    default:
      m(0, 0) = 1.0;
      m(2, 2) = -1.0;
  }
  return m;
}

CMatrix make_half(char axis) {
  const Complex i{0.0, 1.0};
  CMatrix m = CMatrix::Zero(2, 2);
  switch (axis) {
    case 'x':
      m(0, 1) = m(1, 0) = 0.5;
      break;
    case 'y':
      m(0, 1) = -0.5 * i;
      m(1, 0) = 0.5 * i;
      break;
    default:
      m(0, 0) = 0.5;
      m(1, 1) = -0.5;
  }
  return m;
}

CMatrix kron2(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

namespace spin1 {
const CMatrix& sx() { static const CMatrix m = make_spin1('x'); return m; }
const CMatrix& sy() { static const CMatrix m = make_spin1('y'); return m; }
const CMatrix& sz() { static const CMatrix m = make_spin1('z'); return m; }
}  // namespace spin1

namespace spin_half {
const CMatrix& ix() { static const CMatrix m = make_half('x'); return m; }
const CMatrix& iy() { static const CMatrix m = make_half('y'); return m; }
const CMatrix& iz() { static const CMatrix m = make_half('z'); return m; }
}  // namespace spin_half

CMatrix kron_assemble(std::span<const CMatrix> ops) {
  if (ops.empty()) throw std::invalid_argument("kron_assemble: empty operator list");
  std::size_t dim = 1;
  for (const auto& op : ops) {
    if (op.rows() != op.cols() || op.rows() == 0)
      throw std::invalid_argument("kron_assemble: operators must be square");
    dim *= static_cast<std::size_t>(op.rows());
    if (dim > kMaxAssembledDim)
      throw std::length_error("kron_assemble: dimension exceeds limit");
  }
  CMatrix out = ops.front();
  for (std::size_t k = 1; k < ops.size(); ++k) out = kron2(out, ops[k]);
  return out;
}

CMatrix embed(const CMatrix& electron_op, const CMatrix& nuclear_op,
              std::size_t site, std::size_t n_sites) {
  std::vector<CMatrix> ops;
  ops.reserve(n_sites + 1);
  ops.push_back(electron_op.size() ? electron_op : CMatrix::Identity(3, 3));
  for (std::size_t k = 0; k < n_sites; ++k)
    ops.push_back(k == site && nuclear_op.size() ? nuclear_op
                                                  : CMatrix::Identity(2, 2));
  return kron_assemble(ops);
}

CMatrix embed_pair(const CMatrix& op_a, std::size_t a, const CMatrix& op_b,
                   std::size_t b, std::size_t n_sites) {
  std::vector<CMatrix> ops;
  ops.reserve(n_sites + 1);
  ops.push_back(CMatrix::Identity(3, 3));
  for (std::size_t k = 0; k < n_sites; ++k) {
    if (k == a)
      ops.push_back(op_a);
    else if (k == b)
      ops.push_back(op_b);
    else
      ops.push_back(CMatrix::Identity(2, 2));
  }
  return kron_assemble(ops);
}

}  // namespace nvzeno
