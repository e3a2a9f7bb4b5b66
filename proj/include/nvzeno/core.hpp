#pragma once

// Units contract: energies are angular frequencies (rad/s), times are seconds,
// lengths are metres, fields are tesla. hbar = 1 in every Hamiltonian; the
// dipolar prefactor carries one explicit hbar to land in rad/s.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

namespace nvzeno {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Tensor3 = Eigen::Matrix3d;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct PhysConstants {
  /// Zero-field splitting, 2.87 GHz taken as an ordinary frequency.
  double zero_field_splitting = 2.0 * std::numbers::pi * 2.87e9;
  double gamma_e = -1.76e11;  // rad s^-1 T^-1
  double gamma_c = 6.73e7;    // rad s^-1 T^-1
  double mu0 = 4.0e-7 * std::numbers::pi;
  double hbar = 1.054571817e-34;
  double lattice_a = 3.567e-10;  // conventional cubic cell of diamond

  /// mu0 * hbar / (4 pi): turns g1 g2 / r^3 into rad/s.
  [[nodiscard]] double dipolar_scale() const {
    return mu0 * hbar / (4.0 * std::numbers::pi);
  }
};

/// Electron spin parameters together with the static field along the NV axis.
struct NvParams {
  PhysConstants phys{};
  double b_field = 0.102498;  // T

  /// Energy of |+1>, |0>, |-1> relative to |0>, in basis order.
  [[nodiscard]] double energy_plus() const {
    return phys.zero_field_splitting - phys.gamma_e * b_field;
  }
  /// |0> -> |-1> splitting, D + gamma_e B.
  [[nodiscard]] double omega_a() const {
    return phys.zero_field_splitting + phys.gamma_e * b_field;
  }
  /// Field at which |-1> becomes degenerate with |0>.
  [[nodiscard]] double anticrossing_field() const {
    return phys.zero_field_splitting / -phys.gamma_e;
  }
};

namespace units {
inline constexpr double kTeslaPerGauss = 1e-4;
inline constexpr double kMetresPerNm = 1e-9;
inline constexpr double kSecondsPerUs = 1e-6;
inline double gauss_to_tesla(double g) { return g * kTeslaPerGauss; }
inline double tesla_to_gauss(double t) { return t / kTeslaPerGauss; }
inline double nm_to_m(double nm) { return nm * kMetresPerNm; }
inline double m_to_nm(double m) { return m / kMetresPerNm; }
inline double us_to_s(double us) { return us * kSecondsPerUs; }
inline double s_to_us(double s) { return s / kSecondsPerUs; }
}  // namespace units

/// (mu0 g1 g2 hbar / 4 pi |r|^3) (1 - 3 rhat rhat^T), in rad/s.
/// Throws std::domain_error for a zero displacement.
Tensor3 dipole_tensor(const Vec3& r, double g1, double g2,
                      const PhysConstants& phys = {});

namespace spin1 {
// Basis order (|+1>, |0>, |-1>).
inline constexpr int kPlus = 0;
inline constexpr int kZero = 1;
inline constexpr int kMinus = 2;
const CMatrix& sx();
const CMatrix& sy();
const CMatrix& sz();
}  // namespace spin1

namespace spin_half {
// Basis order (|m=+1/2>, |m=-1/2>).
inline constexpr int kUp = 0;
inline constexpr int kDown = 1;
const CMatrix& ix();
const CMatrix& iy();
const CMatrix& iz();
}  // namespace spin_half

/// Largest dimension kron_assemble will build.
inline constexpr std::size_t kMaxAssembledDim = std::size_t{1} << 15;

/// Kronecker product in list order (electron first, then bath sites).
CMatrix kron_assemble(std::span<const CMatrix> ops);

/// Identity-padded embedding of one electron operator and one nuclear operator
/// acting on `site` of an `n_sites` cluster. Either operator may be empty,
/// meaning identity on that factor.
CMatrix embed(const CMatrix& electron_op, const CMatrix& nuclear_op,
              std::size_t site, std::size_t n_sites);

/// Embedding of a nuclear-nuclear product acting on sites a < b.
CMatrix embed_pair(const CMatrix& op_a, std::size_t a, const CMatrix& op_b,
                   std::size_t b, std::size_t n_sites);

}  // namespace nvzeno
