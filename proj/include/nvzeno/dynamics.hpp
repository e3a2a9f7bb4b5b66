#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/core.hpp"
#include "nvzeno/eigen_solver.hpp"

namespace nvzeno {

/// Nuclear part of the initial product state; the electron always starts in |0>.
///
/// ZeemanGround puts every nucleus in m_I = +1/2, the lower Zeeman level for
/// gamma_c B > 0. From this state the flip |0,+1/2> -> |-1,-1/2> costs
/// omega_a + gamma_c B + A_zz/2, which vanishes near 1024.98 G, so this is the
/// polarised state that relaxes the electron at the operating field.
/// InfiniteTemperature averages exactly over all 2^n nuclear basis states.
enum class InitialBathState { ZeemanGround, ZeemanExcited, InfiniteTemperature };

/// Hard ceiling on the sites in one assembled Hamiltonian (dimension 3 * 2^n).
inline constexpr std::size_t kMaxClusterSites = 14;

struct ClusterHamiltonian {
  std::vector<std::size_t> sites;
  CMatrix matrix;
  bool include_nuclear_dipole = false;

  [[nodiscard]] std::size_t n_sites() const { return sites.size(); }
  [[nodiscard]] Eigen::Index dim() const { return matrix.rows(); }
};

/// H = D Sz^2 - gamma_e B Sz - gamma_c B sum Iz + sum S.A_i.I_i
///     [+ sum_{i<j} I_i.T_ij.I_j when include_nuclear_dipole].
/// No rotating-wave approximation. Throws std::out_of_range on a bad site
/// index and BudgetExceeded past max_sites.
ClusterHamiltonian build_cluster_hamiltonian(const NvParams& nv, const Bath& bath,
                                             std::span<const std::size_t> sites,
                                             bool include_nuclear_dipole = false,
                                             std::size_t max_sites = kMaxClusterSites);

/// Same Hamiltonian assembled term by term with kron_assemble. Slow; kept as a
/// check on the basis-ordering contract.
CMatrix build_cluster_hamiltonian_kron(const NvParams& nv, const Bath& bath,
                                       std::span<const std::size_t> sites,
                                       bool include_nuclear_dipole = false);

struct CurveMeta {
  std::uint64_t seed = 0;
  std::size_t n_spins = 0;
  int order = 0;  // 0 means exact
  double b_field = 0.0;
  std::string grid;
  std::size_t guard_count = 0;
};

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::string method = "exact";
  CurveMeta meta{};
};

/// One eigendecomposition H = V diag(lambda) V^H reused for every time.
class Propagator {
 public:
  explicit Propagator(const CMatrix& h, std::size_t n_sites,
                      InitialBathState initial = InitialBathState::ZeemanGround);
  /// Takes ownership of `h` so large matrices are diagonalised in place.
  Propagator(CMatrix&& h, std::size_t n_sites,
             InitialBathState initial = InitialBathState::ZeemanGround);

  /// Probability of finding the electron in |0> at each time.
  [[nodiscard]] std::vector<double> survival(std::span<const double> times) const;
  /// max |U^H U - 1| for U = exp(-i H t).
  [[nodiscard]] double unitarity_residual(double t) const;
  [[nodiscard]] const HermitianEigen& eigen() const { return eig_; }

 private:
  HermitianEigen eig_;
  std::size_t n_sites_;
  InitialBathState initial_;
};

SurvivalCurve survival_exact(const ClusterHamiltonian& h, std::span<const double> times,
                             InitialBathState initial = InitialBathState::ZeemanGround);

double unitarity_check(const ClusterHamiltonian& h, double t);

/// Index of the initial basis state |0, bath> in the global ordering.
std::size_t initial_state_index(std::size_t n_sites, InitialBathState initial);

/// How far |0> is from being an eigenvector of H_NV, plus the largest
/// deviation of the bare-NV survival from 1 over the grid. The CCE normalising
/// denominators are unity exactly when both vanish.
double nv_denominator_residual(const NvParams& nv, std::span<const double> times);

/// Uniform grid of n points on [0, t_max].
std::vector<double> uniform_grid(double t_max, std::size_t n);

}  // namespace nvzeno
