#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/dynamics.hpp"
#include "nvzeno/eigen_solver.hpp"
#include "nvzeno/errors.hpp"

using namespace nvzeno;

namespace {

Bath single_site_bath(const Vec3& r, double field) {
  Bath b;
  b.config.field_bz = field;
  b.sites.push_back(make_site(0, r, field, b.phys));
  return b;
}

Bath random_bath(std::uint64_t seed, std::size_t n, double r_min = 1e-9) {
  BathConfig c;
  c.seed = seed;
  c.n_spins = n;
  c.r_min = r_min;
  return sample_bath(c);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

CMatrix random_hermitian(Eigen::Index n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = Complex(g(gen), g(gen));
  return (m + m.adjoint()) / 2.0;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("empty cluster: bare NV spectrum and unit survival") {
  const NvParams nv;
  const Bath bath;
  const auto h = build_cluster_hamiltonian(nv, bath, {});
  REQUIRE(h.dim() == 3);
  const double d = nv.phys.zero_field_splitting, ge = nv.phys.gamma_e, b = nv.b_field;
  CHECK(h.matrix(spin1::kPlus, spin1::kPlus).real() == doctest::Approx(d - ge * b));
  CHECK(h.matrix(spin1::kZero, spin1::kZero).real() == 0.0);
  CHECK(h.matrix(spin1::kMinus, spin1::kMinus).real() == doctest::Approx(d + ge * b));
  CHECK((h.matrix - CMatrix(h.matrix.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
  const auto curve = survival_exact(h, uniform_grid(2e-4, 50));
  for (double p : curve.values) CHECK(std::abs(p - 1.0) <= 1e-15);
}

TEST_CASE("at B = D / -gamma_e the |-1> level is degenerate with |0>") {
  NvParams nv;
  nv.b_field = nv.anticrossing_field();
  const auto h = build_cluster_hamiltonian(nv, Bath{}, {});
  CHECK(std::abs(h.matrix(spin1::kMinus, spin1::kMinus)) <= 1e-6);
  CHECK(units::tesla_to_gauss(nv.b_field) == doctest::Approx(1024.98).epsilon(0.005));
}

TEST_CASE("on-axis site has no flip-flop element between |0,+1/2> and |-1,-1/2>") {
  const NvParams nv;
  const Bath bath = single_site_bath(Vec3(0, 0, 1.2e-9), nv.b_field);
  const std::vector<std::size_t> s{0};
  const auto h = build_cluster_hamiltonian(nv, bath, s);
  const auto row = 2 * spin1::kMinus + spin_half::kDown;
  const auto col = 2 * spin1::kZero + spin_half::kUp;
  CHECK(std::abs(h.matrix(row, col)) == 0.0);
}

TEST_CASE("direct assembly equals the Kronecker-product reference") {
  const NvParams nv;
  const Bath bath = random_bath(4, 5);
  for (bool dipole : {false, true}) {
    for (const std::vector<std::size_t>& sites :
         {std::vector<std::size_t>{0}, std::vector<std::size_t>{1, 3},
          std::vector<std::size_t>{0, 2, 4}, iota(5)}) {
      const auto h = build_cluster_hamiltonian(nv, bath, sites, dipole);
      const CMatrix ref = build_cluster_hamiltonian_kron(nv, bath, sites, dipole);
      REQUIRE(h.dim() == ref.rows());
      CHECK((h.matrix - ref).cwiseAbs().maxCoeff() <= 1e-15 * ref.cwiseAbs().maxCoeff());
      CHECK((h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("nuclear dipole flag only adds pair terms") {
  const NvParams nv;
  const Bath bath = random_bath(9, 3);
  const auto on = build_cluster_hamiltonian(nv, bath, iota(3), true);
  const auto off = build_cluster_hamiltonian(nv, bath, iota(3), false);
  const double diff = (on.matrix - off.matrix).cwiseAbs().maxCoeff();
  CHECK(diff > 0.0);
  CHECK(diff < 1e3);  // nuclear-nuclear couplings are tiny compared to hyperfine ones
  const auto one_on = build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{1}, true);
  const auto one_off = build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{1}, false);
  CHECK((one_on.matrix - one_off.matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_cluster_hamiltonian errors") {
  const NvParams nv;
  const Bath bath = random_bath(1, 3);
  CHECK_THROWS_AS(build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{3}), std::out_of_range);
  CHECK_THROWS_AS(build_cluster_hamiltonian(nv, bath, iota(3), false, 2), BudgetExceeded);
}

TEST_CASE("single in-plane site follows the two-level Rabi formula") {
  const PhysConstants phys;
  const Vec3 r(2.5e-9, 0, 0);
  const Tensor3 a = dipole_tensor(r, phys.gamma_c, phys.gamma_e, phys);
  const double v = std::sqrt(flip_weight(r, phys));

  NvParams resonant;
  resonant.b_field = -(phys.zero_field_splitting + a(2, 2) / 2) / (phys.gamma_e + phys.gamma_c);
  for (const NvParams& nv : {NvParams{}, resonant}) {
    const Bath bath = single_site_bath(r, nv.b_field);
    const double delta = nv.omega_a() + phys.gamma_c * nv.b_field + a(2, 2) / 2;
    const double omega = std::sqrt(delta * delta + 4 * v * v);
    const auto times = uniform_grid(5 * 2 * M_PI / omega, 101);
    const auto curve = survival_exact(build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{0}), times);
    double err = 0.0, min_p = 1.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double s = std::sin(omega * times[k] / 2);
      const double rabi = 1 - 4 * v * v / (omega * omega) * s * s;
      err = std::max(err, std::abs(curve.values[k] - rabi));
      min_p = std::min(min_p, curve.values[k]);
    }
    CHECK(err <= 1e-5);
    if (&nv == &resonant) CHECK(min_p < 1e-3);
  }
}

TEST_CASE("survival: t = 0, bounds, reuse versus per-time evaluation") {
  const NvParams nv;
  const Bath bath = random_bath(2, 4, 1.5e-9);
  const auto h = build_cluster_hamiltonian(nv, bath, iota(4));
  const auto times = uniform_grid(2e-4, 41);
  const Propagator prop(h.matrix, 4);
  const auto all = prop.survival(times);
  CHECK(std::abs(all[0] - 1.0) <= 1e-14);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(all[k] >= -1e-12);
    CHECK(all[k] <= 1 + 1e-12);
    const double single = prop.survival(std::vector<double>{times[k]})[0];
    CHECK(std::abs(single - all[k]) <= 1e-12);
  }
}

TEST_CASE("survival is invariant under a global energy shift") {
  const NvParams nv;
  const Bath bath = random_bath(6, 3, 1.5e-9);
  const auto h = build_cluster_hamiltonian(nv, bath, iota(3));
  const auto times = uniform_grid(2e-4, 41);
  const auto base = Propagator(h.matrix, 3).survival(times);
  for (double shift : {1.5e5, -3.25e6}) {
    const CMatrix shifted = h.matrix + shift * CMatrix::Identity(h.dim(), h.dim());
    const auto moved = Propagator(shifted, 3).survival(times);
    double err = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) err = std::max(err, std::abs(moved[k] - base[k]));
    // Eigenvalues carry an absolute error near eps * |H| ~ 4e-6 rad/s, so
    // phases at 0.2 ms agree only to about 1e-9.
    CHECK(err <= 1e-8);
  }
}

TEST_CASE("unitarity residuals") {
  const CMatrix r = random_hermitian(24, 3);
  ClusterHamiltonian h{{0, 1, 2}, r, false};
  CHECK(unitarity_check(h, 0.0) <= 1e-14);
  CHECK(unitarity_check(h, 1.7) <= 1e-12);

  const NvParams nv;
  const Bath bath = random_bath(8, 4);
  const auto cluster = build_cluster_hamiltonian(nv, bath, iota(4));
  CHECK(cluster.dim() == 48);
  CHECK(unitarity_check(cluster, 1e-3) <= 1e-11);
}

TEST_CASE("initial bath states") {
  const NvParams nv;
  const Bath bath = random_bath(12, 1, 1.5e-9);
  const auto h = build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{0});
  const auto times = uniform_grid(2e-4, 81);
  const auto up = survival_exact(h, times, InitialBathState::ZeemanGround).values;
  const auto down = survival_exact(h, times, InitialBathState::ZeemanExcited).values;
  const auto mixed = survival_exact(h, times, InitialBathState::InfiniteTemperature).values;
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(down[k] > 0.99);  // far off resonance
    CHECK(mixed[k] == doctest::Approx((up[k] + down[k]) / 2).epsilon(1e-12));
  }
  CHECK(initial_state_index(3, InitialBathState::ZeemanGround) == 8);
  CHECK(initial_state_index(3, InitialBathState::ZeemanExcited) == 15);
}

TEST_CASE("|0> is an eigenstate of H_NV") {
  const NvParams nv;
  CHECK(nv_denominator_residual(nv, uniform_grid(2e-4, 200)) <= 1e-12);
}

TEST_CASE("Eigen and LAPACK backends agree") {
  const CMatrix m = random_hermitian(60, 11);
  const auto e1 = hermitian_eigen_eigen(m);
  const auto e2 = hermitian_eigen_lapack(m);
  CHECK((e1.values - e2.values).cwiseAbs().maxCoeff() <= 1e-12 * e1.values.cwiseAbs().maxCoeff());
  // Compare spectral projectors' action through reconstruction.
  const CMatrix r1 = e1.vectors * e1.values.asDiagonal() * e1.vectors.adjoint();
  const CMatrix r2 = e2.vectors * e2.values.asDiagonal() * e2.vectors.adjoint();
  CHECK((r1 - m).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((r2 - m).cwiseAbs().maxCoeff() <= 1e-12);
  CMatrix bad = m;
  bad(0, 0) = Complex(std::nan(""), 0);
  CHECK_THROWS_AS(hermitian_eigen(bad), NumericalError);
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(2e-4, 200);
  REQUIRE(g.size() == 200);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 2e-4);
}

}  // TEST_SUITE
