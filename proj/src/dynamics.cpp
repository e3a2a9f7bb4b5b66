#include "nvzeno/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvzeno/errors.hpp"

namespace nvzeno {

namespace {

std::array<double, 3> nv_levels(const NvParams& nv) {
  // Sz^2 and Sz eigenvalues in (|+1>, |0>, |-1>) order.
  const double d = nv.phys.zero_field_splitting;
  const double z = -nv.phys.gamma_e * nv.b_field;
  return {d + z, 0.0, d - z};
}

// 6x6 block acting on (electron, one nucleus): Zeeman plus S.A.I.
CMatrix site_block(const Tensor3& a, double nuclear_zeeman) {
  const std::array<const CMatrix*, 3> s{&spin1::sx(), &spin1::sy(), &spin1::sz()};
  const std::array<const CMatrix*, 3> i{&spin_half::ix(), &spin_half::iy(), &spin_half::iz()};
  CMatrix h = CMatrix::Zero(6, 6);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      if (a(p, q) == 0.0) continue;
      for (int e = 0; e < 3; ++e)
        for (int f = 0; f < 3; ++f) {
          const Complex se = (*s[p])(e, f);
          if (se == 0.0) continue;
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) h(2 * e + b, 2 * f + c) += a(p, q) * se * (*i[q])(b, c);
        }
    }
  for (int e = 0; e < 3; ++e)
    for (int b = 0; b < 2; ++b) h(2 * e + b, 2 * e + b) += nuclear_zeeman * spin_half::iz()(b, b);
  return h;
}

// 4x4 block sum_pq T_pq I_p (x) I_q on two nuclei.
CMatrix pair_block(const Tensor3& t) {
  const std::array<const CMatrix*, 3> i{&spin_half::ix(), &spin_half::iy(), &spin_half::iz()};
  CMatrix h = CMatrix::Zero(4, 4);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d)
            for (int e = 0; e < 2; ++e)
              h(2 * b + d, 2 * c + e) += t(p, q) * (*i[p])(b, c) * (*i[q])(d, e);
  return h;
}

void check_sites(const Bath& bath, std::span<const std::size_t> sites, std::size_t max_sites) {
  if (sites.size() > max_sites)
    throw BudgetExceeded("cluster of " + std::to_string(sites.size()) +
                         " sites exceeds the limit of " + std::to_string(max_sites));
  for (auto s : sites)
    if (s >= bath.size())
      throw std::out_of_range("cluster site " + std::to_string(s) + " not in bath of " +
                              std::to_string(bath.size()));
}

void enforce_hermitian(CMatrix& h) {
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    h(j, j) = h(j, j).real();
    for (Eigen::Index i = j + 1; i < h.rows(); ++i) h(j, i) = std::conj(h(i, j));
  }
}

}  // namespace

ClusterHamiltonian build_cluster_hamiltonian(const NvParams& nv, const Bath& bath,
                                             std::span<const std::size_t> sites,
                                             bool include_nuclear_dipole,
                                             std::size_t max_sites) {
  check_sites(bath, sites, max_sites);
  const std::size_t n = sites.size();
  const std::size_t nb = std::size_t{1} << n;  // nuclear block size
  const auto dim = static_cast<Eigen::Index>(3 * nb);
  CMatrix h = CMatrix::Zero(dim, dim);

  const auto levels = nv_levels(nv);
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t v = 0; v < nb; ++v) {
      const auto k = static_cast<Eigen::Index>(e * nb + v);
      h(k, k) += levels[e];
    }

  const double zeeman = -nv.phys.gamma_c * nv.b_field;
  for (std::size_t s = 0; s < n; ++s) {
    const CMatrix blk = site_block(bath.sites[sites[s]].hyperfine, zeeman);
    const std::size_t bit = n - 1 - s;  // site 0 is the most significant factor
    const std::size_t mask = std::size_t{1} << bit;
    for (std::size_t rest = 0; rest < nb; ++rest) {
      if (rest & mask) continue;
      for (std::size_t e = 0; e < 3; ++e)
        for (std::size_t f = 0; f < 3; ++f)
          for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t c = 0; c < 2; ++c) {
              const Complex v = blk(2 * e + b, 2 * f + c);
              if (v == 0.0) continue;
              const auto row = static_cast<Eigen::Index>(e * nb + (rest | (b ? mask : 0)));
              const auto col = static_cast<Eigen::Index>(f * nb + (rest | (c ? mask : 0)));
              h(row, col) += v;
            }
    }
  }

  if (include_nuclear_dipole) {
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = s + 1; t < n; ++t) {
        const Vec3 rij = bath.sites[sites[t]].r - bath.sites[sites[s]].r;
        const CMatrix blk = pair_block(dipole_tensor(rij, nv.phys.gamma_c, nv.phys.gamma_c, nv.phys));
        const std::size_t ma = std::size_t{1} << (n - 1 - s);
        const std::size_t mb = std::size_t{1} << (n - 1 - t);
        for (std::size_t rest = 0; rest < nb; ++rest) {
          if (rest & (ma | mb)) continue;
          for (std::size_t e = 0; e < 3; ++e)
            for (std::size_t x = 0; x < 4; ++x)
              for (std::size_t y = 0; y < 4; ++y) {
                const Complex v = blk(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                if (v == 0.0) continue;
                const std::size_t rx = rest | ((x & 2) ? ma : 0) | ((x & 1) ? mb : 0);
                const std::size_t ry = rest | ((y & 2) ? ma : 0) | ((y & 1) ? mb : 0);
                h(static_cast<Eigen::Index>(e * nb + rx), static_cast<Eigen::Index>(e * nb + ry)) += v;
              }
        }
      }
  }

  enforce_hermitian(h);
  return {std::vector<std::size_t>(sites.begin(), sites.end()), std::move(h),
          include_nuclear_dipole};
}

CMatrix build_cluster_hamiltonian_kron(const NvParams& nv, const Bath& bath,
                                       std::span<const std::size_t> sites,
                                       bool include_nuclear_dipole) {
  check_sites(bath, sites, kMaxClusterSites);
  const std::size_t n = sites.size();
  const CMatrix none;
  const auto& sz = spin1::sz();
  CMatrix h = embed(nv.phys.zero_field_splitting * sz * sz - nv.phys.gamma_e * nv.b_field * sz,
                    none, 0, n);
  const std::array<const CMatrix*, 3> s{&spin1::sx(), &spin1::sy(), &spin1::sz()};
  const std::array<const CMatrix*, 3> i{&spin_half::ix(), &spin_half::iy(), &spin_half::iz()};
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor3& a = bath.sites[sites[k]].hyperfine;
    h += -nv.phys.gamma_c * nv.b_field * embed(none, spin_half::iz(), k, n);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) h += a(p, q) * embed(*s[p], *i[q], k, n);
  }
  if (include_nuclear_dipole) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const Tensor3 t = dipole_tensor(bath.sites[sites[b]].r - bath.sites[sites[a]].r,
                                        nv.phys.gamma_c, nv.phys.gamma_c, nv.phys);
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) h += t(p, q) * embed_pair(*i[p], a, *i[q], b, n);
      }
  }
  return h;
}

std::size_t initial_state_index(std::size_t n_sites, InitialBathState initial) {
  const std::size_t nb = std::size_t{1} << n_sites;
  const std::size_t nuclear = initial == InitialBathState::ZeemanExcited ? nb - 1 : 0;
  return static_cast<std::size_t>(spin1::kZero) * nb + nuclear;
}

Propagator::Propagator(const CMatrix& h, std::size_t n_sites, InitialBathState initial)
    : eig_(hermitian_eigen(h)), n_sites_(n_sites), initial_(initial) {
  if (h.rows() != static_cast<Eigen::Index>(3 * (std::size_t{1} << n_sites)))
    throw std::invalid_argument("Propagator: dimension does not match site count");
}

Propagator::Propagator(CMatrix&& h, std::size_t n_sites, InitialBathState initial)
    : n_sites_(n_sites), initial_(initial) {
  if (h.rows() != static_cast<Eigen::Index>(3 * (std::size_t{1} << n_sites)))
    throw std::invalid_argument("Propagator: dimension does not match site count");
  eig_ = hermitian_eigen(std::move(h));
}

std::vector<double> Propagator::survival(std::span<const double> times) const {
  const auto nb = static_cast<Eigen::Index>(std::size_t{1} << n_sites_);
  const auto dim = eig_.vectors.rows();
  const auto nt = static_cast<Eigen::Index>(times.size());
  const auto& v = eig_.vectors;
  const auto v0 = v.middleRows(nb * spin1::kZero, nb);  // electron-|0> block
  std::vector<double> out(times.size());

  if (initial_ == InitialBathState::InfiniteTemperature) {
    // P(t) = |V0 e^{-i L t} V0^H|_F^2 / 2^n
    const CMatrix c = v0.adjoint();
    CMatrix phased(dim, nb);
    for (Eigen::Index k = 0; k < nt; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      for (Eigen::Index m = 0; m < dim; ++m)
        phased.row(m) = std::polar(1.0, -eig_.values(m) * t) * c.row(m);
      out[static_cast<std::size_t>(k)] = (v0 * phased).squaredNorm() / static_cast<double>(nb);
    }
  } else {
    const auto i0 = static_cast<Eigen::Index>(initial_state_index(n_sites_, initial_));
    const CVector c = v.row(i0).adjoint();
    CMatrix w(dim, nt);
    for (Eigen::Index k = 0; k < nt; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      for (Eigen::Index m = 0; m < dim; ++m) w(m, k) = std::polar(1.0, -eig_.values(m) * t) * c(m);
    }
    const CMatrix amp = v0 * w;
    for (Eigen::Index k = 0; k < nt; ++k) out[static_cast<std::size_t>(k)] = amp.col(k).squaredNorm();
  }
  for (double p : out)
    if (!std::isfinite(p)) throw NumericalError("survival: non-finite probability");
  return out;
}

double Propagator::unitarity_residual(double t) const {
  const auto& v = eig_.vectors;
  CMatrix vp = v;
  for (Eigen::Index m = 0; m < v.cols(); ++m) vp.col(m) *= std::polar(1.0, -eig_.values(m) * t);
  const CMatrix u = vp * v.adjoint();
  const CMatrix r = u.adjoint() * u - CMatrix::Identity(v.rows(), v.cols());
  return r.cwiseAbs().maxCoeff();
}

SurvivalCurve survival_exact(const ClusterHamiltonian& h, std::span<const double> times,
                             InitialBathState initial) {
  const Propagator prop(h.matrix, h.n_sites(), initial);
  SurvivalCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.values = prop.survival(times);
  curve.method = "exact";
  curve.meta.n_spins = h.n_sites();
  return curve;
}

double unitarity_check(const ClusterHamiltonian& h, double t) {
  return Propagator(h.matrix, h.n_sites()).unitarity_residual(t);
}

double nv_denominator_residual(const NvParams& nv, std::span<const double> times) {
  const Bath empty;
  const auto h = build_cluster_hamiltonian(nv, empty, {});
  const CVector e0 = CVector::Unit(3, spin1::kZero);
  const CVector he = h.matrix * e0;
  const Complex expect = e0.dot(he);
  const double scale = std::max(1.0, h.matrix.cwiseAbs().maxCoeff());
  double residual = (he - expect * e0).cwiseAbs().maxCoeff() / scale;
  const auto p = Propagator(h.matrix, 0).survival(times);
  for (double x : p) residual = std::max(residual, std::abs(x - 1.0));
  return residual;
}

std::vector<double> uniform_grid(double t_max, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {t_max};
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = t_max * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

}  // namespace nvzeno
