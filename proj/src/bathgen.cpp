#include "nvzeno/bathgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvzeno/errors.hpp"

namespace nvzeno {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t pack_index(const LatticeIndex& n) {
  constexpr std::int64_t kOffset = 1 << 20;
  std::uint64_t key = 0;
  for (int c : n) key = (key << 21) | static_cast<std::uint64_t>(c + kOffset);
  return key;
}

// Rows map crystal axes onto the NV frame: z along [111], x along [1-10].
const Eigen::Matrix3d& nv_frame() {
  static const Eigen::Matrix3d m = [] {
    Eigen::Matrix3d r;
    r.row(0) = Eigen::RowVector3d(1.0, -1.0, 0.0) / std::sqrt(2.0);
    r.row(1) = Eigen::RowVector3d(1.0, 1.0, -2.0) / std::sqrt(6.0);
    r.row(2) = Eigen::RowVector3d(1.0, 1.0, 1.0) / std::sqrt(3.0);
    return r;
  }();
  return m;
}

bool is_diamond_site(const LatticeIndex& n) {
  const bool all_even = n[0] % 2 == 0 && n[1] % 2 == 0 && n[2] % 2 == 0;
  const bool all_odd = n[0] % 2 != 0 && n[1] % 2 != 0 && n[2] % 2 != 0;
  const int sum_mod = (((n[0] + n[1] + n[2]) % 4) + 4) % 4;
  return (all_even && sum_mod == 0) || (all_odd && sum_mod == 3);
}

long norm2(const LatticeIndex& n) {
  return static_cast<long>(n[0]) * n[0] + static_cast<long>(n[1]) * n[1] +
         static_cast<long>(n[2]) * n[2];
}

Vec3 lattice_position(const LatticeIndex& n, const PhysConstants& phys) {
  const Vec3 crystal(n[0], n[1], n[2]);
  return nv_frame() * (crystal * (phys.lattice_a / 4.0));
}

// Carbon density of diamond: 8 atoms per conventional cell.
double site_density(const PhysConstants& phys) {
  return 8.0 / (phys.lattice_a * phys.lattice_a * phys.lattice_a);
}

}  // namespace

void BathConfig::validate() const {
  if (!(abundance >= 0.0 && abundance <= 1.0))
    throw ConfigError("bath: abundance must lie in [0, 1]");
  if (!(r_min >= 0.0) || !std::isfinite(r_min))
    throw ConfigError("bath: r_min must be finite and >= 0");
  if (n_spins < 1) throw ConfigError("bath: n_spins must be >= 1");
  if (r_max && !(*r_max > r_min && std::isfinite(*r_max)))
    throw ConfigError("bath: r_max must be finite and exceed r_min");
  if (!std::isfinite(field_bz)) throw ConfigError("bath: field must be finite");
}

Bath Bath::prefix(std::size_t n) const {
  Bath out{{}, config, phys};
  out.config.n_spins = std::min(n, sites.size());
  out.sites.assign(sites.begin(), sites.begin() + static_cast<std::ptrdiff_t>(out.config.n_spins));
  return out;
}

std::vector<LatticeSite> enumerate_lattice_sites(double r_max, const PhysConstants& phys,
                                                 std::size_t cap) {
  if (!(r_max >= 0.0) || !std::isfinite(r_max))
    throw std::invalid_argument("enumerate_lattice: r_max must be finite and >= 0");
  const double q = 4.0 * r_max / phys.lattice_a;  // radius in quarter-cell units
  const double estimate = site_density(phys) * 4.0 / 3.0 * std::numbers::pi *
                          r_max * r_max * r_max;
  if (estimate > static_cast<double>(cap))
    throw BudgetExceeded("enumerate_lattice: about " + std::to_string(static_cast<long>(estimate)) +
                         " sites requested, cap is " + std::to_string(cap));
  const long limit = static_cast<long>(std::floor(q * q * (1.0 + 1e-12)));
  const int extent = static_cast<int>(std::floor(q)) + 1;

  std::vector<LatticeSite> out;
  for (int i = -extent; i <= extent; ++i)
    for (int j = -extent; j <= extent; ++j)
      for (int k = -extent; k <= extent; ++k) {
        const LatticeIndex n{i, j, k};
        const long d2 = norm2(n);
        if (d2 == 0 || d2 > limit || !is_diamond_site(n)) continue;
        if (n == LatticeIndex{1, 1, 1}) continue;  // nitrogen
        out.push_back({n, lattice_position(n, phys)});
      }
  std::sort(out.begin(), out.end(), [](const LatticeSite& a, const LatticeSite& b) {
    const long da = norm2(a.index), db = norm2(b.index);
    return da != db ? da < db : a.index < b.index;
  });
  return out;
}

std::vector<Vec3> enumerate_lattice(double r_max, const PhysConstants& phys, std::size_t cap) {
  const auto sites = enumerate_lattice_sites(r_max, phys, cap);
  std::vector<Vec3> out;
  out.reserve(sites.size());
  for (const auto& s : sites) out.push_back(s.r);
  return out;
}

bool site_occupied(std::uint64_t seed, const LatticeIndex& site, double abundance) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(pack_index(site)));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < abundance;
}

double shifted_splitting(const Vec3& r, double field_bz, const PhysConstants& phys) {
  const Tensor3 a = dipole_tensor(r, phys.gamma_c, phys.gamma_e, phys);
  return -phys.gamma_c * field_bz - a(2, 2);
}

double flip_weight(const Vec3& r, const PhysConstants& phys) {
  // sqrt(2) (A_xx - A_yy + 2i A_xy) / 4, with |A_xx - A_yy + 2i A_xy| = 3|c| rho^2 / r^2.
  const double c = phys.dipolar_scale() * phys.gamma_c * phys.gamma_e;
  const double rho2 = r.x() * r.x() + r.y() * r.y();
  const double r2 = r.squaredNorm();
  return 9.0 / 8.0 * c * c * rho2 * rho2 / (r2 * r2 * r2 * r2 * r2);
}

NuclearSite make_site(std::size_t index, const Vec3& r, double field_bz,
                      const PhysConstants& phys) {
  NuclearSite s;
  s.index = index;
  s.r = r;
  s.hyperfine = dipole_tensor(r, phys.gamma_c, phys.gamma_e, phys);
  s.omega = -phys.gamma_c * field_bz - s.hyperfine(2, 2);
  return s;
}

Bath sample_bath(const BathConfig& config, const PhysConstants& phys) {
  config.validate();
  Bath bath{{}, config, phys};

  // Expected radius holding n_spins occupied sites beyond r_min, with margin.
  const double density = site_density(phys) * std::max(config.abundance, 1e-12);
  const double rmin3 = config.r_min * config.r_min * config.r_min;
  double radius = std::cbrt(rmin3 + 3.0 * static_cast<double>(config.n_spins) /
                                        (4.0 * std::numbers::pi * density));
  radius = std::max(radius * 1.3, config.r_min + phys.lattice_a);
  if (config.r_max) radius = std::min(radius, *config.r_max);

  const double rmin2 = config.r_min * config.r_min * (1.0 - 1e-12);
  for (;;) {
    std::vector<LatticeSite> candidates;
    try {
      candidates = enumerate_lattice_sites(radius, phys);
    } catch (const BudgetExceeded&) {
      throw ConfigError("bath: lattice cap reached before collecting " +
                        std::to_string(config.n_spins) + " spins (abundance too low?)");
    }
    bath.sites.clear();
    for (const auto& c : candidates) {
      if (c.r.squaredNorm() < rmin2) continue;
      if (!site_occupied(config.seed, c.index, config.abundance)) continue;
      NuclearSite s = make_site(bath.sites.size(), c.r, config.field_bz, phys);
      s.lattice = c.index;
      bath.sites.push_back(std::move(s));
      if (bath.sites.size() == config.n_spins) return bath;
    }
    if (config.r_max && radius >= *config.r_max)
      throw ConfigError("bath: only " + std::to_string(bath.sites.size()) +
                        " occupied sites within r_max, " + std::to_string(config.n_spins) +
                        " requested");
    radius *= 1.5;
    if (config.r_max) radius = std::min(radius, *config.r_max);
  }
}

std::vector<SpectralLine> spectral_weights(const Bath& bath) {
  std::vector<SpectralLine> out;
  out.reserve(bath.size());
  for (const auto& s : bath.sites) out.push_back({s.omega, flip_weight(s.r, bath.phys)});
  return out;
}

nlohmann::json bath_to_json(const Bath& bath) {
  using nlohmann::json;
  const auto& c = bath.config;
  json doc;
  doc["config"] = {{"seed", c.seed},
                   {"abundance", c.abundance},
                   {"n_spins", c.n_spins},
                   {"r_min_m", c.r_min},
                   {"r_max_m", c.r_max ? json(*c.r_max) : json(nullptr)},
                   {"field_bz_t", c.field_bz},
                   {"occupancy_generator", std::string(kOccupancyGenerator)}};
  json sites = json::array();
  for (const auto& s : bath.sites) {
    const auto& a = s.hyperfine;
    json rec = {{"index", s.index},
                {"position_nm", {units::m_to_nm(s.r.x()), units::m_to_nm(s.r.y()),
                                 units::m_to_nm(s.r.z())}},
                {"hyperfine_rad_s",
                 {{"xx", a(0, 0)}, {"xy", a(0, 1)}, {"xz", a(0, 2)},
                  {"yy", a(1, 1)}, {"yz", a(1, 2)}, {"zz", a(2, 2)}}},
                {"omega_rad_s", s.omega}};
    if (s.lattice) rec["lattice_quarter_a"] = *s.lattice;
    sites.push_back(std::move(rec));
  }
  doc["sites"] = std::move(sites);
  return doc;
}

Bath bath_from_json(const nlohmann::json& doc, const PhysConstants& phys) {
  Bath bath;
  bath.phys = phys;
  try {
    const auto& c = doc.at("config");
    bath.config.seed = c.at("seed").get<std::uint64_t>();
    bath.config.abundance = c.at("abundance").get<double>();
    bath.config.n_spins = c.at("n_spins").get<std::size_t>();
    bath.config.r_min = c.at("r_min_m").get<double>();
    if (c.contains("r_max_m") && !c.at("r_max_m").is_null())
      bath.config.r_max = c.at("r_max_m").get<double>();
    bath.config.field_bz = c.at("field_bz_t").get<double>();

    for (const auto& rec : doc.at("sites")) {
      NuclearSite s;
      s.index = rec.at("index").get<std::size_t>();
      if (rec.contains("lattice_quarter_a")) {
        s.lattice = rec.at("lattice_quarter_a").get<LatticeIndex>();
        s.r = lattice_position(*s.lattice, phys);
      } else {
        const auto p = rec.at("position_nm").get<std::array<double, 3>>();
        s.r = Vec3(units::nm_to_m(p[0]), units::nm_to_m(p[1]), units::nm_to_m(p[2]));
      }
      const auto& h = rec.at("hyperfine_rad_s");
      Tensor3& a = s.hyperfine;
      a(0, 0) = h.at("xx").get<double>();
      a(0, 1) = a(1, 0) = h.at("xy").get<double>();
      a(0, 2) = a(2, 0) = h.at("xz").get<double>();
      a(1, 1) = h.at("yy").get<double>();
      a(1, 2) = a(2, 1) = h.at("yz").get<double>();
      a(2, 2) = h.at("zz").get<double>();
      s.omega = rec.at("omega_rad_s").get<double>();
      bath.sites.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bath json: ") + e.what());
  }
  return bath;
}

}  // namespace nvzeno
