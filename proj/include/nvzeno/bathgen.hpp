#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvzeno/core.hpp"

namespace nvzeno {

struct BathConfig {
  std::uint64_t seed = 1;
  double abundance = 0.011;
  std::size_t n_spins = 100;
  double r_min = 0.5e-9;          // exclusion radius (m)
  std::optional<double> r_max{};  // optional outer radius (m)
  double field_bz = 0.102498;     // T

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Lattice position in units of a/4, crystal (cubic) frame.
using LatticeIndex = std::array<int, 3>;

struct LatticeSite {
  LatticeIndex index{};
  Vec3 r = Vec3::Zero();  // NV frame (z along [111]), metres
};

struct NuclearSite {
  std::size_t index = 0;
  Vec3 r = Vec3::Zero();
  Tensor3 hyperfine = Tensor3::Zero();  // rad/s
  double omega = 0.0;                   // shifted splitting (rad/s)
  std::optional<LatticeIndex> lattice{};
};

struct Bath {
  std::vector<NuclearSite> sites;
  BathConfig config{};
  PhysConstants phys{};

  [[nodiscard]] std::size_t size() const { return sites.size(); }
  /// Bath made of the first `n` sites (nearest to the NV).
  [[nodiscard]] Bath prefix(std::size_t n) const;
};

struct SpectralLine {
  double omega;   // rad/s
  double weight;  // (rad/s)^2
};

/// Name of the occupancy generator recorded in output metadata.
inline constexpr std::string_view kOccupancyGenerator =
    "splitmix64(seed ^ splitmix64(packed lattice index)), u = top53 / 2^53";

/// Refuse to enumerate more lattice sites than this.
inline constexpr std::size_t kDefaultLatticeCap = 4'000'000;

/// Diamond carbon sites within r_max of the vacancy, NV frame, excluding the
/// vacancy and nitrogen positions. Sorted by distance, ties broken by index.
std::vector<LatticeSite> enumerate_lattice_sites(double r_max,
                                                 const PhysConstants& phys = {},
                                                 std::size_t cap = kDefaultLatticeCap);

std::vector<Vec3> enumerate_lattice(double r_max, const PhysConstants& phys = {},
                                    std::size_t cap = kDefaultLatticeCap);

/// Counter-based Bernoulli draw; pure function of (seed, site).
bool site_occupied(std::uint64_t seed, const LatticeIndex& site, double abundance);

Bath sample_bath(const BathConfig& config, const PhysConstants& phys = {});

/// Builds a site record from a position: hyperfine tensor and shifted splitting.
NuclearSite make_site(std::size_t index, const Vec3& r, double field_bz,
                      const PhysConstants& phys);

/// -gamma_c B_z - A_zz(r): the nuclear splitting shifted by the hyperfine field.
double shifted_splitting(const Vec3& r, double field_bz, const PhysConstants& phys);

/// |<0,down|H_int|-1,up>|^2 for a dipolar-coupled site at r.
double flip_weight(const Vec3& r, const PhysConstants& phys);

/// Discrete spectral density as (omega_j, weight_j) in site order.
std::vector<SpectralLine> spectral_weights(const Bath& bath);

nlohmann::json bath_to_json(const Bath& bath);
Bath bath_from_json(const nlohmann::json& doc, const PhysConstants& phys = {});

}  // namespace nvzeno
