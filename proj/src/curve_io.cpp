#include "nvzeno/curve_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace nvzeno {

void write_curve_csv(std::ostream& os, const SurvivalCurve& curve, const HeaderLines& extra) {
  const auto& m = curve.meta;
  os << "# method: " << curve.method << '\n'
     << "# seed: " << m.seed << '\n'
     << "# n_spins: " << m.n_spins << '\n'
     << "# order: " << m.order << '\n'
     << fmt::format("# b_field_tesla: {:.17g}\n", m.b_field)
     << "# grid: " << m.grid << '\n'
     << "# divide_guard_count: " << m.guard_count << '\n';
  for (const auto& [k, v] : extra) os << "# " << k << ": " << v << '\n';
  os << "t_seconds,P\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    os << fmt::format("{:.17g},{:.17g}\n", curve.times[i], curve.values[i]);
}

void write_curve_csv(const std::filesystem::path& file, const SurvivalCurve& curve,
                     const HeaderLines& extra) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  write_curve_csv(out, curve, extra);
}

CurveFile read_curve_csv(std::istream& is) {
  CurveFile f;
  std::string line;
  bool columns = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      auto key = line.substr(1, colon - 1);
      auto value = line.substr(colon + 1);
      key.erase(0, key.find_first_not_of(' '));
      value.erase(0, value.find_first_not_of(' '));
      f.header[key] = value;
      continue;
    }
    if (!columns) {
      if (line != "t_seconds,P") throw std::runtime_error("curve csv: unexpected column header");
      columns = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("curve csv: malformed row");
    f.curve.times.push_back(std::stod(line.substr(0, comma)));
    f.curve.values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (!columns) throw std::runtime_error("curve csv: missing column header");
  auto get = [&](const char* k) { return f.header.count(k) ? f.header.at(k) : std::string{}; };
  f.curve.method = get("method");
  if (auto s = get("seed"); !s.empty()) f.curve.meta.seed = std::stoull(s);
  if (auto s = get("n_spins"); !s.empty()) f.curve.meta.n_spins = std::stoull(s);
  if (auto s = get("order"); !s.empty()) f.curve.meta.order = std::stoi(s);
  if (auto s = get("b_field_tesla"); !s.empty()) f.curve.meta.b_field = std::stod(s);
  f.curve.meta.grid = get("grid");
  if (auto s = get("divide_guard_count"); !s.empty()) f.curve.meta.guard_count = std::stoull(s);
  return f;
}

CurveFile read_curve_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return read_curve_csv(in);
}

}  // namespace nvzeno
