#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nvzeno/dynamics.hpp"

namespace nvzeno {

using HeaderLines = std::vector<std::pair<std::string, std::string>>;

/// `# key: value` metadata lines, then `t_seconds,P` rows at 17 significant digits.
void write_curve_csv(std::ostream& os, const SurvivalCurve& curve, const HeaderLines& extra = {});
void write_curve_csv(const std::filesystem::path& file, const SurvivalCurve& curve,
                     const HeaderLines& extra = {});

struct CurveFile {
  SurvivalCurve curve;
  std::map<std::string, std::string> header;
};

/// Parses what write_curve_csv produces; throws std::runtime_error on malformed input.
CurveFile read_curve_csv(std::istream& is);
CurveFile read_curve_csv(const std::filesystem::path& file);

}  // namespace nvzeno
