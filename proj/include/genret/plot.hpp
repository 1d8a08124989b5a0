#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace genret {

struct PlotOptions {
  std::string metric = "ppl";  // or "loss"
  int width = 640;
  int height = 400;
  bool log_y = false;
};

/// Curve CSVs (harness schema) to SVG line charts, one per study, one line
/// per cell. Throws ValidationError naming a missing column, or when no data
/// rows are present.
std::map<std::string, std::string> plot_curves(const std::vector<std::string>& csv_texts, const PlotOptions& opts);

/// Writes <out_dir>/<study>_<metric>.svg for each study; returns the paths.
std::vector<std::filesystem::path> plot_files(const std::vector<std::filesystem::path>& csv_paths,
                                              const std::filesystem::path& out_dir, const PlotOptions& opts);

}  // namespace genret
