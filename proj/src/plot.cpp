#include "genret/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "genret/text.hpp"

namespace genret {

namespace {

struct Series {
  std::vector<std::pair<double, double>> points;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string render(const std::string& study, const std::map<std::string, Series>& series, const PlotOptions& o) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto ty = [&o](double y) { return o.log_y ? std::log10(std::max(y, 1e-12)) : y; };
  for (const auto& [_, s] : series) {
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, ty(y)), ymax = std::max(ymax, ty(y));
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double left = 70, right = 170, top = 30, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o.width) + "\" height=\"" +
                    std::to_string(o.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt(left) + "\" y=\"18\" font-size=\"13\">" + study + ": " + o.metric + " vs step</text>\n";
  svg += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double yv = o.log_y ? std::pow(10.0, fy) : fy;
    svg += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(top + ph + 16) + "\" text-anchor=\"middle\">" +
           tick_label(fx) + "</text>\n";
    const double yy = top + ph - (fy - ymin) / (ymax - ymin) * ph;
    svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(yy + 4) + "\" text-anchor=\"end\">" + tick_label(yv) +
           "</text>\n";
  }
  svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(o.height - 10.0) + "\" text-anchor=\"middle\">step</text>\n";
  std::size_t i = 0;
  for (const auto& [name, s] : series) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (auto [x, y] : s.points) pts += fmt(px(x)) + "," + fmt(py(y)) + " ";
    if (!pts.empty()) pts.pop_back();
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    const double ly = top + 12 + 16.0 * static_cast<double>(i);
    svg += "<line x1=\"" + fmt(left + pw + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(left + pw + 30) +
           "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt(left + pw + 34) + "\" y=\"" + fmt(ly) + "\">" + name + "</text>\n";
    ++i;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::map<std::string, std::string> plot_curves(const std::vector<std::string>& csv_texts, const PlotOptions& opts) {
  if (opts.metric != "ppl" && opts.metric != "loss") {
    throw ValidationError("plot metric must be 'ppl' or 'loss', got '" + opts.metric + "'");
  }
  std::map<std::string, std::map<std::string, Series>> studies;
  std::size_t rows = 0;
  for (const auto& text : csv_texts) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("plot: empty CSV");
    const auto header = split_csv_line(line);
    auto col = [&header](const char* name) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw ValidationError(std::string("plot: CSV is missing column '") + name + "'");
      return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_cell = col("cell_id"), c_study = col("study"), c_step = col("step");
    const std::size_t c_metric = col(opts.metric.c_str());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != header.size()) throw ValidationError("plot: row has wrong column count: '" + line + "'");
      try {
        studies[f[c_study]][f[c_cell]].points.emplace_back(std::stod(f[c_step]), std::stod(f[c_metric]));
      } catch (const std::logic_error&) {
        throw ValidationError("plot: non-numeric value in row '" + line + "'");
      }
      ++rows;
    }
  }
  if (rows == 0) throw ValidationError("plot: no data rows");
  std::map<std::string, std::string> out;
  for (auto& [study, series] : studies) {
    for (auto& [_, s] : series) std::sort(s.points.begin(), s.points.end());
    out[study] = render(study, series, opts);
  }
  return out;
}

std::vector<std::filesystem::path> plot_files(const std::vector<std::filesystem::path>& csv_paths,
                                              const std::filesystem::path& out_dir, const PlotOptions& opts) {
  std::vector<std::string> texts;
  for (const auto& p : csv_paths) texts.push_back(read_file(p));
  const auto svgs = plot_curves(texts, opts);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [study, svg] : svgs) {
    const auto path = out_dir / (study + "_" + opts.metric + ".svg");
    write_file_atomic(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace genret
