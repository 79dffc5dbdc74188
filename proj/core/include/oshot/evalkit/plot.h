#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace oshot::eval {

using Rgb = std::array<float, 3>;

// NaN y values are drawn as gaps.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0.1f, 0.3f, 0.8f};
};

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per category
  Rgb color{0.1f, 0.3f, 0.8f};
};

// Small raster PNG charts with a built-in pixel font.
void line_plot(const std::filesystem::path& path, const std::string& title,
               const std::string& x_label, const std::string& y_label,
               const std::vector<Series>& series);
void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& categories,
               const std::vector<BarGroup>& groups);

Rgb palette(std::size_t i);

}  // namespace oshot::eval
