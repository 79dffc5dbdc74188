#include "oshot/evalkit/plot.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include "oshot/synthgen/dataset_io.h"

namespace oshot::eval {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kScale = 2;  // font pixel size

// 3x5 glyphs, rows top to bottom.
const std::unordered_map<char, const char*>& glyphs() {
  static const std::unordered_map<char, const char*> g{
      {'0', "111101101101111"}, {'1', "010110010010111"}, {'2', "111001111100111"},
      {'3', "111001111001111"}, {'4', "101101111001001"}, {'5', "111100111001111"},
      {'6', "111100111101111"}, {'7', "111001001001001"}, {'8', "111101111101111"},
      {'9', "111101111001111"}, {'A', "010101111101101"}, {'B', "110101110101110"},
      {'C', "011100100100011"}, {'D', "110101101101110"}, {'E', "111100110100111"},
      {'F', "111100110100100"}, {'G', "011100101101011"}, {'H', "101101111101101"},
      {'I', "111010010010111"}, {'J', "001001001101010"}, {'K', "101101110101101"},
      {'L', "100100100100111"}, {'M', "101111111101101"}, {'N', "110101101101101"},
      {'O', "010101101101010"}, {'P', "110101110100100"}, {'Q', "010101101110011"},
      {'R', "110101110101101"}, {'S', "011100010001110"}, {'T', "111010010010010"},
      {'U', "101101101101111"}, {'V', "101101101101010"}, {'W', "101101111111101"},
      {'X', "101101010101101"}, {'Y', "101101010010010"}, {'Z', "111001010100111"},
      {'.', "000000000000010"}, {'-', "000000111000000"}, {'=', "000111000111000"},
      {':', "000010000010000"}, {'(', "010100100100010"}, {')', "010001001001010"},
      {'/', "001001010100100"}, {'%', "101001010100101"}, {'_', "000000000000111"},
      {'+', "000010111010000"}, {',', "000000000010100"}};
  return g;
}

class Canvas {
 public:
  Canvas() : img_(kWidth, kHeight, 1.0f) {}

  void pixel(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img_.width() || y >= img_.height()) return;
    for (int k = 0; k < 3; ++k) img_.at(x, y, k) = c[static_cast<std::size_t>(k)];
  }
  void rect(int x0, int y0, int x1, int y1, const Rgb& c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) pixel(x, y, c);
  }
  void line(int x0, int y0, int x1, int y1, const Rgb& c, int thick = 1) {
    const int n = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
    for (int i = 0; i <= n; ++i) {
      const int x = x0 + static_cast<int>(std::lround(static_cast<double>(x1 - x0) * i / n));
      const int y = y0 + static_cast<int>(std::lround(static_cast<double>(y1 - y0) * i / n));
      rect(x - thick / 2, y - thick / 2, x + (thick - 1) / 2, y + (thick - 1) / 2, c);
    }
  }
  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 4 * kScale; }
  void text(int x, int y, const std::string& s, const Rgb& c = {0, 0, 0}) {
    for (char ch : s) {
      auto it = glyphs().find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
      if (it != glyphs().end()) {
        for (int r = 0; r < 5; ++r)
          for (int col = 0; col < 3; ++col)
            if (it->second[r * 3 + col] == '1')
              rect(x + col * kScale, y + r * kScale, x + col * kScale + kScale - 1,
                   y + r * kScale + kScale - 1, c);
      }
      x += 4 * kScale;
    }
  }
  void save(const std::filesystem::path& p) {
    for (auto& v : img_.pixels()) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
    synth::write_png(p, img_);
  }

 private:
  synth::Image img_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, std::fabs(v) >= 10 ? "%.0f" : "%.2f", v);
  return buf;
}

struct Frame {
  int left = 70, right = kWidth - 20, top = 40, bottom = kHeight - 60;
};

void axes(Canvas& cv, const Frame& f, const std::string& title, const std::string& x_label,
          const std::string& y_label, double y0, double y1) {
  const Rgb grey{0.85f, 0.85f, 0.85f};
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    const int y = f.bottom - (f.bottom - f.top) * i / 4;
    cv.line(f.left, y, f.right, y, grey);
    const auto s = fmt(v);
    cv.text(f.left - 8 - Canvas::text_width(s), y - 5, s);
  }
  cv.line(f.left, f.top, f.left, f.bottom, {0, 0, 0});
  cv.line(f.left, f.bottom, f.right, f.bottom, {0, 0, 0});
  cv.text((kWidth - Canvas::text_width(title)) / 2, 12, title);
  cv.text((f.left + f.right - Canvas::text_width(x_label)) / 2, kHeight - 22, x_label);
  cv.text(6, f.top - 20, y_label);
}

std::pair<double, double> y_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (lo >= 0.0 && hi <= 1.0) return {0.0, 1.0};
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi + 0.05 * (hi - lo)};
}

}  // namespace

Rgb palette(std::size_t i) {
  static const Rgb colors[] = {{0.12f, 0.47f, 0.71f}, {1.0f, 0.5f, 0.05f},  {0.17f, 0.63f, 0.17f},
                               {0.84f, 0.15f, 0.16f}, {0.58f, 0.4f, 0.74f}, {0.55f, 0.34f, 0.29f},
                               {0.89f, 0.47f, 0.76f}, {0.5f, 0.5f, 0.5f}};
  return colors[i % std::size(colors)];
}

void line_plot(const std::filesystem::path& path, const std::string& title,
               const std::string& x_label, const std::string& y_label,
               const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double lo = x0, hi = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      if (std::isfinite(s.y[i])) {
        lo = std::min(lo, s.y[i]);
        hi = std::max(hi, s.y[i]);
      }
    }
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
  if (x1 <= x0) x1 = x0 + 1.0;
  const auto [y0, y1] = y_range(lo, hi);
  Canvas cv;
  Frame f;
  axes(cv, f, title, x_label, y_label, y0, y1);
  auto px = [&](double x) { return f.left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (f.right - f.left))); };
  auto py = [&](double y) { return f.bottom - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (f.bottom - f.top))); };
  std::vector<double> ticks;
  for (const auto& s : series) ticks.insert(ticks.end(), s.x.begin(), s.x.end());
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  int last_label_end = -1000;
  for (double t : ticks) {
    const int x = px(t);
    cv.line(x, f.bottom, x, f.bottom + 4, {0, 0, 0});
    const auto s = fmt(t);
    const int start = x - Canvas::text_width(s) / 2;
    if (start > last_label_end + 4) {
      cv.text(start, f.bottom + 8, s);
      last_label_end = start + Canvas::text_width(s);
    }
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (i + 1 < s.x.size() && std::isfinite(s.y[i + 1])) {
        cv.line(px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), s.color, 2);
      }
      cv.rect(px(s.x[i]) - 3, py(s.y[i]) - 3, px(s.x[i]) + 3, py(s.y[i]) + 3, s.color);
    }
    const int ly = f.top + 6 + static_cast<int>(k) * 16;
    cv.rect(f.right - 150, ly, f.right - 140, ly + 9, s.color);
    cv.text(f.right - 134, ly, s.label);
  }
  cv.save(path);
}

void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& categories,
               const std::vector<BarGroup>& groups) {
  double lo = 0.0, hi = 0.0;
  for (const auto& g : groups)
    for (double v : g.values)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  const auto [y0, y1] = y_range(lo, hi);
  Canvas cv;
  Frame f;
  axes(cv, f, title, "", y_label, y0, y1);
  const int n_cat = std::max<int>(1, static_cast<int>(categories.size()));
  const int slot = (f.right - f.left) / n_cat;
  const int n_grp = std::max<int>(1, static_cast<int>(groups.size()));
  const int bar = std::max(2, (slot - 12) / n_grp);
  auto py = [&](double y) { return f.bottom - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (f.bottom - f.top))); };
  for (int c = 0; c < n_cat; ++c) {
    const int x_start = f.left + c * slot + 6;
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      const auto& values = groups[static_cast<std::size_t>(g)].values;
      if (static_cast<std::size_t>(c) >= values.size() || !std::isfinite(values[static_cast<std::size_t>(c)])) continue;
      const int x = x_start + g * bar;
      cv.rect(x, py(values[static_cast<std::size_t>(c)]), x + bar - 2, py(0.0),
              groups[static_cast<std::size_t>(g)].color);
    }
    if (static_cast<std::size_t>(c) < categories.size()) {
      const auto& s = categories[static_cast<std::size_t>(c)];
      cv.text(f.left + c * slot + (slot - Canvas::text_width(s)) / 2, f.bottom + 8, s);
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int ly = f.top + 6 + static_cast<int>(g) * 16;
    cv.rect(f.right - 190, ly, f.right - 180, ly + 9, groups[g].color);
    cv.text(f.right - 174, ly, groups[g].label);
  }
  cv.save(path);
}

}  // namespace oshot::eval
