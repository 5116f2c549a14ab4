#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "pyrotime/errors.hpp"
#include "pyrotime/raster_ops.hpp"

namespace pyrotime::plot {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kBackgroundColor = {225, 225, 225};
constexpr Rgb kInk = {0, 0, 0};

// Viridis sampled at nine evenly spaced stops.
constexpr std::array<Rgb, 9> kViridis = {{{68, 1, 84},
                                          {71, 44, 122},
                                          {59, 81, 139},
                                          {44, 113, 142},
                                          {33, 144, 141},
                                          {39, 173, 129},
                                          {92, 200, 99},
                                          {170, 220, 50},
                                          {253, 231, 37}}};

constexpr Rgb kCategoryColors[4] = {{255, 255, 255}, {150, 150, 150}, {214, 64, 52}, {45, 105, 200}};

Rgb viridis(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * (kViridis.size() - 1);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(t), kViridis.size() - 2);
  const double f = t - static_cast<double>(k);
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(kViridis[k][c] + f * (kViridis[k + 1][c] - kViridis[k][c])));
  }
  return out;
}

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
const std::map<char, std::array<std::uint8_t, 5>>& font() {
  static const std::map<char, std::array<std::uint8_t, 5>> f = {
      {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}},
      {'3', {7, 1, 7, 1, 7}}, {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}},
      {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}}, {'8', {7, 5, 7, 5, 7}},
      {'9', {7, 5, 7, 1, 7}}, {'.', {0, 0, 0, 0, 2}}, {'-', {0, 0, 7, 0, 0}},
      {'h', {4, 4, 7, 5, 5}}, {'A', {2, 5, 7, 5, 5}}, {'B', {6, 5, 6, 5, 6}},
      {'C', {7, 4, 4, 4, 7}}, {' ', {0, 0, 0, 0, 0}}};
  return f;
}

void fill_rect(Image& img, int x0, int y0, int w, int h, Rgb c) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) img.set(x, y, c[0], c[1], c[2]);
}

void draw_text(Image& img, int x, int y, const std::string& text, int s, Rgb c = kInk) {
  for (char ch : text) {
    const auto it = font().find(ch);
    if (it != font().end()) {
      for (int row = 0; row < 5; ++row)
        for (int col = 0; col < 3; ++col)
          if (it->second[row] & (4 >> col)) fill_rect(img, x + col * s, y + row * s, s, s, c);
    }
    x += 4 * s;
  }
}

int text_width(const std::string& text, int s) { return static_cast<int>(text.size()) * 4 * s; }

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fh", v);
  return buf;
}

int auto_scale(int n) { return std::max(1, 384 / std::max(1, n)); }

}  // namespace

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t k = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[k] = r;
  rgb[k + 1] = g;
  rgb[k + 2] = b;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!os) throw DataError("cannot write " + path.string());
}

Kind parse_kind(const std::string& name) {
  if (name == "arrival") return Kind::arrival;
  if (name == "measurement") return Kind::measurement;
  if (name == "std" || name == "spread") return Kind::spread;
  if (name == "category") return Kind::category;
  throw std::invalid_argument("unknown plot kind '" + name + "'");
}

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::arrival:
      return "arrival";
    case Kind::measurement:
      return "measurement";
    case Kind::spread:
      return "std";
    case Kind::category:
      return "category";
  }
  return "?";
}

Kind infer_kind(const FarrHeader& h) {
  if (h.units == farr_units::kCategory) return Kind::category;
  if (h.units == farr_units::kNormalized) return Kind::measurement;
  return h.background ? Kind::arrival : Kind::spread;
}

Image render(const FarrRaster& raster, Kind kind, int scale) {
  const GridSpec& g = raster.header.spec;
  const int s = scale > 0 ? scale : auto_scale(std::max(g.nx, g.ny));
  const int map_w = g.nx * s, map_h = g.ny * s;
  const int font_s = 3, pad = 10;

  // Per-pixel value in hours, NaN for background.
  std::vector<double> hours(raster.values.size());
  double vmax = 0.0;
  for (std::size_t k = 0; k < hours.size(); ++k) {
    const double v = raster.values[k];
    double h = v;
    if (kind == Kind::measurement) h = v >= kBackgroundThreshold ? NAN : v * kDefaultHorizonHours;
    if (kind == Kind::arrival && raster.header.background && v >= *raster.header.background) h = NAN;
    if (!std::isfinite(h)) h = NAN;
    hours[k] = h;
    if (!std::isnan(h)) vmax = std::max(vmax, h);
  }
  if (vmax <= 0.0) vmax = 1.0;

  if (kind == Kind::category) {
    const char* names[3] = {"A", "B", "C"};
    const int box = 5 * font_s * 2;
    const int legend_w = box + pad + text_width("A", font_s);
    Image img(map_w + 3 * pad + legend_w, std::max(map_h, 3 * (box + pad)) + 2 * pad);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int code = static_cast<int>(raster.values[static_cast<std::size_t>(j) * g.nx + i]);
        if (code < 0 || code > 3) throw DataError("category raster holds code outside 0..3");
        fill_rect(img, pad + i * s, pad + j * s, s, s, kCategoryColors[code]);
      }
    for (int c = 0; c < 3; ++c) {
      const int y = pad + c * (box + pad);
      fill_rect(img, map_w + 2 * pad, y, box, box, kCategoryColors[c + 1]);
      draw_text(img, map_w + 3 * pad + box, y + (box - 5 * font_s) / 2, names[c], font_s);
    }
    return img;
  }

  const std::string top = label(vmax), mid = label(vmax / 2), bottom = label(0.0);
  const int bar_w = 16;
  const int labels_w = text_width(top.size() > bottom.size() ? top : bottom, font_s);
  Image img(map_w + 4 * pad + bar_w + labels_w, map_h + 2 * pad);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double h = hours[static_cast<std::size_t>(j) * g.nx + i];
      fill_rect(img, pad + i * s, pad + j * s, s, s, std::isnan(h) ? kBackgroundColor : viridis(h / vmax));
    }
  const int bx = map_w + 2 * pad;
  for (int y = 0; y < map_h; ++y) {
    const Rgb c = viridis(1.0 - static_cast<double>(y) / std::max(1, map_h - 1));
    fill_rect(img, bx, pad + y, bar_w, 1, c);
  }
  const int lx = bx + bar_w + pad;
  draw_text(img, lx, pad, top, font_s);
  draw_text(img, lx, pad + map_h / 2 - 5 * font_s / 2, mid, font_s);
  draw_text(img, lx, pad + map_h - 5 * font_s, bottom, font_s);
  return img;
}

}  // namespace pyrotime::plot
