#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fdgan/common.hpp"
#include "fdgan/pose.hpp"
#include "fdgan/shape.hpp"

namespace fdgan::img {

/// RGB image, CHW layout, values in [-1,1].
template <typename S>
struct Image {
  ArrayX<S> data;  // 3*h*w
  Index height = 0;
  Index width = 0;

  Image() = default;
  Image(Index h, Index w) : data(ArrayX<S>::Zero(3 * h * w)), height(h), width(w) {}

  S& at(int c, Index y, Index x) {
    return data[(static_cast<Index>(c) * height + y) * width + x];
  }
  S at(int c, Index y, Index x) const {
    return data[(static_cast<Index>(c) * height + y) * width + x];
  }

  void fill(S r, S g, S b) {
    data.segment(0, height * width).setConstant(r);
    data.segment(height * width, height * width).setConstant(g);
    data.segment(2 * height * width, height * width).setConstant(b);
  }
};

struct Rgb {
  double r = 0, g = 0, b = 0;
};

/// Thick line segment (capsule of radius `radius`).
template <typename S>
void draw_segment(Image<S>& im, double x0, double y0, double x1, double y1,
                  double radius, Rgb color) {
  const double minx = std::min(x0, x1) - radius, maxx = std::max(x0, x1) + radius;
  const double miny = std::min(y0, y1) - radius, maxy = std::max(y0, y1) + radius;
  const Index ax = std::max<Index>(0, static_cast<Index>(std::floor(minx)));
  const Index bx = std::min<Index>(im.width - 1, static_cast<Index>(std::ceil(maxx)));
  const Index ay = std::max<Index>(0, static_cast<Index>(std::floor(miny)));
  const Index by = std::min<Index>(im.height - 1, static_cast<Index>(std::ceil(maxy)));
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (Index y = ay; y <= by; ++y) {
    for (Index x = ax; x <= bx; ++x) {
      const double px = static_cast<double>(x) - x0;
      const double py = static_cast<double>(y) - y0;
      double t = len2 > 0 ? (px * dx + py * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double qx = px - t * dx, qy = py - t * dy;
      if (qx * qx + qy * qy <= radius * radius) {
        im.at(0, y, x) = static_cast<S>(color.r);
        im.at(1, y, x) = static_cast<S>(color.g);
        im.at(2, y, x) = static_cast<S>(color.b);
      }
    }
  }
}

template <typename S>
void draw_disc(Image<S>& im, double cx, double cy, double radius, Rgb color) {
  draw_segment(im, cx, cy, cx, cy, radius, color);
}

// ---------------------------------------------------------------------------
// binary PPM (P6), 8-bit

inline std::uint8_t to_byte(double v) {
  const double t = (v + 1.0) * 0.5;  // [-1,1] -> [0,1]
  return static_cast<std::uint8_t>(std::clamp(std::lround(t * 255.0), 0L, 255L));
}

template <typename S>
void write_ppm(const std::string& path, const Image<S>& im) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write image: " + path);
  out << "P6\n" << im.width << ' ' << im.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(im.width) * 3);
  for (Index y = 0; y < im.height; ++y) {
    for (Index x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x * 3 + c)] =
            to_byte(static_cast<double>(im.at(c, y, x)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

template <typename S>
Image<S> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open image: " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    while (true) {
      int c = in.get();
      if (c == EOF) throw config_error("truncated PPM header: " + path);
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
  };
  if (next_token() != "P6")
    throw config_error("unsupported image format (expected binary PPM P6): " +
                       path + " — convert with e.g. `mogrify -format ppm`");
  const Index w = std::stol(next_token());
  const Index h = std::stol(next_token());
  const long maxval = std::stol(next_token());
  if (maxval != 255) throw config_error("unsupported PPM maxval in " + path);
  Image<S> im(h, w);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(3 * h * w));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw config_error("truncated PPM payload: " + path);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        im.at(c, y, x) = static_cast<S>(
            buf[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0 * 2.0 -
            1.0);
  return im;
}

template <typename S>
Image<S> resize_bilinear(const Image<S>& src, Index h, Index w) {
  if (src.height == h && src.width == w) return src;
  Image<S> out(h, w);
  const double sy = static_cast<double>(src.height) / static_cast<double>(h);
  const double sx = static_cast<double>(src.width) / static_cast<double>(w);
  for (Index y = 0; y < h; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    const Index y0 = std::clamp<Index>(static_cast<Index>(std::floor(fy)), 0,
                                       src.height - 1);
    const Index y1 = std::min<Index>(y0 + 1, src.height - 1);
    const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
    for (Index x = 0; x < w; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      const Index x0 = std::clamp<Index>(static_cast<Index>(std::floor(fx)), 0,
                                         src.width - 1);
      const Index x1 = std::min<Index>(x0 + 1, src.width - 1);
      const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double v =
            (1 - wy) * ((1 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1)) +
            wy * ((1 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1));
        out.at(c, y, x) = static_cast<S>(v);
      }
    }
  }
  return out;
}

/// Sketch of a pose: limbs as light segments, joints as dots, dark canvas.
template <typename S>
Image<S> render_skeleton_panel(const pose::PoseLandmarks& lm, Index h, Index w) {
  Image<S> im(h, w);
  im.fill(S(-0.85), S(-0.85), S(-0.8));
  pose::PoseLandmarks scaled =
      (lm.frame_height == h && lm.frame_width == w) ? lm : lm.rescaled(h, w);
  const double r = std::max(1.0, static_cast<double>(w) / 40.0);
  for (auto [a, b] : pose::skeleton_edges()) {
    const auto& pa = scaled.points[static_cast<std::size_t>(a)];
    const auto& pb = scaled.points[static_cast<std::size_t>(b)];
    if (!pa.visible || !pb.visible) continue;
    draw_segment(im, pa.x, pa.y, pb.x, pb.y, r * 0.7, Rgb{0.7, 0.7, 0.2});
  }
  for (const auto& p : scaled.points)
    if (p.visible) draw_disc(im, p.x, p.y, r, Rgb{1.0, 0.3, 0.3});
  return im;
}

/// Horizontal strip of equally sized panels with a 2px separator.
template <typename S>
Image<S> compose_grid_row(const std::vector<Image<S>>& panels) {
  require(!panels.empty(), "compose_grid_row: no panels");
  const Index h = panels[0].height, w = panels[0].width;
  const Index sep = 2;
  Image<S> row(h, static_cast<Index>(panels.size()) * (w + sep) - sep);
  row.fill(S(1), S(1), S(1));
  Index x0 = 0;
  for (const auto& p : panels) {
    require(p.height == h && p.width == w, "compose_grid_row: size mismatch");
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) row.at(c, y, x0 + x) = p.at(c, y, x);
    x0 += w + sep;
  }
  return row;
}

/// Vertical stack of equally wide rows with a 2px separator.
template <typename S>
Image<S> compose_grid(const std::vector<Image<S>>& rows) {
  require(!rows.empty(), "compose_grid: no rows");
  const Index w = rows[0].width, sep = 2;
  Index total_h = 0;
  for (const auto& r : rows) total_h += r.height + sep;
  total_h -= sep;
  Image<S> out(total_h, w);
  out.fill(S(1), S(1), S(1));
  Index y0 = 0;
  for (const auto& r : rows) {
    require(r.width == w, "compose_grid: width mismatch");
    for (Index y = 0; y < r.height; ++y)
      for (Index x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out.at(c, y0 + y, x) = r.at(c, y, x);
    y0 += r.height + sep;
  }
  return out;
}

}  // namespace fdgan::img
