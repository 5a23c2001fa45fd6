#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hotloc {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Wraps an angle in degrees into [0, 360).
inline double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  return r;
}

/// Wraps an angular difference into [-180, 180).
inline double wrap180(double deg) {
  double r = std::fmod(deg + 180.0, 360.0);
  if (r < 0.0) r += 360.0;
  return r - 180.0;
}

// Bearing from `site` to `target`, degrees anticlockwise from north (+y).
// Coincident points are degenerate; callers that care pass `degenerate`.
inline double bearing_from_north(Point site, Point target,
                                 bool* degenerate = nullptr) {
  const double dx = target.x - site.x;
  const double dy = target.y - site.y;
  if (dx == 0.0 && dy == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  // anticlockwise positive: west of the site is +90.
  return wrap360(std::atan2(-dx, dy) * 180.0 / M_PI);
}

// Rectangular raster over the deployment area. Pixel (i,j) has its center
// at origin + (i+0.5, j+0.5)*resolution, i along x, j along y.
struct PixelGrid {
  Point origin;
  int width = 0;
  int height = 0;
  double resolution = 0.0;

  void validate() const {
    if (resolution <= 0.0)
      throw std::invalid_argument("grid.resolution must be > 0");
    if (width < 1 || height < 1)
      throw std::invalid_argument("grid.width/height must be >= 1");
  }

  std::size_t n_pixels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * width + i;
  }

  Point center(int i, int j) const {
    return {origin.x + (i + 0.5) * resolution,
            origin.y + (j + 0.5) * resolution};
  }

  Point center(std::size_t idx) const {
    return center(static_cast<int>(idx % width), static_cast<int>(idx / width));
  }

  bool contains(Point p) const {
    return p.x >= origin.x && p.y >= origin.y &&
           p.x < origin.x + width * resolution &&
           p.y < origin.y + height * resolution;
  }

  // Pixel containing a point; caller guarantees contains(p).
  std::size_t pixel_of(Point p) const {
    int i = static_cast<int>((p.x - origin.x) / resolution);
    int j = static_cast<int>((p.y - origin.y) / resolution);
    if (i < 0) i = 0;
    if (j < 0) j = 0;
    if (i >= width) i = width - 1;
    if (j >= height) j = height - 1;
    return index(i, j);
  }

  double diagonal() const {
    return std::hypot(width * resolution, height * resolution);
  }

  bool operator==(const PixelGrid& o) const {
    return origin.x == o.origin.x && origin.y == o.origin.y &&
           width == o.width && height == o.height &&
           resolution == o.resolution;
  }
};

// Dense per-pixel raster sharing a PixelGrid's indexing.
template <typename T>
class Raster {
 public:
  Raster() = default;
  explicit Raster(const PixelGrid& grid, T fill = T{})
      : grid_(grid), data_(grid.n_pixels(), fill) {}

  const PixelGrid& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t idx) { return data_[idx]; }
  const T& operator[](std::size_t idx) const { return data_[idx]; }
  T& at(int i, int j) { return data_[grid_.index(i, j)]; }
  const T& at(int i, int j) const { return data_[grid_.index(i, j)]; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  PixelGrid grid_;
  std::vector<T> data_;
};

}  // namespace hotloc
