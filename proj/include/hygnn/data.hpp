#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hygnn/tensor.hpp"

namespace hygnn {

/// Output grid stride of the model relative to input pixels.
inline constexpr std::size_t kOutputStride = 8;

/// Head-center annotation in pixel coordinates, origin top-left.
struct PointAnnotation {
  double x = 0.0;
  double y = 0.0;
};

struct Scene {
  Tensor image;  // [3,H,W], values in [0,1]
  std::vector<PointAnnotation> points;

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
  std::size_t count() const { return points.size(); }
};

/// Person-mass per output cell; the grid sums to the count.
struct DensityMap {
  Tensor grid;  // [1,H/8,W/8]
  double mass() const;
};

/// Peaked heat map of head centers on the output grid.
struct LocalizationMap {
  Tensor grid;  // [1,H/8,W/8]
  double mass() const;
};

class DataError : public std::runtime_error {
 public:
  enum class Kind { io, malformed_header, count_mismatch, point_out_of_bounds, malformed_point, bad_image };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Sum of per-point Gaussians on a grid_h x grid_w grid. A point at pixel
/// (x, y) is centred at (x/stride, y/stride) in cell units, with cell (i, j)
/// sampled at its centre (j + 0.5, i + 0.5). Each kernel is truncated to
/// cells within 4 sigma per axis and normalised over the cells that fall on
/// the grid, so every point deposits unit mass.
Tensor gaussian_point_map(std::size_t grid_h, std::size_t grid_w,
                          std::span<const PointAnnotation> points, double sigma,
                          std::size_t stride = kOutputStride);

DensityMap generate_density_gt(const Scene& scene, double sigma = 4.0);
LocalizationMap generate_localization_gt(const Scene& scene, double sigma_loc = 1.0);

struct SynthConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t count_min = 10;
  std::size_t count_max = 30;
  double radius_min = 1.5;
  double radius_max = 3.5;
  /// Blob centres keep at least this many pixels from every border.
  double margin = 2.0;
};

/// Dark elliptical blobs on a textured background. Blob radius grows with
/// the vertical position to imitate perspective. Centres are snapped to a
/// 1/64 pixel grid so mirrored coordinates stay exact.
Scene synth_scene(std::uint64_t seed, const SynthConfig& config = {});

/// Mirror about the vertical axis: column c -> W-1-c, point x -> W-x.
Scene flip_horizontal(const Scene& scene);
/// Reverses the last axis of a [..., W] tensor.
Tensor flip_last_axis(const Tensor& t);

struct Sample {
  Scene scene;
  DensityMap density;
  LocalizationMap localization;
};

/// Deterministic crop at pixel offset (top, left), both multiples of 8, with
/// an optional horizontal flip applied to image, points and both maps.
Sample crop_sample(const Scene& scene, const DensityMap& density, const LocalizationMap& loc,
                   std::size_t top, std::size_t left, std::size_t crop, bool flip);

/// Random 8-aligned square crop plus a horizontal flip with probability 0.5.
Sample augment(const Scene& scene, const DensityMap& density, const LocalizationMap& loc,
               std::size_t crop, std::uint64_t seed);

struct AnnotationFile {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<PointAnnotation> points;
};

/// Text format: "H W count" then count lines "x y".
void save_annotations(const Scene& scene, const std::filesystem::path& path);
AnnotationFile load_annotations(const std::filesystem::path& path);

/// Writes <base>.txt and <base>.ppm.
void save_scene(const Scene& scene, const std::filesystem::path& base);
/// Reads an annotation file and the PPM next to it with the same stem.
Scene load_scene(const std::filesystem::path& annotation_path);
/// All scenes of a directory, ordered by file name.
std::vector<Scene> load_dataset(const std::filesystem::path& dir);

/// Binary PPM (P6, maxval 255) as a [3,H,W] tensor in [0,1].
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
/// Binary PGM (P5) of an [h,w] or [1,h,w] map, scaled so the maximum maps to 255.
/// Negative values clamp to 0; an all-zero map stays zero.
void write_pgm(const std::filesystem::path& path, const Tensor& map);

}  // namespace hygnn
