#include "hygnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hygnn {

namespace {

double tensor_sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

// Kernel weights along one axis for a centre at `centre` (cell units).
// Summation runs over the sorted weights, so mirrored inputs give bitwise
// mirrored results.
struct AxisKernel {
  std::size_t first = 0;
  std::vector<double> weights;  // normalised, for cells first, first+1, ...
};

AxisKernel axis_kernel(double centre, std::size_t cells, double sigma) {
  const double reach = 4.0 * sigma;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  AxisKernel k;
  bool started = false;
  for (std::size_t j = 0; j < cells; ++j) {
    const double d = (static_cast<double>(j) + 0.5) - centre;
    if (std::abs(d) > reach) {
      if (started) break;
      continue;
    }
    if (!started) {
      k.first = j;
      started = true;
    }
    k.weights.push_back(std::exp(-(d * d) * inv));
  }
  if (k.weights.empty()) return k;
  std::vector<double> sorted = k.weights;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double w : sorted) total += w;
  for (double& w : k.weights) w /= total;
  return k;
}

}  // namespace

double DensityMap::mass() const { return tensor_sum(grid); }
double LocalizationMap::mass() const { return tensor_sum(grid); }

Tensor gaussian_point_map(std::size_t grid_h, std::size_t grid_w,
                          std::span<const PointAnnotation> points, double sigma,
                          std::size_t stride) {
  if (!(sigma > 0.0)) throw std::invalid_argument("Gaussian sigma must be positive");
  if (grid_h == 0 || grid_w == 0 || stride == 0) throw ShapeError("empty ground-truth grid");
  std::vector<double> grid(grid_h * grid_w, 0.0);
  const double s = static_cast<double>(stride);
  for (const auto& p : points) {
    auto ky = axis_kernel(p.y / s, grid_h, sigma);
    auto kx = axis_kernel(p.x / s, grid_w, sigma);
    for (std::size_t a = 0; a < ky.weights.size(); ++a)
      for (std::size_t b = 0; b < kx.weights.size(); ++b)
        grid[(ky.first + a) * grid_w + kx.first + b] += ky.weights[a] * kx.weights[b];
  }
  return Tensor({1, grid_h, grid_w}, std::move(grid));
}

namespace {

void check_scene_grid(const Scene& scene) {
  if (scene.height() % kOutputStride || scene.width() % kOutputStride) {
    throw ShapeError("scene size must be divisible by 8");
  }
}

}  // namespace

DensityMap generate_density_gt(const Scene& scene, double sigma) {
  check_scene_grid(scene);
  return {gaussian_point_map(scene.height() / kOutputStride, scene.width() / kOutputStride,
                             scene.points, sigma)};
}

LocalizationMap generate_localization_gt(const Scene& scene, double sigma_loc) {
  check_scene_grid(scene);
  return {gaussian_point_map(scene.height() / kOutputStride, scene.width() / kOutputStride,
                             scene.points, sigma_loc)};
}

// ---------------------------------------------------------------------------
// Synthesis

Scene synth_scene(std::uint64_t seed, const SynthConfig& config) {
  const auto H = config.height, W = config.width;
  if (H == 0 || W == 0 || H % kOutputStride || W % kOutputStride) {
    throw std::invalid_argument("synthetic scene size must be a positive multiple of 8");
  }
  if (config.count_min > config.count_max) throw std::invalid_argument("empty count range");
  if (!(config.radius_min > 0.0) || config.radius_min > config.radius_max) {
    throw std::invalid_argument("invalid blob radius range");
  }
  if (config.margin < 0.0 || 2.0 * config.margin >= static_cast<double>(std::min(H, W))) {
    throw std::invalid_argument("margin leaves no room for blobs");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);

  std::vector<double> img(3 * H * W);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = 0.55 + 0.25 * unit(rng);
    const double fx = 0.05 + 0.25 * unit(rng), fy = 0.05 + 0.25 * unit(rng);
    const double px = 6.283185307179586 * unit(rng), py = 6.283185307179586 * unit(rng);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double tex = 0.08 * std::sin(fx * x + px) * std::cos(fy * y + py);
        img[(c * H + y) * W + x] = base + tex + noise(rng);
      }
  }

  std::uniform_int_distribution<std::size_t> count_dist(config.count_min, config.count_max);
  const auto count = count_dist(rng);
  Scene scene;
  const double lo_x = config.margin, hi_x = static_cast<double>(W) - config.margin;
  const double lo_y = config.margin, hi_y = static_cast<double>(H) - config.margin;
  for (std::size_t n = 0; n < count; ++n) {
    auto snap = [](double v) { return std::round(v * 64.0) / 64.0; };
    PointAnnotation p{snap(lo_x + (hi_x - lo_x) * unit(rng)), snap(lo_y + (hi_y - lo_y) * unit(rng))};
    p.x = std::clamp(p.x, std::max(lo_x, 1.0 / 64.0), hi_x - 1.0 / 64.0);
    p.y = std::clamp(p.y, std::max(lo_y, 1.0 / 64.0), hi_y - 1.0 / 64.0);
    scene.points.push_back(p);

    // Perspective: blobs lower in the frame are larger.
    const double depth = p.y / static_cast<double>(H);
    const double r = (config.radius_min + (config.radius_max - config.radius_min) * depth) *
                     (0.85 + 0.3 * unit(rng));
    const double rx = r, ry = 1.25 * r;
    const double darkness = 0.55 + 0.3 * unit(rng);
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(p.y - 3 * ry));
    const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(p.y + 3 * ry));
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(p.x - 3 * rx));
    const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(p.x + 3 * rx));
    for (auto y = std::max<std::ptrdiff_t>(0, y0); y < std::min<std::ptrdiff_t>(H, y1); ++y)
      for (auto x = std::max<std::ptrdiff_t>(0, x0); x < std::min<std::ptrdiff_t>(W, x1); ++x) {
        const double dx = (x + 0.5 - p.x) / rx, dy = (y + 0.5 - p.y) / ry;
        const double shade = 1.0 - darkness * std::exp(-1.5 * (dx * dx + dy * dy));
        for (std::size_t c = 0; c < 3; ++c) img[(c * H + y) * W + x] *= shade;
      }
  }
  for (auto& v : img) v = std::clamp(v, 0.0, 1.0);
  scene.image = Tensor({3, H, W}, std::move(img));
  return scene;
}

// ---------------------------------------------------------------------------
// Augmentation

Tensor flip_last_axis(const Tensor& t) {
  const auto W = t.shape().back();
  const auto rows = t.numel() / W;
  auto src = t.data();
  std::vector<double> out(src.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < W; ++c) out[r * W + c] = src[r * W + (W - 1 - c)];
  return Tensor(t.shape(), std::move(out));
}

namespace {

double mirror(double x, double width) {
  double m = width - x;
  // x == 0 would land on the excluded right edge.
  if (m >= width) m = std::nextafter(width, 0.0);
  return m;
}

Tensor crop_chw(const Tensor& t, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  const auto C = t.dim(0), H = t.dim(1), W = t.dim(2);
  if (top + h > H || left + w > W) throw ShapeError("crop window exceeds " + to_string(t.shape()));
  auto src = t.data();
  std::vector<double> out(C * h * w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(src.data() + (c * H + top + y) * W + left, w, out.data() + (c * h + y) * w);
  return Tensor({C, h, w}, std::move(out));
}

}  // namespace

Scene flip_horizontal(const Scene& scene) {
  Scene out;
  out.image = flip_last_axis(scene.image);
  const double W = static_cast<double>(scene.width());
  for (const auto& p : scene.points) out.points.push_back({mirror(p.x, W), p.y});
  return out;
}

Sample crop_sample(const Scene& scene, const DensityMap& density, const LocalizationMap& loc,
                   std::size_t top, std::size_t left, std::size_t crop, bool flip) {
  if (crop == 0 || crop % kOutputStride) throw std::invalid_argument("crop must be a positive multiple of 8");
  if (crop > std::min(scene.height(), scene.width())) {
    throw std::invalid_argument("crop " + std::to_string(crop) + " larger than scene");
  }
  if (top % kOutputStride || left % kOutputStride) {
    throw std::invalid_argument("crop offsets must be multiples of 8");
  }
  const auto cells = crop / kOutputStride;
  Sample s;
  s.scene.image = crop_chw(scene.image, top, left, crop, crop);
  s.density.grid = crop_chw(density.grid, top / kOutputStride, left / kOutputStride, cells, cells);
  s.localization.grid = crop_chw(loc.grid, top / kOutputStride, left / kOutputStride, cells, cells);
  for (const auto& p : scene.points) {
    const double x = p.x - static_cast<double>(left), y = p.y - static_cast<double>(top);
    if (x >= 0.0 && y >= 0.0 && x < static_cast<double>(crop) && y < static_cast<double>(crop)) {
      s.scene.points.push_back({x, y});
    }
  }
  if (flip) {
    s.scene = flip_horizontal(s.scene);
    s.density.grid = flip_last_axis(s.density.grid);
    s.localization.grid = flip_last_axis(s.localization.grid);
  }
  return s;
}

Sample augment(const Scene& scene, const DensityMap& density, const LocalizationMap& loc,
               std::size_t crop, std::uint64_t seed) {
  if (crop == 0 || crop % kOutputStride || crop > std::min(scene.height(), scene.width())) {
    throw std::invalid_argument("crop must be a multiple of 8 no larger than the scene");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> row(0, (scene.height() - crop) / kOutputStride);
  std::uniform_int_distribution<std::size_t> col(0, (scene.width() - crop) / kOutputStride);
  const auto top = row(rng) * kOutputStride;
  const auto left = col(rng) * kOutputStride;
  const bool flip = std::bernoulli_distribution(0.5)(rng);
  return crop_sample(scene, density, loc, top, left, crop, flip);
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

bool parse_size(std::string_view text, std::size_t& out) {
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    auto j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

void save_annotations(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + path.string());
  out << scene.height() << ' ' << scene.width() << ' ' << scene.points.size() << '\n';
  for (const auto& p : scene.points) out << format_double(p.x) << ' ' << format_double(p.y) << '\n';
  if (!out) throw DataError(DataError::Kind::io, "write failed for " + path.string());
}

AnnotationFile load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::io, "cannot read " + path.string());
  const auto where = path.string();

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(DataError::Kind::malformed_header, where + ": missing header");
  }
  auto head = split_spaces(line);
  AnnotationFile file;
  std::size_t count = 0;
  if (head.size() != 3 || !parse_size(head[0], file.height) || !parse_size(head[1], file.width) ||
      !parse_size(head[2], count) || file.height == 0 || file.width == 0) {
    throw DataError(DataError::Kind::malformed_header, where + ": header must be 'H W count'");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (file.points.size() == count) {
      throw DataError(DataError::Kind::count_mismatch,
                      where + ": more point lines than the header count " + std::to_string(count));
    }
    auto fields = split_spaces(line);
    PointAnnotation p;
    if (fields.size() != 2 || !parse_double(fields[0], p.x) || !parse_double(fields[1], p.y)) {
      throw DataError(DataError::Kind::malformed_point,
                      where + ":" + std::to_string(line_no) + ": expected 'x y'");
    }
    if (p.x < 0.0 || p.y < 0.0 || p.x >= static_cast<double>(file.width) ||
        p.y >= static_cast<double>(file.height)) {
      throw DataError(DataError::Kind::point_out_of_bounds,
                      where + ":" + std::to_string(line_no) + ": point outside the image");
    }
    file.points.push_back(p);
  }
  if (file.points.size() != count) {
    throw DataError(DataError::Kind::count_mismatch,
                    where + ": header count " + std::to_string(count) + " but " +
                        std::to_string(file.points.size()) + " points");
  }
  return file;
}

void save_scene(const Scene& scene, const std::filesystem::path& base) {
  auto txt = base;
  txt += ".txt";
  auto ppm = base;
  ppm += ".ppm";
  save_annotations(scene, txt);
  write_ppm(ppm, scene.image);
}

Scene load_scene(const std::filesystem::path& annotation_path) {
  auto ann = load_annotations(annotation_path);
  auto ppm = annotation_path;
  ppm.replace_extension(".ppm");
  Scene scene;
  scene.image = read_ppm(ppm);
  if (scene.height() != ann.height || scene.width() != ann.width) {
    throw DataError(DataError::Kind::bad_image,
                    ppm.string() + ": image size does not match its annotation header");
  }
  scene.points = std::move(ann.points);
  return scene;
}

std::vector<Scene> load_dataset(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw DataError(DataError::Kind::io, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scene> scenes;
  for (const auto& f : files) scenes.push_back(load_scene(f));
  return scenes;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::io, "cannot read " + path.string());
  const auto magic = ppm_token(in);
  std::size_t w = 0, h = 0, maxval = 0;
  if (magic != "P6" || !parse_size(ppm_token(in), w) || !parse_size(ppm_token(in), h) ||
      !parse_size(ppm_token(in), maxval) || w == 0 || h == 0 || maxval != 255) {
    throw DataError(DataError::Kind::bad_image, path.string() + ": expected binary P6 with maxval 255");
  }
  std::vector<unsigned char> raw(3 * w * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw DataError(DataError::Kind::bad_image, path.string() + ": truncated pixel data");
  }
  std::vector<double> img(raw.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img[(c * h + y) * w + x] = raw[(y * w + x) * 3 + c] / 255.0;
  return Tensor({3, h, w}, std::move(img));
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm expects [3,H,W]");
  const auto h = image.dim(1), w = image.dim(2);
  auto v = image.data();
  std::vector<unsigned char> raw(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double px = std::clamp(v[(c * h + y) * w + x], 0.0, 1.0);
        raw[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::lround(px * 255.0));
      }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError(DataError::Kind::io, "write failed for " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Tensor& map) {
  std::size_t h = 0, w = 0;
  if (map.rank() == 2) {
    h = map.dim(0);
    w = map.dim(1);
  } else if (map.rank() == 3 && map.dim(0) == 1) {
    h = map.dim(1);
    w = map.dim(2);
  } else {
    throw ShapeError("write_pgm expects [h,w] or [1,h,w], got " + to_string(map.shape()));
  }
  auto v = map.data();
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, x);
  std::vector<unsigned char> raw(h * w, 0);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = static_cast<unsigned char>(std::lround(std::clamp(v[i] / peak, 0.0, 1.0) * 255.0));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + path.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError(DataError::Kind::io, "write failed for " + path.string());
}

}  // namespace hygnn
