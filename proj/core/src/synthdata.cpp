#include "pdgan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pdgan/io.hpp"

namespace pdgan {

using nlohmann::json;

std::string to_string(SpoofClass c) {
  switch (c) {
    case SpoofClass::kNone: return "none";
    case SpoofClass::kPrint: return "print";
    case SpoofClass::kScreen: return "screen";
    case SpoofClass::kMask: return "mask";
  }
  throw std::logic_error("bad spoof class");
}

SpoofClass spoof_class_from_string(const std::string& s) {
  if (s == "none") return SpoofClass::kNone;
  if (s == "print") return SpoofClass::kPrint;
  if (s == "screen") return SpoofClass::kScreen;
  if (s == "mask") return SpoofClass::kMask;
  throw std::invalid_argument("unknown spoof class: " + s);
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct FaceScene {
  double cx, cy;        // ellipse center, pixel units
  double ax, ay;        // semi-axes, pixel units
  double depth_peak;    // max depth at the face center
  double nose_x, nose_y, nose_amp, nose_sigma;
  double tone[3];       // base skin tone
  double bg[3];         // background color
  double light_x, light_y, light_gain;
};

FaceScene sample_scene(Rng& rng, int size) {
  FaceScene s;
  const double sz = static_cast<double>(size);
  s.cx = sz * rng.uniform(0.42, 0.58);
  s.cy = sz * rng.uniform(0.44, 0.56);
  s.ax = sz * rng.uniform(0.28, 0.38);
  s.ay = sz * rng.uniform(0.34, 0.46);
  s.depth_peak = rng.uniform(0.70, 0.88);
  s.nose_x = s.cx + s.ax * rng.uniform(-0.08, 0.08);
  s.nose_y = s.cy + s.ay * rng.uniform(0.00, 0.15);
  s.nose_amp = rng.uniform(0.06, 0.10);
  s.nose_sigma = sz * rng.uniform(0.06, 0.10);
  double base = rng.uniform(0.55, 0.85);
  s.tone[0] = std::clamp(base + rng.uniform(0.00, 0.10), 0.0, 1.0);
  s.tone[1] = std::clamp(base * rng.uniform(0.72, 0.85), 0.0, 1.0);
  s.tone[2] = std::clamp(base * rng.uniform(0.55, 0.72), 0.0, 1.0);
  for (double& b : s.bg) b = rng.uniform(0.05, 0.22);
  double ang = rng.uniform(0.0, 2.0 * kPi);
  s.light_x = std::cos(ang);
  s.light_y = std::sin(ang);
  s.light_gain = rng.uniform(0.05, 0.12);
  return s;
}

// Ellipsoidal head height field with a nose bump; zero outside the face.
double scene_depth(const FaceScene& s, double x, double y) {
  double u = (x - s.cx) / s.ax;
  double v = (y - s.cy) / s.ay;
  double r2 = u * u + v * v;
  if (r2 >= 1.0) return 0.0;
  double d = s.depth_peak * std::sqrt(1.0 - r2);
  double dx = (x - s.nose_x) / s.nose_sigma;
  double dy = (y - s.nose_y) / s.nose_sigma;
  d += s.nose_amp * std::exp(-0.5 * (dx * dx + dy * dy));
  return std::clamp(d, 0.0, 1.0);
}

void render_live(const FaceScene& s, int size, std::vector<double>& rgb,
                 std::vector<double>& depth) {
  const int hw = size * size;
  depth.assign(hw, 0.0);
  rgb.assign(3 * static_cast<size_t>(hw), 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double d = scene_depth(s, x, y);
      depth[y * size + x] = d;
      double r, g, b;
      if (d > 0.0) {
        // shade by height plus a directional term from the local gradient
        double gx = scene_depth(s, x + 1.0, y) - scene_depth(s, x - 1.0, y);
        double gy = scene_depth(s, x, y + 1.0) - scene_depth(s, x, y - 1.0);
        double shade = 0.30 + 0.70 * d +
                       s.light_gain * size * 0.5 * (gx * s.light_x + gy * s.light_y);
        shade = std::clamp(shade, 0.0, 1.2);
        r = s.tone[0] * shade;
        g = s.tone[1] * shade;
        b = s.tone[2] * shade;
      } else {
        r = s.bg[0];
        g = s.bg[1];
        b = s.bg[2];
      }
      rgb[0 * hw + y * size + x] = std::clamp(r, 0.0, 1.0);
      rgb[1 * hw + y * size + x] = std::clamp(g, 0.0, 1.0);
      rgb[2 * hw + y * size + x] = std::clamp(b, 0.0, 1.0);
    }
  }
}

// Class-specific flattening artifacts layered onto a live rendering.
void apply_print_artifacts(Rng& rng, int size, std::vector<double>& rgb) {
  const int hw = size * size;
  const int border = std::max(1, static_cast<int>(std::lround(size * rng.uniform(0.06, 0.12))));
  const double paper = rng.uniform(0.85, 0.95);
  const int dot_period = 3 + static_cast<int>(rng.below(3));
  const double dot_strength = rng.uniform(0.12, 0.20);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int i = y * size + x;
      bool in_border = x < border || y < border || x >= size - border || y >= size - border;
      double dot = (x % dot_period == 0 || y % dot_period == 0) ? dot_strength : 0.0;
      for (int c = 0; c < 3; ++c) {
        double v = rgb[c * hw + i];
        if (in_border) v = paper;
        // ink-spread wash toward the paper tone plus the halftone grid
        v = 0.70 * v + 0.30 * paper;
        v -= dot;
        rgb[c * hw + i] = std::clamp(v, 0.0, 1.0);
      }
    }
}

void apply_screen_artifacts(Rng& rng, int size, std::vector<double>& rgb) {
  const int hw = size * size;
  const double period = rng.uniform(2.5, 4.5);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double amp = rng.uniform(0.12, 0.22);
  const double tint = rng.uniform(0.10, 0.18);
  for (int y = 0; y < size; ++y) {
    double stripe = amp * std::sin(2.0 * kPi * y / period + phase);
    for (int x = 0; x < size; ++x) {
      int i = y * size + x;
      for (int c = 0; c < 3; ++c)
        rgb[c * hw + i] = std::clamp(rgb[c * hw + i] * (1.0 + stripe), 0.0, 1.0);
      rgb[2 * hw + i] = std::clamp(rgb[2 * hw + i] + tint, 0.0, 1.0);
    }
  }
}

void apply_mask_artifacts(Rng& rng, int size, std::vector<double>& rgb) {
  const int hw = size * size;
  const double levels = 3.0 + static_cast<double>(rng.below(2));
  const double px = size * rng.uniform(0.3, 0.7);
  const double py = size * rng.uniform(0.3, 0.7);
  const double sigma = size * rng.uniform(0.10, 0.18);
  const double spec = rng.uniform(0.25, 0.40);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int i = y * size + x;
      double dx = (x - px) / sigma, dy = (y - py) / sigma;
      double highlight = spec * std::exp(-0.5 * (dx * dx + dy * dy));
      for (int c = 0; c < 3; ++c) {
        double v = std::round(rgb[c * hw + i] * levels) / levels;  // posterize
        rgb[c * hw + i] = std::clamp(v + highlight, 0.0, 1.0);
      }
    }
}

}  // namespace

Sample generate_sample(Rng& rng, Label label, SpoofClass spoof_class, int size) {
  if (size < 16) throw std::invalid_argument("generate_sample: size must be >= 16");
  if ((label == Label::kLive) != (spoof_class == SpoofClass::kNone))
    throw std::invalid_argument("generate_sample: label/spoof_class inconsistent");

  FaceScene scene = sample_scene(rng, size);
  std::vector<double> rgb, depth;
  render_live(scene, size, rgb, depth);

  Sample s;
  s.label = label;
  s.spoof_class = spoof_class;
  if (label == Label::kSpoof) {
    switch (spoof_class) {
      case SpoofClass::kPrint: apply_print_artifacts(rng, size, rgb); break;
      case SpoofClass::kScreen: apply_screen_artifacts(rng, size, rgb); break;
      case SpoofClass::kMask: apply_mask_artifacts(rng, size, rgb); break;
      case SpoofClass::kNone: break;  // unreachable, guarded above
    }
    std::fill(depth.begin(), depth.end(), 0.0);
  }
  s.rgb = Tensor(Shape{3, size, size}, std::move(rgb));
  s.depth_target = Tensor(Shape{1, size, size}, std::move(depth));
  return s;
}

namespace {

std::vector<std::pair<Label, SpoofClass>> class_sequence(const ClassCounts& counts,
                                                         std::uint64_t seed) {
  std::vector<std::pair<Label, SpoofClass>> seq;
  seq.reserve(static_cast<size_t>(counts.total()));
  for (int i = 0; i < counts.live; ++i) seq.emplace_back(Label::kLive, SpoofClass::kNone);
  for (int i = 0; i < counts.print; ++i) seq.emplace_back(Label::kSpoof, SpoofClass::kPrint);
  for (int i = 0; i < counts.screen; ++i) seq.emplace_back(Label::kSpoof, SpoofClass::kScreen);
  for (int i = 0; i < counts.mask; ++i) seq.emplace_back(Label::kSpoof, SpoofClass::kMask);
  // Fisher-Yates with our own engine so file contents are platform-stable
  Rng rng(seed ^ 0x5eedf00dULL);
  for (size_t i = seq.size(); i > 1; --i)
    std::swap(seq[i - 1], seq[rng.below(i)]);
  return seq;
}

}  // namespace

DatasetManifest make_dataset(const ClassCounts& counts, int size, std::uint64_t seed,
                             const std::filesystem::path& out_dir,
                             const std::string& name) {
  if (counts.live < 0 || counts.print < 0 || counts.screen < 0 || counts.mask < 0)
    throw std::invalid_argument("make_dataset: negative class count");
  const int total = counts.total();
  if (total < 1) throw std::invalid_argument("make_dataset: empty dataset");
  std::filesystem::create_directories(out_dir);

  auto seq = class_sequence(counts, seed);
  Tensor rgb(Shape{total, 3, size, size});
  Tensor depth(Shape{total, 1, size, size});
  std::ostringstream labels;
  labels << "index,label,spoof_class\n";
  const size_t rgb_stride = 3u * size * size;
  const size_t depth_stride = 1u * size * size;
  for (int i = 0; i < total; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    Sample s = generate_sample(rng, seq[i].first, seq[i].second, size);
    std::copy(s.rgb.data().begin(), s.rgb.data().end(),
              rgb.data().begin() + static_cast<size_t>(i) * rgb_stride);
    std::copy(s.depth_target.data().begin(), s.depth_target.data().end(),
              depth.data().begin() + static_cast<size_t>(i) * depth_stride);
    labels << i << "," << static_cast<int>(s.label) << "," << to_string(s.spoof_class)
           << "\n";
  }

  DatasetManifest m;
  m.name = name;
  m.count = total;
  m.size = size;
  m.seed = seed;
  m.counts = counts;
  m.rgb_file = out_dir / "rgb.pdt1";
  m.depth_file = out_dir / "depth.pdt1";
  m.labels_file = out_dir / "labels.csv";
  write_pdt1(m.rgb_file, rgb);
  write_pdt1(m.depth_file, depth);
  write_text_file(m.labels_file, labels.str());

  json j;
  j["name"] = m.name;
  j["count"] = m.count;
  j["size"] = m.size;
  j["seed"] = m.seed;
  j["counts"] = {{"live", counts.live},
                 {"print", counts.print},
                 {"screen", counts.screen},
                 {"mask", counts.mask}};
  j["files"] = {{"rgb", "rgb.pdt1"}, {"depth", "depth.pdt1"}, {"labels", "labels.csv"}};
  write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  json j = json::parse(read_text_file(manifest_path));
  DatasetManifest m;
  auto dir = manifest_path.parent_path();
  m.name = j.at("name").get<std::string>();
  m.count = j.at("count").get<int>();
  m.size = j.at("size").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.counts.live = j.at("counts").at("live").get<int>();
  m.counts.print = j.at("counts").at("print").get<int>();
  m.counts.screen = j.at("counts").at("screen").get<int>();
  m.counts.mask = j.at("counts").at("mask").get<int>();
  m.rgb_file = dir / j.at("files").at("rgb").get<std::string>();
  m.depth_file = dir / j.at("files").at("depth").get<std::string>();
  m.labels_file = dir / j.at("files").at("labels").get<std::string>();
  if (m.counts.total() != m.count)
    throw std::runtime_error("manifest: class counts do not sum to sample count");
  return m;
}

Dataset load_dataset(const DatasetManifest& m) {
  Tensor rgb = read_pdt1(m.rgb_file);
  Tensor depth = read_pdt1(m.depth_file);
  if (rgb.dim(0) != m.count || depth.dim(0) != m.count)
    throw std::runtime_error("dataset: tensor count does not match manifest");
  const int size = m.size;

  Dataset ds;
  ds.size = size;
  ds.samples.resize(static_cast<size_t>(m.count));

  std::istringstream labels(read_text_file(m.labels_file));
  std::string line;
  std::getline(labels, line);  // header
  int row = 0;
  const size_t rgb_stride = 3u * size * size;
  const size_t depth_stride = 1u * size * size;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string idx_s, label_s, class_s;
    std::getline(ls, idx_s, ',');
    std::getline(ls, label_s, ',');
    std::getline(ls, class_s, ',');
    int idx = std::stoi(idx_s);
    if (idx < 0 || idx >= m.count) throw std::runtime_error("labels: index out of range");
    Sample& s = ds.samples[static_cast<size_t>(idx)];
    s.label = label_s == "0" ? Label::kLive : Label::kSpoof;
    s.spoof_class = spoof_class_from_string(class_s);
    s.rgb = Tensor(Shape{3, size, size},
                   std::vector<double>(rgb.data().begin() + idx * rgb_stride,
                                       rgb.data().begin() + (idx + 1) * rgb_stride));
    s.depth_target =
        Tensor(Shape{1, size, size},
               std::vector<double>(depth.data().begin() + idx * depth_stride,
                                   depth.data().begin() + (idx + 1) * depth_stride));
    ++row;
  }
  if (row != m.count) throw std::runtime_error("labels: row count does not match manifest");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(load_manifest(manifest_path));
}

namespace {

struct Affine {
  // output pixel -> input pixel (inverse map), row-major 2x2 plus offset
  double m00, m01, m10, m11, ox, oy;
};

double bilinear_at(const double* plane, int h, int w, double y, double x) {
  // zero fill outside the frame
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0, fy = y - y0;
  auto pix = [&](int yy, int xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return plane[yy * w + xx];
  };
  return (1 - fy) * ((1 - fx) * pix(y0, x0) + fx * pix(y0, x0 + 1)) +
         fy * ((1 - fx) * pix(y0 + 1, x0) + fx * pix(y0 + 1, x0 + 1));
}

Tensor warp(const Tensor& img, const Affine& a) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double* src = img.data().data() + static_cast<size_t>(ch) * h * w;
    double* dst = out.data().data() + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double sx = a.m00 * x + a.m01 * y + a.ox;
        double sy = a.m10 * x + a.m11 * y + a.oy;
        dst[y * w + x] = bilinear_at(src, h, w, sy, sx);
      }
  }
  return out;
}

}  // namespace

Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
  Sample out;
  out.label = sample.label;
  out.spoof_class = sample.spoof_class;
  const int h = sample.rgb.dim(1), w = sample.rgb.dim(2);

  Tensor rgb = sample.rgb.detach();
  Tensor depth = sample.depth_target.detach();

  if (cfg.geometric_enabled()) {
    const double tx = rng.uniform(-cfg.max_translate, cfg.max_translate) * w;
    const double ty = rng.uniform(-cfg.max_translate, cfg.max_translate) * h;
    const double scale = 1.0 + rng.uniform(-cfg.max_scale, cfg.max_scale);
    const double theta = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg) * kPi / 180.0;
    const bool flip = rng.bernoulli(cfg.flip_prob);

    // forward map: p_out = R(theta) * scale * F * (p - c) + c + t.
    // We apply its inverse to each output pixel.
    const double cx = (w - 1) * 0.5, cy = (h - 1) * 0.5;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double inv_s = 1.0 / scale;
    const double fsx = flip ? -1.0 : 1.0;
    Affine a;
    // inverse: F * (1/s) * R(-theta) * (p_out - c - t) + c
    a.m00 = fsx * inv_s * ct;
    a.m01 = fsx * inv_s * st;
    a.m10 = -inv_s * st;
    a.m11 = inv_s * ct;
    const double dx = -cx - tx, dy = -cy - ty;
    a.ox = a.m00 * dx + a.m01 * dy + cx;
    a.oy = a.m10 * dx + a.m11 * dy + cy;

    rgb = warp(rgb, a);
    if (sample.label == Label::kLive) depth = warp(depth, a);
    // spoof depth targets stay exactly zero; warping zeros is a no-op anyway
  }

  if (cfg.color_enabled()) {
    const double brightness = rng.uniform(-cfg.max_brightness, cfg.max_brightness);
    const double saturation = 1.0 + rng.uniform(-cfg.max_saturation, cfg.max_saturation);
    const double temperature = rng.uniform(-cfg.max_temperature, cfg.max_temperature);
    const int hw = h * w;
    auto& d = rgb.data();
    for (int i = 0; i < hw; ++i) {
      double r = d[i], g = d[hw + i], b = d[2 * hw + i];
      double gray = (r + g + b) / 3.0;
      r = gray + saturation * (r - gray) + brightness + temperature;
      g = gray + saturation * (g - gray) + brightness;
      b = gray + saturation * (b - gray) + brightness - temperature;
      d[i] = std::clamp(r, 0.0, 1.0);
      d[hw + i] = std::clamp(g, 0.0, 1.0);
      d[2 * hw + i] = std::clamp(b, 0.0, 1.0);
    }
  }

  out.rgb = rgb;
  out.depth_target = depth;
  return out;
}

Tensor resize_normalize(const Tensor& rgb, int out_size) {
  if (rgb.rank() != 3) throw std::invalid_argument("resize_normalize: CxHxW input expected");
  const int c = rgb.dim(0), h = rgb.dim(1), w = rgb.dim(2);
  if (h < 1 || w < 1) throw std::invalid_argument("resize_normalize: empty image");
  Tensor out(Shape{c, out_size, out_size});
  const double sy = static_cast<double>(h) / out_size;
  const double sx = static_cast<double>(w) / out_size;
  for (int ch = 0; ch < c; ++ch) {
    const double* src = rgb.data().data() + static_cast<size_t>(ch) * h * w;
    double* dst = out.data().data() + static_cast<size_t>(ch) * out_size * out_size;
    for (int y = 0; y < out_size; ++y) {
      double iy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      for (int x = 0; x < out_size; ++x) {
        double ix = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        int x0 = static_cast<int>(std::floor(ix));
        int y0 = static_cast<int>(std::floor(iy));
        int x1 = std::min(x0 + 1, w - 1);
        int y1 = std::min(y0 + 1, h - 1);
        double fx = ix - x0, fy = iy - y0;
        double v = (1 - fy) * ((1 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                   fy * ((1 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
        dst[y * out_size + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace pdgan
