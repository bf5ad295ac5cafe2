#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdgan/rng.hpp"
#include "pdgan/tensor.hpp"

namespace pdgan {

enum class Label { kLive = 0, kSpoof = 1 };
enum class SpoofClass { kNone = 0, kPrint = 1, kScreen = 2, kMask = 3 };

std::string to_string(SpoofClass c);
SpoofClass spoof_class_from_string(const std::string& s);

// One paired training example: an RGB face, its pseudo-depth target (all
// zeros for spoofs), the binary liveness label, and the attack type.
struct Sample {
  Tensor rgb;           // 3 x H x W in [0,1]
  Tensor depth_target;  // 1 x H x W in [0,1]; exactly zero when spoofed
  Label label = Label::kLive;
  SpoofClass spoof_class = SpoofClass::kNone;
};

struct AugmentConfig {
  double max_translate = 0.1;   // fraction of image size
  double max_scale = 0.1;       // multiplicative delta
  double max_rotate_deg = 10.0;
  double flip_prob = 0.5;
  double max_brightness = 0.1;
  double max_saturation = 0.1;
  double max_temperature = 0.05;  // warm/cool channel tint

  bool geometric_enabled() const {
    return max_translate > 0 || max_scale > 0 || max_rotate_deg > 0 || flip_prob > 0;
  }
  bool color_enabled() const {
    return max_brightness > 0 || max_saturation > 0 || max_temperature > 0;
  }
};

struct ClassCounts {
  int live = 0;
  int print = 0;
  int screen = 0;
  int mask = 0;
  int total() const { return live + print + screen + mask; }
};

struct DatasetManifest {
  std::string name;
  int count = 0;
  int size = 0;
  std::uint64_t seed = 0;
  ClassCounts counts;
  std::filesystem::path rgb_file;
  std::filesystem::path depth_file;
  std::filesystem::path labels_file;
};

struct Dataset {
  std::vector<Sample> samples;
  int size = 0;  // image side length
};

Sample generate_sample(Rng& rng, Label label, SpoofClass spoof_class, int size);

DatasetManifest make_dataset(const ClassCounts& counts, int size, std::uint64_t seed,
                             const std::filesystem::path& out_dir,
                             const std::string& name);

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::filesystem::path& manifest_path);

Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng);

// Bilinear resize of a CxHxW image to CxSxS, clamped to [0,1].
Tensor resize_normalize(const Tensor& rgb, int out_size);

}  // namespace pdgan
