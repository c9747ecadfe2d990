// Copyright 2026 The blvnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blvnet/tensor.hpp"

namespace blvnet::data {

enum class SampleMode { train, infer };

/// One frame index per uniform segment of a clip.
struct SamplePlan {
  int n = 0;
  SampleMode mode = SampleMode::infer;
  std::vector<std::int64_t> indices;
};

/// Segment i covers [floor(i*L/n), floor((i+1)*L/n)). Training draws one
/// frame uniformly from each segment; inference takes the segment center
/// floor((start + end - 1) / 2). Clips shorter than n repeat frames:
/// index i is floor(i*L/n).
SamplePlan uniform_sample(std::int64_t num_frames, int n, SampleMode mode, std::uint64_t seed = 0);

/// 8-bit interleaved RGB, row-major H×W×3.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0);
  std::uint8_t& at(int y, int x, int c) { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  bool operator==(const Image&) const = default;
};

struct PreprocessConfig {
  /// Target of the smaller side (or both sides when resize_square is set).
  int resize = 256;
  bool resize_square = false;
  int crop = 224;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

/// key=value lines: resize, resize_square, crop, mean, std (mean/std as three
/// comma-separated values). '#' starts a comment. Unknown keys are rejected.
PreprocessConfig parse_preprocess_config(const std::string& text);
PreprocessConfig load_preprocess_config(const std::filesystem::path& path);

/// Output size when the smaller side is scaled to cfg.resize (floor on the
/// other side), or cfg.resize square.
std::array<int, 2> resized_size(int height, int width, const PreprocessConfig& cfg);

/// Bilinear resample with half-pixel centers; values stay in [0, 255].
/// Returns a float H×W×3 buffer.
std::vector<float> resize_rgb(const Image& img, int out_h, int out_w);

/// Resize, center crop, scale to [0, 1] and normalize per channel -> 3×crop×crop.
Tensor preprocess_infer(const Image& img, const PreprocessConfig& cfg = {});

/// Geometry of one training transform; shared by every frame of a clip.
struct AugmentParams {
  int resized_h = 0, resized_w = 0;
  int crop_h = 0, crop_w = 0;
  int offset_y = 0, offset_x = 0;
  bool flip = false;
};

/// Multi-scale crop: crop sides are drawn from {1, .875, .75, .66} × the
/// smaller resized side with at most one step of aspect distortion, placed at
/// one of 13 fixed offsets; horizontal flip with probability 1/2.
AugmentParams sample_augment(int height, int width, std::uint64_t seed, const PreprocessConfig& cfg = {});

/// Applies params, resizes the crop to cfg.crop and normalizes.
Tensor apply_augment(const Image& img, const AugmentParams& params, const PreprocessConfig& cfg = {});

/// One seeded transform applied to every frame -> T×3×crop×crop.
Tensor augment_train(const std::vector<Image>& frames, std::uint64_t seed, const PreprocessConfig& cfg = {});

/// Mirrors columns.
Image flip_horizontal(const Image& img);

/// A labeled clip held in memory.
struct Clip {
  std::string id;
  int label = 0;
  std::vector<Image> frames;
  /// Synthetic clips: horizontal square position per frame.
  std::vector<int> positions;
};

struct MotionConfig {
  int square = 6;
  int speed = 1;         ///< pixels per frame
  int noise = 64;        ///< background noise amplitude around mid gray
  int brightness = 255;  ///< square intensity
  /// Each frame-to-frame step is +-speed at random, redrawn until the net
  /// displacement points in the label direction (ties rejected). false moves
  /// at constant velocity.
  bool random_walk = true;
};

enum MotionLabel : int { motion_left = 0, motion_right = 1 };

/// A square drifting left or right (with wraparound) over fresh noise each
/// frame; the label is the sign of the net displacement. Start positions are uniform over the frame width, so every frame on
/// its own has the same distribution under both labels.
std::vector<Clip> synth_motion_dataset(int num_clips, int num_frames, int size, std::uint64_t seed,
                                       const MotionConfig& cfg = {});

/// Frames scaled to [0, 1] and normalized with cfg mean/std, no resizing -> T×3×H×W.
Tensor frames_to_tensor(const std::vector<Image>& frames, const PreprocessConfig& cfg = {});

struct ManifestEntry {
  std::string clip_id;
  int label = 0;
  std::int64_t num_frames = 0;
  std::string path;  ///< clip directory, relative to the manifest's directory
};

/// Tab-separated clip_id, label, num_frames, path; '#' lines ignored.
/// Throws FormatError on malformed lines, IoError when unreadable.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

/// Writes frames as <dir>/<clip_id>/NNNNNN.tensor (f32 H×W×3, values 0..255)
/// and a manifest at <dir>/manifest.tsv.
void write_clip_dir(const std::filesystem::path& dir, const std::vector<Clip>& clips);
/// Loads the frames of one manifest entry.
std::vector<Image> load_clip(const std::filesystem::path& manifest_dir, const ManifestEntry& entry);

}  // namespace blvnet::data
