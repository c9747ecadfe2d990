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

#include "blvnet/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "blvnet/error.hpp"
#include "blvnet/random.hpp"
#include "blvnet/tensor_io.hpp"

namespace blvnet::data {
namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) throw FormatError("invalid " + what + ": '" + text + "'");
  return value;
}

std::array<double, 3> parse_triplet(const std::string& text, const std::string& key) {
  std::array<double, 3> v{};
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw FormatError(key + " takes exactly three values");
    v[static_cast<std::size_t>(i++)] = parse_number<double>(trim(item), key);
  }
  if (i != 3) throw FormatError(key + " takes exactly three values");
  return v;
}

void check_image(const Image& img) {
  if (img.height < 1 || img.width < 1) throw ValueError("image must be at least 1x1");
  if (img.pixels.size() != static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.width) * 3) {
    throw ValueError("image buffer does not match its dimensions");
  }
}

// Crops a float H×W×3 buffer, resizes the crop to out×out and normalizes into
// a 3×out×out tensor.
Tensor crop_resize_normalize(const std::vector<float>& src, int h, int w, int y0, int x0, int ch, int cw, int out,
                             bool flip, const PreprocessConfig& cfg) {
  std::vector<float> region(static_cast<std::size_t>(ch) * static_cast<std::size_t>(cw) * 3);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < 3; ++c)
        region[static_cast<std::size_t>((y * cw + x) * 3 + c)] =
            src[static_cast<std::size_t>(((y0 + y) * w + (x0 + x)) * 3 + c)];
  (void)h;
  std::vector<float> scaled;
  int sh = ch, sw = cw;
  if (ch != out || cw != out) {
    // Resample the float crop directly to avoid re-quantizing.
    scaled.resize(static_cast<std::size_t>(out) * static_cast<std::size_t>(out) * 3);
    for (int oy = 0; oy < out; ++oy) {
      const double fy = std::clamp((oy + 0.5) * ch / out - 0.5, 0.0, static_cast<double>(ch - 1));
      const int y_0 = static_cast<int>(fy), y_1 = std::min(y_0 + 1, ch - 1);
      const double ay = fy - y_0;
      for (int ox = 0; ox < out; ++ox) {
        const double fx = std::clamp((ox + 0.5) * cw / out - 0.5, 0.0, static_cast<double>(cw - 1));
        const int x_0 = static_cast<int>(fx), x_1 = std::min(x_0 + 1, cw - 1);
        const double ax = fx - x_0;
        for (int c = 0; c < 3; ++c) {
          auto px = [&](int yy, int xx) { return region[static_cast<std::size_t>((yy * cw + xx) * 3 + c)]; };
          const double v = (1 - ay) * ((1 - ax) * px(y_0, x_0) + ax * px(y_0, x_1)) +
                           ay * ((1 - ax) * px(y_1, x_0) + ax * px(y_1, x_1));
          scaled[static_cast<std::size_t>((oy * out + ox) * 3 + c)] = static_cast<float>(v);
        }
      }
    }
    sh = sw = out;
  } else {
    scaled = std::move(region);
  }
  std::vector<double> chw(static_cast<std::size_t>(3 * sh * sw));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x) {
        const int sx = flip ? sw - 1 - x : x;
        const double v = scaled[static_cast<std::size_t>((y * sw + sx) * 3 + c)] / 255.0;
        chw[static_cast<std::size_t>((c * sh + y) * sw + x)] =
            (v - cfg.mean[static_cast<std::size_t>(c)]) / cfg.std[static_cast<std::size_t>(c)];
      }
  return Tensor::from_values({3, sh, sw}, chw, DType::f32);
}

}  // namespace

SamplePlan uniform_sample(std::int64_t num_frames, int n, SampleMode mode, std::uint64_t seed) {
  if (n <= 0) throw ValueError("segment count must be positive, got " + std::to_string(n));
  if (num_frames < 1) throw ValueError("a clip needs at least one frame");
  SamplePlan plan{n, mode, {}};
  Rng rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t start = i * num_frames / n;
    const std::int64_t end = (i + 1) * num_frames / n;
    if (end <= start) {
      plan.indices.push_back(std::min(start, num_frames - 1));
    } else if (mode == SampleMode::infer) {
      plan.indices.push_back((start + end - 1) / 2);
    } else {
      std::uniform_int_distribution<std::int64_t> pick(start, end - 1);
      plan.indices.push_back(pick(rng));
    }
  }
  return plan;
}

Image::Image(int h, int w, std::uint8_t fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {
  if (h < 1 || w < 1) throw ValueError("image must be at least 1x1");
}

PreprocessConfig parse_preprocess_config(const std::string& text) {
  PreprocessConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "resize") {
      cfg.resize = parse_number<int>(value, key);
    } else if (key == "resize_square") {
      cfg.resize_square = parse_number<int>(value, key) != 0;
    } else if (key == "crop") {
      cfg.crop = parse_number<int>(value, key);
    } else if (key == "mean") {
      cfg.mean = parse_triplet(value, key);
    } else if (key == "std") {
      cfg.std = parse_triplet(value, key);
    } else {
      throw FormatError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (cfg.resize < 1 || cfg.crop < 1 || cfg.crop > cfg.resize) throw FormatError("need 1 <= crop <= resize");
  for (double s : cfg.std)
    if (!(s > 0)) throw FormatError("std values must be positive");
  return cfg;
}

PreprocessConfig load_preprocess_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_preprocess_config(ss.str());
}

std::array<int, 2> resized_size(int height, int width, const PreprocessConfig& cfg) {
  if (height < 1 || width < 1) throw ValueError("image must be at least 1x1");
  if (cfg.resize_square) return {cfg.resize, cfg.resize};
  if (height <= width) {
    return {cfg.resize, static_cast<int>(static_cast<std::int64_t>(width) * cfg.resize / height)};
  }
  return {static_cast<int>(static_cast<std::int64_t>(height) * cfg.resize / width), cfg.resize};
}

std::vector<float> resize_rgb(const Image& img, int out_h, int out_w) {
  check_image(img);
  if (out_h < 1 || out_w < 1) throw ValueError("resize target must be at least 1x1");
  std::vector<float> out(static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w) * 3);
  const double sy = static_cast<double>(img.height) / out_h, sx = static_cast<double>(img.width) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, img.height - 1);
    const double ay = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, img.width - 1);
      const double ax = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ay) * ((1 - ax) * img.at(y0, x0, c) + ax * img.at(y0, x1, c)) +
                         ay * ((1 - ax) * img.at(y1, x0, c) + ax * img.at(y1, x1, c));
        out[static_cast<std::size_t>((oy * out_w + ox) * 3 + c)] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor preprocess_infer(const Image& img, const PreprocessConfig& cfg) {
  check_image(img);
  const auto [h, w] = resized_size(img.height, img.width, cfg);
  if (h < cfg.crop || w < cfg.crop) throw ValueError("resized image is smaller than the crop");
  const auto resized = resize_rgb(img, h, w);
  return crop_resize_normalize(resized, h, w, (h - cfg.crop) / 2, (w - cfg.crop) / 2, cfg.crop, cfg.crop, cfg.crop,
                               false, cfg);
}

AugmentParams sample_augment(int height, int width, std::uint64_t seed, const PreprocessConfig& cfg) {
  static constexpr double scales[4] = {1.0, 0.875, 0.75, 0.66};
  const auto [h, w] = resized_size(height, width, cfg);
  const int base = std::min(h, w);
  int sizes[4];
  for (int i = 0; i < 4; ++i) {
    sizes[i] = static_cast<int>(base * scales[i]);
    if (std::abs(sizes[i] - cfg.crop) < 3) sizes[i] = cfg.crop;
  }
  std::vector<std::pair<int, int>> pairs;  // (crop_w, crop_h)
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (std::abs(i - j) <= 1) pairs.emplace_back(sizes[j], sizes[i]);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
  const auto [cw, ch] = pairs[pick_pair(rng)];
  const int ws = (w - cw) / 4, hs = (h - ch) / 4;
  const std::array<std::pair<int, int>, 13> offsets{{{0, 0},
                                                     {4 * ws, 0},
                                                     {0, 4 * hs},
                                                     {4 * ws, 4 * hs},
                                                     {2 * ws, 2 * hs},
                                                     {0, 2 * hs},
                                                     {4 * ws, 2 * hs},
                                                     {2 * ws, 4 * hs},
                                                     {2 * ws, 0},
                                                     {ws, hs},
                                                     {3 * ws, hs},
                                                     {ws, 3 * hs},
                                                     {3 * ws, 3 * hs}}};
  std::uniform_int_distribution<std::size_t> pick_offset(0, offsets.size() - 1);
  const auto [ox, oy] = offsets[pick_offset(rng)];
  std::bernoulli_distribution coin(0.5);
  return AugmentParams{h, w, ch, cw, oy, ox, coin(rng)};
}

Tensor apply_augment(const Image& img, const AugmentParams& p, const PreprocessConfig& cfg) {
  check_image(img);
  const auto resized = resize_rgb(img, p.resized_h, p.resized_w);
  if (p.offset_y < 0 || p.offset_x < 0 || p.offset_y + p.crop_h > p.resized_h || p.offset_x + p.crop_w > p.resized_w) {
    throw ValueError("crop window lies outside the image");
  }
  return crop_resize_normalize(resized, p.resized_h, p.resized_w, p.offset_y, p.offset_x, p.crop_h, p.crop_w, cfg.crop,
                               p.flip, cfg);
}

Tensor augment_train(const std::vector<Image>& frames, std::uint64_t seed, const PreprocessConfig& cfg) {
  if (frames.empty()) throw ValueError("a clip needs at least one frame");
  const AugmentParams p = sample_augment(frames[0].height, frames[0].width, seed, cfg);
  std::vector<double> all;
  for (const auto& f : frames) {
    if (f.height != frames[0].height || f.width != frames[0].width) throw ValueError("frames differ in size");
    const auto v = apply_augment(f, p, cfg).to_vector();
    all.insert(all.end(), v.begin(), v.end());
  }
  return Tensor::from_values({static_cast<std::int64_t>(frames.size()), 3, cfg.crop, cfg.crop}, all, DType::f32);
}

Image flip_horizontal(const Image& img) {
  check_image(img);
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

std::vector<Clip> synth_motion_dataset(int num_clips, int num_frames, int size, std::uint64_t seed,
                                       const MotionConfig& cfg) {
  if (num_frames < 2) throw ValueError("motion clips need at least two frames");
  if (num_clips < 1) throw ValueError("num_clips must be positive");
  if (cfg.square < 1 || cfg.square >= size) throw ValueError("square must be smaller than the frame");
  std::vector<Clip> clips;
  clips.reserve(static_cast<std::size_t>(num_clips));
  for (int i = 0; i < num_clips; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Clip clip;
    char id[32];
    std::snprintf(id, sizeof id, "clip%06d", i);
    clip.id = id;
    clip.label = i % 2 == 0 ? motion_left : motion_right;
    const int dir = clip.label == motion_right ? 1 : -1;
    std::uniform_int_distribution<int> px(0, size - 1), py(0, size - cfg.square);
    std::uniform_int_distribution<int> noise(-cfg.noise, cfg.noise);
    const int x0 = px(rng), y0 = py(rng);
    std::vector<int> steps(static_cast<std::size_t>(num_frames - 1), dir);
    if (cfg.random_walk) {
      std::bernoulli_distribution coin(0.5);
      int net = 0;
      do {
        net = 0;
        for (auto& s : steps) net += (s = coin(rng) ? 1 : -1);
      } while (net * dir <= 0);
    }
    int x = x0;
    for (int t = 0; t < num_frames; ++t) {
      if (t > 0) x = ((x + steps[static_cast<std::size_t>(t - 1)] * cfg.speed) % size + size) % size;
      Image f(size, size);
      for (auto& p : f.pixels) p = static_cast<std::uint8_t>(std::clamp(128 + noise(rng), 0, 255));
      for (int dy = 0; dy < cfg.square; ++dy)
        for (int dx = 0; dx < cfg.square; ++dx)
          for (int c = 0; c < 3; ++c) f.at(y0 + dy, (x + dx) % size, c) = static_cast<std::uint8_t>(cfg.brightness);
      clip.frames.push_back(std::move(f));
      clip.positions.push_back(x);
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

Tensor frames_to_tensor(const std::vector<Image>& frames, const PreprocessConfig& cfg) {
  if (frames.empty()) throw ValueError("a clip needs at least one frame");
  const int h = frames[0].height, w = frames[0].width;
  Tensor out({static_cast<std::int64_t>(frames.size()), 3, h, w}, DType::f32);
  auto d = out.mutable_data<float>();
  std::size_t k = 0;
  for (const auto& f : frames) {
    check_image(f);
    if (f.height != h || f.width != w) throw ValueError("frames differ in size");
    for (int c = 0; c < 3; ++c) {
      const double m = cfg.mean[static_cast<std::size_t>(c)], s = cfg.std[static_cast<std::size_t>(c)];
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d[k++] = static_cast<float>((f.at(y, x, c) / 255.0 - m) / s);
    }
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    const std::string where = manifest.string() + ":" + std::to_string(lineno);
    if (fields.size() != 4) throw FormatError(where + ": expected 4 tab-separated fields");
    ManifestEntry e;
    e.clip_id = fields[0];
    e.label = parse_number<int>(fields[1], where + " label");
    e.num_frames = parse_number<std::int64_t>(fields[2], where + " num_frames");
    e.path = fields[3];
    if (e.clip_id.empty() || e.path.empty() || e.num_frames < 1 || e.label < 0) {
      throw FormatError(where + ": invalid entry");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write " + manifest.string());
  for (const auto& e : entries) out << e.clip_id << '\t' << e.label << '\t' << e.num_frames << '\t' << e.path << '\n';
}

void write_clip_dir(const std::filesystem::path& dir, const std::vector<Clip>& clips) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& clip : clips) {
    const auto clip_dir = dir / clip.id;
    std::filesystem::create_directories(clip_dir);
    for (std::size_t t = 0; t < clip.frames.size(); ++t) {
      const Image& f = clip.frames[t];
      std::vector<double> v(f.pixels.begin(), f.pixels.end());
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.tensor", t);
      save_tensor(clip_dir / name, Tensor::from_values({f.height, f.width, 3}, v, DType::f32));
    }
    entries.push_back({clip.id, clip.label, static_cast<std::int64_t>(clip.frames.size()), clip.id});
  }
  write_manifest(dir / "manifest.tsv", entries);
}

std::vector<Image> load_clip(const std::filesystem::path& manifest_dir, const ManifestEntry& entry) {
  std::vector<Image> frames;
  for (std::int64_t t = 0; t < entry.num_frames; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "%06lld.tensor", static_cast<long long>(t));
    const Tensor tensor = load_tensor(manifest_dir / entry.path / name);
    if (tensor.ndim() != 3 || tensor.dim(2) != 3) {
      throw FormatError(entry.clip_id + " frame " + std::to_string(t) + " is not an HxWx3 image tensor");
    }
    Image img(static_cast<int>(tensor.dim(0)), static_cast<int>(tensor.dim(1)));
    const auto v = tensor.to_vector();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0 && v[i] <= 255.0)) throw FormatError(entry.clip_id + ": pixel value outside [0, 255]");
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(v[i]));
    }
    if (!frames.empty() && (img.height != frames[0].height || img.width != frames[0].width)) {
      throw FormatError(entry.clip_id + ": frames differ in size");
    }
    frames.push_back(std::move(img));
  }
  return frames;
}

}  // namespace blvnet::data
