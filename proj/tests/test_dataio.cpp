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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <unistd.h>

#include "blvnet/dataio.hpp"
#include "blvnet/random.hpp"

namespace blvnet::data {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("blvnet_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image noise_image(int h, int w, std::uint64_t seed) {
  Image img(h, w);
  Rng rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(px(rng));
  return img;
}

TEST(Sampling, Fixtures) {
  EXPECT_EQ(uniform_sample(100, 4, SampleMode::infer).indices, (std::vector<std::int64_t>{12, 37, 62, 87}));
  EXPECT_EQ(uniform_sample(2, 4, SampleMode::infer).indices, (std::vector<std::int64_t>{0, 0, 1, 1}));
  EXPECT_EQ(uniform_sample(1, 3, SampleMode::train, 9).indices, (std::vector<std::int64_t>{0, 0, 0}));
  EXPECT_EQ(uniform_sample(4, 4, SampleMode::train, 3).indices, (std::vector<std::int64_t>{0, 1, 2, 3}));
  EXPECT_THROW(uniform_sample(0, 4, SampleMode::infer), ValueError);
  EXPECT_THROW(uniform_sample(10, 0, SampleMode::infer), ValueError);
}

TEST(Sampling, IndicesStayInTheirSegments) {
  Rng rng(1);
  std::uniform_int_distribution<int> pick_n(1, 40);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = pick_n(rng);
    const std::int64_t L = n + static_cast<std::int64_t>(rng() % 500);
    for (auto mode : {SampleMode::train, SampleMode::infer}) {
      const auto plan = uniform_sample(L, n, mode, static_cast<std::uint64_t>(trial));
      ASSERT_EQ(plan.indices.size(), static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const auto idx = plan.indices[static_cast<std::size_t>(i)];
        ASSERT_GE(idx, i * L / n);
        ASSERT_LT(idx, (i + 1) * L / n);
      }
      ASSERT_TRUE(std::is_sorted(plan.indices.begin(), plan.indices.end()));
    }
  }
}

TEST(Sampling, ShortVideosClampAndStayOrdered) {
  for (std::int64_t L = 1; L < 16; ++L)
    for (int n = static_cast<int>(L) + 1; n < 40; ++n) {
      const auto idx = uniform_sample(L, n, SampleMode::infer).indices;
      ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
      ASSERT_GE(idx.front(), 0);
      ASSERT_LE(idx.back(), L - 1);
    }
}

TEST(Sampling, TrainModeIsSeeded) {
  const auto a = uniform_sample(300, 8, SampleMode::train, 5).indices;
  EXPECT_EQ(a, uniform_sample(300, 8, SampleMode::train, 5).indices);
  bool differs = false;
  for (std::uint64_t s = 6; s < 12 && !differs; ++s) differs = uniform_sample(300, 8, SampleMode::train, s).indices != a;
  EXPECT_TRUE(differs);
}

TEST(Preprocess, ShorterSideBecomes256) {
  PreprocessConfig cfg;
  EXPECT_EQ(resized_size(480, 640, cfg), (std::array<int, 2>{256, 341}));
  EXPECT_EQ(resized_size(640, 480, cfg), (std::array<int, 2>{341, 256}));
  cfg.resize_square = true;
  EXPECT_EQ(resized_size(480, 640, cfg), (std::array<int, 2>{256, 256}));
  const auto t = preprocess_infer(noise_image(480, 640, 1));
  EXPECT_EQ(t.shape(), (Shape{3, 224, 224}));
}

TEST(Preprocess, ConstantGrayNormalizesExactly) {
  PreprocessConfig cfg;
  const auto t = preprocess_infer(Image(120, 90, 128), cfg).to_vector();
  const std::size_t plane = 224 * 224;
  for (std::size_t c = 0; c < 3; ++c) {
    const double want = (128.0 / 255.0 - cfg.mean[c]) / cfg.std[c];
    for (std::size_t i = 0; i < plane; i += 997) EXPECT_NEAR(t[c * plane + i], want, 1e-6);
  }
}

TEST(Preprocess, ResizeKeepsConstantImages) {
  const auto v = resize_rgb(Image(7, 5, 200), 13, 11);
  ASSERT_EQ(v.size(), 13u * 11 * 3);
  for (float x : v) EXPECT_FLOAT_EQ(x, 200.0f);
}

TEST(Preprocess, ConfigParsing) {
  const auto cfg = parse_preprocess_config("resize = 128\ncrop=112\n\nmean=0.5,0.5,0.5\nstd=0.25,0.25,0.25\n");
  EXPECT_EQ(cfg.resize, 128);
  EXPECT_EQ(cfg.crop, 112);
  EXPECT_EQ(cfg.std[1], 0.25);
  EXPECT_THROW(parse_preprocess_config("colour=1"), FormatError);
  EXPECT_THROW(parse_preprocess_config("crop=300"), FormatError);
  EXPECT_THROW(parse_preprocess_config("mean=1,2"), FormatError);
  EXPECT_THROW(parse_preprocess_config("resize"), FormatError);
  EXPECT_THROW(load_preprocess_config("/nonexistent/pre.cfg"), IoError);
}

TEST(Augment, FlipFrequencyIsHalf) {
  int flips = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) flips += sample_augment(240, 320, s).flip ? 1 : 0;
  EXPECT_NEAR(flips / 10000.0, 0.5, 0.02);
}

TEST(Augment, ParametersAreValidCrops) {
  PreprocessConfig cfg;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto p = sample_augment(240, 320, s, cfg);
    ASSERT_EQ(p.resized_h, 256);
    ASSERT_EQ(p.resized_w, 341);
    ASSERT_GE(p.offset_y, 0);
    ASSERT_GE(p.offset_x, 0);
    ASSERT_LE(p.offset_y + p.crop_h, p.resized_h);
    ASSERT_LE(p.offset_x + p.crop_w, p.resized_w);
    ASSERT_GE(p.crop_h, 168);
    ASSERT_LE(p.crop_h, 256);
  }
}

TEST(Augment, SameTransformForEveryFrame) {
  const auto img = noise_image(60, 80, 2);
  PreprocessConfig cfg;
  cfg.resize = 64;
  cfg.crop = 56;
  const auto t = augment_train({img, img, img}, 17, cfg).to_vector();
  const std::size_t frame = 3 * 56 * 56;
  ASSERT_EQ(t.size(), 3 * frame);
  for (std::size_t i = 0; i < frame; ++i) {
    ASSERT_EQ(t[i], t[frame + i]);
    ASSERT_EQ(t[i], t[2 * frame + i]);
  }
  EXPECT_EQ(sample_augment(60, 80, 17, cfg).flip, sample_augment(60, 80, 17, cfg).flip);
}

TEST(Augment, FlipIsAnInvolution) {
  const auto img = noise_image(9, 14, 3);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_NE(flip_horizontal(img), img);
  EXPECT_EQ(flip_horizontal(img).at(2, 0, 1), img.at(2, 13, 1));
}

int net_displacement(const Clip& c, int size) {
  int net = 0;
  for (std::size_t t = 1; t < c.positions.size(); ++t) {
    int d = c.positions[t] - c.positions[t - 1];
    if (d > size / 2) d -= size;
    if (d < -size / 2) d += size;
    net += d;
  }
  return net;
}

TEST(Motion, LabelIsTheNetDirection) {
  const auto clips = synth_motion_dataset(200, 8, 32, 4);
  for (const auto& c : clips) {
    const int net = net_displacement(c, 32);
    EXPECT_NE(net, 0);
    EXPECT_EQ(net > 0 ? motion_right : motion_left, c.label) << c.id;
  }
}

TEST(Motion, ReversingFramesFlipsTheLabel) {
  for (bool walk : {true, false}) {
    MotionConfig cfg;
    cfg.random_walk = walk;
    for (const auto& c : synth_motion_dataset(50, 7, 24, 5, cfg)) {
      Clip r = c;
      std::reverse(r.positions.begin(), r.positions.end());
      EXPECT_EQ(net_displacement(r, 24), -net_displacement(c, 24));
    }
  }
}

TEST(Motion, ConstantVelocityWhenWalkIsOff) {
  MotionConfig cfg;
  cfg.random_walk = false;
  cfg.speed = 2;
  for (const auto& c : synth_motion_dataset(10, 6, 32, 6, cfg)) {
    const int dir = c.label == motion_right ? 2 : -2;
    for (std::size_t t = 1; t < c.positions.size(); ++t) EXPECT_EQ(((c.positions[t] - c.positions[t - 1] - dir) % 32 + 32) % 32, 0);
  }
}

TEST(Motion, SingleFramesLookAlikeAcrossClasses) {
  // Square positions at any fixed frame are uniform for both labels.
  const auto clips = synth_motion_dataset(4000, 8, 16, 7);
  for (std::size_t t : {0u, 3u, 7u}) {
    for (int label : {motion_left, motion_right}) {
      std::vector<int> hist(16, 0);
      int n = 0;
      for (const auto& c : clips)
        if (c.label == label) ++hist[static_cast<std::size_t>(c.positions[t])], ++n;
      double chi2 = 0;
      const double e = n / 16.0;
      for (int h : hist) chi2 += (h - e) * (h - e) / e;
      EXPECT_LT(chi2, 40.0) << "t=" << t << " label=" << label;  // 15 dof; p ~ 5e-4
    }
  }
  // The square looks the same in both classes.
  const auto& a = clips[0].frames[0];
  const auto& b = clips[1].frames[0];
  const int bright_a = static_cast<int>(std::count(a.pixels.begin(), a.pixels.end(), 255));
  const int bright_b = static_cast<int>(std::count(b.pixels.begin(), b.pixels.end(), 255));
  EXPECT_GE(bright_a, 36 * 3);
  EXPECT_GE(bright_b, 36 * 3);
}

TEST(Motion, GenerationIsDeterministic) {
  const auto a = synth_motion_dataset(20, 4, 16, 9), b = synth_motion_dataset(20, 4, 16, 9);
  const auto c = synth_motion_dataset(20, 4, 16, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frames, b[i].frames);
    EXPECT_EQ(a[i].label, b[i].label);
  }
  EXPECT_NE(a[0].frames, c[0].frames);
  EXPECT_THROW(synth_motion_dataset(2, 1, 16, 0), ValueError);
}

TEST(Motion, FramesToTensorLayout) {
  const auto clips = synth_motion_dataset(1, 4, 16, 2);
  const auto t = frames_to_tensor(clips[0].frames);
  EXPECT_EQ(t.shape(), (Shape{4, 3, 16, 16}));
  EXPECT_EQ(t.dtype(), DType::f32);
}

TEST(Manifest, ClipDirectoryRoundTrip) {
  const auto dir = temp_dir("clips");
  const auto clips = synth_motion_dataset(3, 4, 16, 11);
  write_clip_dir(dir, clips);
  const auto entries = read_manifest(dir / "manifest.tsv");
  ASSERT_EQ(entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(entries[i].clip_id, clips[i].id);
    EXPECT_EQ(entries[i].label, clips[i].label);
    EXPECT_EQ(entries[i].num_frames, 4);
    EXPECT_EQ(load_clip(dir, entries[i]), clips[i].frames);
  }
  fs::remove_all(dir);
}

TEST(Manifest, Errors) {
  const auto dir = temp_dir("manifest");
  EXPECT_THROW(read_manifest(dir / "missing.tsv"), IoError);
  std::ofstream(dir / "bad.tsv") << "clip\tnot-a-number\t4\tclip\n";
  EXPECT_THROW(read_manifest(dir / "bad.tsv"), FormatError);
  std::ofstream(dir / "short.tsv") << "clip\t1\n";
  EXPECT_THROW(read_manifest(dir / "short.tsv"), FormatError);
  write_manifest(dir / "ok.tsv", {{"a", 1, 2, "a"}});
  EXPECT_EQ(read_manifest(dir / "ok.tsv")[0].path, "a");
  EXPECT_ANY_THROW(load_clip(dir, {"a", 1, 2, "a"}));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace blvnet::data
