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

#include <numeric>
#include <string>

#include "blvnet/arch.hpp"
#include "blvnet/network.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/parallel.hpp"
#include "test_util.hpp"

namespace blvnet {
namespace {

using testing::randn;

ArchSpec tiny(const char* name, int n_pairs = 2, int classes = 5) {
  ArchSpec s = parse_arch(name);
  s.n_pairs = n_pairs;
  s.num_classes = classes;
  return s;
}

Tensor clip_for(const ArchSpec& s, std::uint64_t seed) {
  return randn({s.num_frames(), 3, s.input_size, s.input_size}, seed, DType::f32);
}

TEST(Arch, ParseAndName) {
  for (const char* name : {"tsn-50", "tsn-blnet-26", "blvnet-101", "blvnet-tam-50", "blvnet-tam-tiny", "tsn-tiny"}) {
    EXPECT_EQ(arch_name(parse_arch(name)), name);
  }
  const auto s = parse_arch("blvnet-tam-101");
  EXPECT_EQ(s.variant, Variant::blvnet_tam);
  EXPECT_EQ(s.depth, Depth::d101);
  EXPECT_EQ(parse_arch("tsn-tiny").input_size, 32);
  EXPECT_THROW(parse_arch("resnet-50"), ValueError);
  EXPECT_THROW(parse_arch("blvnet-tam-34"), ValueError);
  EXPECT_THROW(parse_arch("blvnet"), ValueError);
}

TEST(Arch, DepthTables) {
  EXPECT_EQ(stage_repeats(Depth::d50), (std::array<int, 4>{3, 4, 6, 3}));
  EXPECT_EQ(stage_repeats(Depth::d101), (std::array<int, 4>{4, 8, 18, 3}));
  EXPECT_EQ(stage_repeats(Depth::d26), (std::array<int, 4>{2, 2, 2, 2}));
  EXPECT_EQ(base_width(Depth::d50), 64);
  EXPECT_EQ(base_width(Depth::tiny), 16);
}

TEST(Arch, SpecSerializationRoundTrips) {
  ArchSpec s = parse_arch("blvnet-tam-tiny");
  s.alpha = 4;
  s.beta = 2;
  s.r = 5;
  s.n_pairs = 3;
  s.num_classes = 7;
  s.swap_branches = true;
  const auto back = deserialize_spec(serialize_spec(s));
  EXPECT_EQ(serialize_spec(back), serialize_spec(s));
  EXPECT_THROW(deserialize_spec("arch=blvnet-tam-tiny alpha=x"), FormatError);
  EXPECT_THROW(deserialize_spec("nonsense"), FormatError);
}

TEST(Arch, ValidationRejectsBadHyperparameters) {
  ArchSpec s = parse_arch("blvnet-tam-50");
  s.r = 4;
  EXPECT_THROW(s.validate(), ValueError);
  s = parse_arch("blvnet-tam-50");
  s.alpha = 3;
  EXPECT_THROW(s.validate(), ValueError);
  s = parse_arch("blvnet-tam-50");
  s.n_pairs = 0;
  EXPECT_THROW(s.validate(), ValueError);
}

TEST(Routing, PairsOddAndEvenFrames) {
  const auto plan = route_frames(8, parse_arch("blvnet-tam-50"));
  ASSERT_EQ(plan.pairs.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(plan.pairs[static_cast<std::size_t>(k)].big, 2 * k + 1);
    EXPECT_EQ(plan.pairs[static_cast<std::size_t>(k)].little, 2 * k + 2);
    EXPECT_EQ(plan.output_source[static_cast<std::size_t>(2 * k)], plan.output_source[static_cast<std::size_t>(2 * k + 1)]);
  }
  ArchSpec swapped = parse_arch("blvnet-50");
  swapped.swap_branches = true;
  EXPECT_EQ(route_frames(4, swapped).pairs[1].big, 4);
  const auto tsn = route_frames(3, parse_arch("tsn-50"));
  EXPECT_EQ(tsn.pairs.size(), 3u);
}

TEST(Routing, OddFrameCountIsRejected) {
  try {
    route_frames(7, parse_arch("blvnet-tam-50"));
    FAIL() << "odd frame count accepted";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("even"), std::string::npos);
  }
  const auto net = build_network(tiny("blvnet-tam-tiny"));
  EXPECT_THROW(forward_video(net, randn({3, 3, 32, 32}, 1, DType::f32)), ShapeError);
}

TEST(Network, TinyStageShapes) {
  const auto s = tiny("blvnet-tam-tiny");
  const auto net = build_network(s);
  const auto r = net.forward(Var(clip_for(s, 1)), {.capture_stages = true});
  std::map<std::string, std::int64_t> side;
  for (const auto& [name, v] : r.stages) side[name] = v.shape()[2];
  EXPECT_EQ(side["conv1"], 16);
  EXPECT_EQ(side["stem"], 8);
  EXPECT_EQ(side["layer1"], 4);
  EXPECT_EQ(side["layer2"], 2);
  EXPECT_EQ(side["layer3"], 2);
  EXPECT_EQ(side["layer4"], 1);
  EXPECT_EQ(r.logits.shape(), (Shape{1, 5}));
}

TEST(Network, EveryStageDuplicatesWithinPairs) {
  for (const char* name : {"blvnet-tiny", "blvnet-tam-tiny"}) {
    const auto s = tiny(name, 3);
    auto bo = BuildOptions{};
    bo.tam_init = tam::TamInit::identity_noise;
    const auto net = build_network(s, bo);
    const auto r = net.forward(Var(clip_for(s, 2)), {.capture_stages = true});
    EXPECT_NO_THROW(check_pair_duplication(net, r)) << name;
    EXPECT_GE(r.stages.size(), 5u);
  }
}

TEST(Network, IdentityTamIsTransparent) {
  const auto with = build_network(tiny("blvnet-tam-tiny"));
  const auto without = build_network(tiny("blvnet-tiny"));
  const auto x = clip_for(with.spec(), 3);
  for (bool training : {false, true}) {
    const auto a = with.forward(Var(x), {.training = training}).logits.value();
    const auto b = without.forward(Var(x), {.training = training}).logits.value();
    EXPECT_TRUE(a.identical(b)) << "training=" << training;
  }
  EXPECT_GT(with.params().param_count(), without.params().param_count());
}

TEST(Network, ForwardVideoGivesAProbabilityVector) {
  for (const char* name : {"tsn-tiny", "tsn-blnet-tiny", "blvnet-tiny", "blvnet-tam-tiny"}) {
    const auto s = tiny(name, 2, 4);
    const auto net = build_network(s);
    const auto p = forward_video(net, clip_for(s, 4)).to_vector();
    ASSERT_EQ(p.size(), 4u);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-5) << name;
  }
}

TEST(Network, RejectsWrongInputShape) {
  const auto s = tiny("blvnet-tam-tiny");
  const auto net = build_network(s);
  EXPECT_THROW(net.forward(Var(randn({4, 3, 24, 24}, 1, DType::f32))), ShapeError);
  EXPECT_THROW(forward_video(net, randn({6, 3, 32, 32}, 1, DType::f32)), ShapeError);
}

TEST(Network, SameSeedSameParametersDifferentSeedDifferent) {
  const auto s = tiny("blvnet-tam-tiny");
  BuildOptions a, b;
  b.seed = 1;
  const auto n1 = build_network(s, a), n2 = build_network(s, a), n3 = build_network(s, b);
  const auto& e1 = n1.params().entries();
  bool any_diff = false;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    EXPECT_TRUE(e1[i].var.value().identical(n2.params().entries()[i].var.value())) << e1[i].name;
    any_diff = any_diff || !e1[i].var.value().identical(n3.params().entries()[i].var.value());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Network, SharedParametersKeepTheirValuesAcrossVariants) {
  const auto tam = build_network(tiny("blvnet-tam-tiny"));
  const auto plain = build_network(tiny("blvnet-tiny"));
  for (const auto& e : plain.params().entries()) {
    ASSERT_TRUE(tam.params().contains(e.name)) << e.name;
    EXPECT_TRUE(tam.params().get(e.name).value().identical(e.var.value())) << e.name;
  }
}

TEST(Network, InferenceLeavesBuffersAlone) {
  const auto s = tiny("blvnet-tam-tiny");
  auto net = build_network(s);
  const auto before = net.params().get("conv1.bn.running_mean").value().clone();
  net.forward(Var(clip_for(s, 5)));
  EXPECT_TRUE(net.params().get("conv1.bn.running_mean").value().identical(before));
  net.forward(Var(clip_for(s, 5)), {.training = true});
  EXPECT_FALSE(net.params().get("conv1.bn.running_mean").value().identical(before));
}

TEST(Network, ThreadCountDoesNotChangeLogits) {
  const auto s = tiny("blvnet-tam-tiny", 4);
  const auto net = build_network(s);
  const auto x = clip_for(s, 6);
  const int before = num_threads();
  set_num_threads(1);
  const auto a = net.forward(Var(x)).logits.value();
  set_num_threads(3);
  const auto b = net.forward(Var(x)).logits.value();
  set_num_threads(before);
  EXPECT_TRUE(a.identical(b));
}

TEST(BlModule, ShapesAndNames) {
  BlModuleSpec spec;
  spec.arch = parse_arch("blvnet-tam-tiny");
  spec.in_channels = 8;
  spec.out_channels = 16;
  spec.frames = 2;
  spec.size = 8;
  const auto net = build_bl_module(spec);
  const auto out = net.forward(Var(randn({4, 8, 8, 8}, 1, DType::f32))).logits;
  EXPECT_EQ(out.shape(), (Shape{4, 16, 4, 4}));
  for (const auto& e : net.params().entries()) EXPECT_EQ(e.name.rfind("module", 0), 0u) << e.name;
  EXPECT_TRUE(net.params().contains("module.tam.weight"));
}

}  // namespace
}  // namespace blvnet
