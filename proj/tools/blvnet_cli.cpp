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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blvnet/analyzer.hpp"
#include "blvnet/arch.hpp"
#include "blvnet/checkpoint.hpp"
#include "blvnet/dataio.hpp"
#include "blvnet/error.hpp"
#include "blvnet/gradcheck.hpp"
#include "blvnet/network.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/parallel.hpp"
#include "blvnet/trainer.hpp"
#include "json.hpp"

namespace {

using blvnet::ArchSpec;
using nlohmann::json;

enum Exit { ok = 0, failed = 1, usage = 2, bad_data = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string format = "text";
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
}

struct ArchFlags {
  std::string arch;
  std::string frames;
  std::optional<int> classes;
  std::optional<int> input_size;
  bool double_flops = false;
};

void add_arch_flags(CLI::App* cmd, ArchFlags& a) {
  cmd->add_option("--arch", a.arch, "e.g. blvnet-tam-50, blvnet-26, tsn-tiny")->required();
  cmd->add_option("--frames", a.frames, "NxM: N pipeline instances of M frames (8x2 = 16 frames)");
  cmd->add_option("--classes", a.classes, "Classifier width");
  cmd->add_option("--input-size", a.input_size, "Square crop size");
  cmd->add_flag("--double-flops", a.double_flops, "Count multiply and add separately (2 x MACs)");
}

ArchSpec resolve_arch(const ArchFlags& a) {
  ArchSpec spec = blvnet::parse_arch(a.arch);
  if (!a.frames.empty()) {
    int n = 0, m = spec.frames_per_instance();
    char x = 0, rest = 0;
    std::istringstream is(a.frames);
    if (a.frames.find_first_of("xX") != std::string::npos) {
      if (!(is >> n >> x >> m) || (x != 'x' && x != 'X') || (is >> rest)) {
        throw UsageError("--frames expects NxM, got '" + a.frames + "'");
      }
    } else if (!(is >> n) || (is >> rest)) {
      throw UsageError("--frames expects NxM, got '" + a.frames + "'");
    }
    if (m != spec.frames_per_instance()) {
      throw UsageError(a.arch + " takes " + std::to_string(spec.frames_per_instance()) +
                       " frame(s) per instance; got --frames " + a.frames);
    }
    spec.n_pairs = n;
  }
  if (a.classes) spec.num_classes = *a.classes;
  if (a.input_size) spec.input_size = *a.input_size;
  spec.validate();
  return spec;
}

void emit(const Common& c, const json& j, const std::string& text) {
  if (c.format == "json") {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << text;
  }
}

int cmd_summarize(const Common& c, const ArchFlags& a, bool layers) {
  const ArchSpec spec = resolve_arch(a);
  const auto report = blvnet::analyzer::count_macs(spec);
  blvnet::analyzer::FormatOptions fo;
  fo.double_flops = a.double_flops;
  fo.layers = layers;
  json j = json::parse(blvnet::analyzer::to_json(report, fo));
  const double tam_param_pct = 100.0 * static_cast<double>(report.tam_params) / static_cast<double>(report.params);
  const double tam_mac_pct = 100.0 * static_cast<double>(report.tam_macs) / static_cast<double>(report.macs);
  j["tam_param_percent"] = tam_param_pct;
  j["tam_mac_percent"] = tam_mac_pct;
  if (!layers) j.erase("layers");
  std::string text = blvnet::analyzer::to_text(report, fo);
  char buf[128];
  std::snprintf(buf, sizeof buf, "tam share params %.4f%%  macs %.4f%%\n", tam_param_pct, tam_mac_pct);
  emit(c, j, text + buf);
  return ok;
}

int cmd_gradcheck(const Common& c, const std::string& module, const std::string& dtype_name) {
  const auto dtype = dtype_name == "f32" ? blvnet::DType::f32 : blvnet::DType::f64;
  std::vector<std::string> suites;
  if (module == "all") {
    suites = blvnet::gradcheck::suite_names();
  } else {
    suites = {module};
  }
  json out = json::array();
  std::ostringstream text;
  bool all_passed = true;
  for (const auto& name : suites) {
    const auto r = blvnet::gradcheck::run_suite(name, dtype, c.seed);
    all_passed = all_passed && r.passed();
    json groups = json::array();
    char buf[256];
    std::size_t w = 5;
    for (const auto& g : r.groups) w = std::max(w, g.name.size());
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %13s  %s\n", static_cast<int>(w), "group", "checked", "max_rel_error",
                  "status");
    text << buf;
    for (const auto& g : r.groups) {
      groups.push_back({{"name", g.name}, {"checked", g.checked}, {"max_rel_error", g.max_rel_error}, {"passed", g.passed}});
      std::snprintf(buf, sizeof buf, "%-*s  %8lld  %13.3e  %s\n", static_cast<int>(w), g.name.c_str(),
                    static_cast<long long>(g.checked), g.max_rel_error, g.passed ? "ok" : "FAIL");
      text << buf;
    }
    std::snprintf(buf, sizeof buf, "%s %s %s: max rel error %.3e (threshold %.0e) in %.1f s\n",
                  r.passed() ? "PASS" : "FAIL", name.c_str(), dtype_name.c_str(), r.max_rel_error(), r.threshold,
                  r.seconds);
    text << buf;
    out.push_back({{"module", name},
                   {"dtype", dtype_name},
                   {"threshold", r.threshold},
                   {"seconds", r.seconds},
                   {"max_rel_error", r.max_rel_error()},
                   {"passed", r.passed()},
                   {"groups", groups}});
  }
  emit(c, json{{"passed", all_passed}, {"suites", out}}, text.str());
  return all_passed ? ok : failed;
}

struct ToyFlags {
  std::optional<std::string> out;
  std::vector<std::string> archs;
  bool verbose = false;
};

int cmd_train_toy(const Common& c, blvnet::train::ToySetup setup, const ToyFlags& f) {
  setup.config.seed = c.seed;
  setup.config.validate();
  if (setup.frames < 2 || setup.frames % 2 != 0) throw UsageError("--clip-frames must be even and at least 2");
  auto variants = blvnet::train::toy_variants(setup);
  if (!f.archs.empty()) {
    std::vector<ArchSpec> chosen;
    for (const auto& name : f.archs) {
      auto it = std::find_if(variants.begin(), variants.end(),
                             [&](const ArchSpec& s) { return blvnet::arch_name(s) == name; });
      if (it == variants.end()) throw UsageError("unknown toy variant '" + name + "' (tsn-tiny, blvnet-tiny, blvnet-tam-tiny)");
      chosen.push_back(*it);
    }
    variants = chosen;
  }
  blvnet::train::ToyOptions opts;
  if (f.out) opts.out_dir = *f.out;
  opts.verbose = f.verbose;
  const auto data = blvnet::train::make_toy_data(setup);
  const auto reports = blvnet::train::train_toy(variants, data.train, data.val, setup.config, opts);

  json out = json::array();
  std::ostringstream text;
  char buf[256];
  for (const auto& r : reports) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
      epochs.push_back({{"epoch", e.epoch},
                        {"lr", e.lr},
                        {"train_loss", e.train_loss},
                        {"train_acc", e.train_acc},
                        {"val_acc", e.val_acc}});
    }
    out.push_back({{"arch", r.arch},
                   {"first_batch_loss", r.first_batch_loss},
                   {"final_val_acc", r.final_val_acc},
                   {"seconds", r.seconds},
                   {"epochs", epochs}});
    std::snprintf(buf, sizeof buf, "%-16s val_acc %.3f  first_batch_loss %.6f  %.1f s\n", r.arch.c_str(),
                  r.final_val_acc, r.first_batch_loss, r.seconds);
    text << buf;
  }
  emit(c,
       json{{"seed", c.seed},
            {"train_clips", setup.train_clips},
            {"val_clips", setup.val_clips},
            {"frames", setup.frames},
            {"size", setup.size},
            {"epochs", setup.config.epochs},
            {"variants", out}},
       text.str());
  return ok;
}

struct InferFlags {
  std::string checkpoint;
  std::string manifest;
  std::optional<std::string> clip;
  std::optional<std::string> preprocess;
  int top_k = 5;
};

int cmd_infer(const Common& c, const InferFlags& f) {
  namespace fs = std::filesystem;
  if (!fs::exists(f.checkpoint)) throw blvnet::IoError("no such checkpoint: " + f.checkpoint);
  if (!fs::exists(f.manifest)) throw blvnet::IoError("no such manifest: " + f.manifest);
  const blvnet::Network net = blvnet::load_checkpoint(fs::path(f.checkpoint));
  const auto& spec = net.spec();
  auto entries = blvnet::data::read_manifest(f.manifest);
  if (f.clip) {
    std::erase_if(entries, [&](const auto& e) { return e.clip_id != *f.clip; });
    if (entries.empty()) throw UsageError("clip '" + *f.clip + "' is not in " + f.manifest);
  }
  blvnet::data::PreprocessConfig pre;
  if (f.preprocess) {
    if (!fs::exists(*f.preprocess)) throw blvnet::IoError("no such preprocess config: " + *f.preprocess);
    pre = blvnet::data::load_preprocess_config(*f.preprocess);
  } else {
    pre.crop = spec.input_size;
    pre.resize = static_cast<int>(std::lround(spec.input_size * 256.0 / 224.0));
  }
  if (pre.crop != spec.input_size) {
    throw UsageError("preprocess crop " + std::to_string(pre.crop) + " does not match the network input " +
                     std::to_string(spec.input_size));
  }
  const int k = std::clamp(f.top_k, 1, spec.num_classes);
  const auto dir = fs::path(f.manifest).parent_path();
  json clips = json::array();
  std::ostringstream text;
  for (const auto& entry : entries) {
    const auto frames = blvnet::data::load_clip(dir, entry);
    const auto plan = blvnet::data::uniform_sample(static_cast<std::int64_t>(frames.size()), spec.num_frames(),
                                                   blvnet::data::SampleMode::infer, c.seed);
    std::vector<blvnet::data::Image> picked;
    for (auto i : plan.indices) picked.push_back(frames[static_cast<std::size_t>(i)]);
    blvnet::Tensor video;
    if (picked[0].height == spec.input_size && picked[0].width == spec.input_size) {
      video = blvnet::data::frames_to_tensor(picked, pre);
    } else {
      std::vector<double> values;
      for (const auto& img : picked) {
        const auto row = blvnet::data::preprocess_infer(img, pre).to_vector();
        values.insert(values.end(), row.begin(), row.end());
      }
      video = blvnet::Tensor::from_values(
          {static_cast<std::int64_t>(picked.size()), 3, spec.input_size, spec.input_size}, values, blvnet::DType::f32);
    }
    const auto probs = blvnet::forward_video(net, video).to_vector();
    std::vector<int> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    json top = json::array();
    text << entry.clip_id << " label " << entry.label << ":";
    char buf[64];
    for (int i = 0; i < k; ++i) {
      top.push_back({{"class", order[i]}, {"prob", probs[order[i]]}});
      std::snprintf(buf, sizeof buf, " %d %.4f", order[i], probs[order[i]]);
      text << buf;
    }
    text << "\n";
    clips.push_back({{"id", entry.clip_id}, {"label", entry.label}, {"top", top}, {"probs", probs}});
  }
  emit(c, json{{"arch", blvnet::arch_name(spec)}, {"checkpoint", f.checkpoint}, {"clips", clips}}, text.str());
  return ok;
}

int cmd_sample_plan(const Common& c, std::int64_t frames, int segments, const std::string& mode) {
  const auto m = mode == "train" ? blvnet::data::SampleMode::train : blvnet::data::SampleMode::infer;
  const auto plan = blvnet::data::uniform_sample(frames, segments, m, c.seed);
  std::ostringstream text;
  for (std::size_t i = 0; i < plan.indices.size(); ++i) text << (i ? " " : "") << plan.indices[i];
  text << "\n";
  emit(c, json{{"frames", frames}, {"segments", segments}, {"mode", mode}, {"seed", c.seed}, {"indices", plan.indices}},
       text.str());
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Big-Little video networks with temporal aggregation: build, analyze, verify, train, infer."};
  app.require_subcommand(1);
  app.set_version_flag("--version", BLVNET_VERSION);
  std::optional<int> threads;
  app.add_option("--threads", threads, "Worker threads (default: BLVNET_NUM_THREADS or all cores)");

  Common c_sum, c_flops, c_grad, c_toy, c_infer, c_plan;

  ArchFlags a_sum;
  auto* summarize = app.add_subcommand("summarize", "Per-layer table with shapes, parameters and MACs");
  add_arch_flags(summarize, a_sum);
  add_common(summarize, c_sum);

  ArchFlags a_flops;
  auto* flops = app.add_subcommand("flops", "Cost totals: parameters, MACs, TAM share, activation memory");
  add_arch_flags(flops, a_flops);
  add_common(flops, c_flops);

  std::string gc_module = "all", gc_dtype = "f64";
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--module", gc_module, "Suite to run")
      ->check(CLI::IsMember({"all", "tam", "bl-module", "full-tiny"}))
      ->capture_default_str();
  gradcheck->add_option("--dtype", gc_dtype, "Precision")->check(CLI::IsMember({"f64", "f32"}))->capture_default_str();
  add_common(gradcheck, c_grad);

  auto toy = blvnet::train::default_toy_setup();
  ToyFlags toy_flags;
  auto* train_toy = app.add_subcommand("train-toy", "Train the tiny variants on the synthetic motion task");
  train_toy->add_option("--out", toy_flags.out, "Write <arch>.ckpt and <arch>.csv here");
  train_toy->add_option("--arch", toy_flags.archs, "Subset of tsn-tiny, blvnet-tiny, blvnet-tam-tiny");
  train_toy->add_option("--train-clips", toy.train_clips)->capture_default_str()->check(CLI::PositiveNumber);
  train_toy->add_option("--val-clips", toy.val_clips)->capture_default_str()->check(CLI::PositiveNumber);
  train_toy->add_option("--clip-frames", toy.frames, "Frames per clip")->capture_default_str();
  train_toy->add_option("--size", toy.size, "Frame side in pixels")->capture_default_str();
  train_toy->add_option("--epochs", toy.config.epochs)->capture_default_str();
  train_toy->add_option("--lr", toy.config.lr)->capture_default_str();
  train_toy->add_option("--batch-size", toy.config.batch_size)->capture_default_str();
  train_toy->add_option("--milestones", toy.config.milestones, "Epochs where the lr drops")->capture_default_str();
  train_toy->add_option("--noise", toy.motion.noise, "Background noise amplitude")->capture_default_str();
  train_toy->add_option("--speed", toy.motion.speed, "Pixels per step")->capture_default_str();
  train_toy->add_flag("--verbose", toy_flags.verbose, "Per-epoch log on stderr");
  add_common(train_toy, c_toy);

  InferFlags infer_flags;
  auto* infer = app.add_subcommand("infer", "Top-k classes for clips listed in a manifest");
  infer->add_option("--checkpoint", infer_flags.checkpoint)->required();
  infer->add_option("--manifest", infer_flags.manifest)->required();
  infer->add_option("--clip", infer_flags.clip, "Only this clip id");
  infer->add_option("--preprocess", infer_flags.preprocess, "key=value preprocessing config");
  infer->add_option("--top-k", infer_flags.top_k)->capture_default_str();
  add_common(infer, c_infer);

  std::int64_t plan_frames = 0;
  int plan_segments = 0;
  std::string plan_mode = "infer";
  auto* sample_plan = app.add_subcommand("sample-plan", "Frame indices picked from a video");
  sample_plan->add_option("--frames", plan_frames, "Video length L")->required();
  sample_plan->add_option("--segments", plan_segments, "Frames to pick n")->required();
  sample_plan->add_option("--mode", plan_mode)->check(CLI::IsMember({"infer", "train"}))->capture_default_str();
  add_common(sample_plan, c_plan);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    if (threads) blvnet::set_num_threads(*threads);
    if (*summarize) return cmd_summarize(c_sum, a_sum, true);
    if (*flops) return cmd_summarize(c_flops, a_flops, false);
    if (*gradcheck) return cmd_gradcheck(c_grad, gc_module, gc_dtype);
    if (*train_toy) return cmd_train_toy(c_toy, toy, toy_flags);
    if (*infer) return cmd_infer(c_infer, infer_flags);
    if (*sample_plan) return cmd_sample_plan(c_plan, plan_frames, plan_segments, plan_mode);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const blvnet::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const blvnet::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bad_data;
  } catch (const blvnet::ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const blvnet::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failed;
  }
  return usage;
}
