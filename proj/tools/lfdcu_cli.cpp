// Copyright 2026 The lfdcu Authors.
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

// Command-line front end: simulate, synth, train, enhance, eval, svd, epi.

#include <glob.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lfdcu.hpp"

namespace fs = std::filesystem;
using namespace lfdcu;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

struct NoiseFlags {
  std::string alpha_mode = "fixed";
  double alpha = 0.2;
  std::vector<double> alpha_range{0.1, 0.3};
  double sigma255 = 20.0;
  double poisson_gain = 0.0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--alpha-mode", alpha_mode)->check(CLI::IsMember({"fixed", "dynamic"}));
    cmd->add_option("--alpha", alpha);
    cmd->add_option("--alpha-range", alpha_range)->expected(2);
    cmd->add_option("--sigma255", sigma255);
    cmd->add_option("--poisson-gain", poisson_gain);
    cmd->add_option("--seed", seed);
  }

  NoiseParams params() const {
    NoiseParams p;
    p.alpha_mode = io::parse_alpha_mode(alpha_mode);
    p.alpha = alpha;
    p.alpha_range = {alpha_range.at(0), alpha_range.at(1)};
    p.gaussian_sigma_255 = sigma255;
    p.poisson_gain = poisson_gain;
    p.seed = seed;
    p.validate();
    return p;
  }
};

std::vector<fs::path> expand_inputs(const std::string& pattern) {
  if (pattern.find_first_of("*?[") == std::string::npos) return {fs::path(pattern)};
  glob_t g{};
  std::vector<fs::path> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i)
      if (fs::is_directory(g.gl_pathv[i])) out.emplace_back(g.gl_pathv[i]);
  ::globfree(&g);
  if (out.empty()) throw IoError("no light-field directories match " + pattern);
  return out;
}

std::string provenance(const NoiseParams& p, double alpha, std::size_t index) {
  nlohmann::json j = io::to_json(p);
  j["alpha_used"] = alpha;
  j["index"] = index;
  return j.dump();
}

// Output names for a multi-directory input: the path below the shared prefix.
std::string relative_name(const fs::path& p, const std::vector<fs::path>& all) {
  auto prefix = all.front().parent_path();
  for (const auto& q : all)
    while (!prefix.empty() && q.string().rfind(prefix.string() + "/", 0) != 0)
      prefix = prefix.parent_path();
  std::string name = fs::relative(p, prefix).string();
  std::replace(name.begin(), name.end(), '/', '_');
  return name;
}

int run_simulate(const std::string& in, const fs::path& out, const NoiseFlags& nf, int depth) {
  const NoiseParams p = nf.params();
  const auto inputs = expand_inputs(in);
  Rng rng(p.seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto src = io::load_lf_dir<double>(inputs[i]).lf;
    auto cap = simulate_lowlight(src, p, rng);
    cap.lf.set_meta(provenance(p, cap.alpha_used, i));
    const fs::path dst = inputs.size() == 1 ? out : out / relative_name(inputs[i], inputs);
    io::save_lf_dir(cap.lf, dst, depth);
    std::cout << dst.string() << " alpha=" << cap.alpha_used << '\n';
  }
  return kOk;
}

struct SynthFlags {
  std::size_t count = 8;
  std::size_t views = 3;
  std::size_t size = 48;
  double disparity = 1.0;
  std::uint64_t scene_seed = 0;
};

int run_synth(const fs::path& out, const SynthFlags& sf, const NoiseFlags& nf, int depth) {
  const NoiseParams p = nf.params();
  Rng scene_rng(sf.scene_seed);
  Rng noise_rng(p.seed);
  const std::size_t pad = static_cast<std::size_t>(
      2 * std::ceil(std::abs(sf.disparity) * static_cast<double>(sf.views / 2)));
  for (std::size_t i = 0; i < sf.count; ++i) {
    auto gt = make_synthetic_scene(
        make_base_image<double>(sf.size + pad, sf.size + pad, 3, scene_rng), sf.disparity,
        sf.views, sf.views);
    auto cap = simulate_lowlight(gt, p, noise_rng);
    cap.lf.set_meta(provenance(p, cap.alpha_used, i));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", i);
    io::save_sample(Sample<double>{name, cap.lf, gt}, out, depth);
  }
  std::cout << "wrote " << sf.count << " scenes to " << out.string() << '\n';
  return kOk;
}

struct ModelFlags {
  std::optional<std::size_t> stages, layers, channels;
  std::optional<std::string> feature_block, illumination;
  bool no_cdc = false;
  bool share = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--stages", stages);
    cmd->add_option("--layers", layers);
    cmd->add_option("--channels", channels);
    cmd->add_option("--feature-block", feature_block)
        ->check(CLI::IsMember({"dpef", "sas", "simplified"}));
    cmd->add_flag("--no-cdc", no_cdc);
    cmd->add_flag("--share-weights", share);
    cmd->add_option("--illumination", illumination)->check(CLI::IsMember({"signal", "dual"}));
  }

  void apply(ModelConfig& c) const {
    if (stages) c.stages = *stages;
    if (layers) c.layers = *layers;
    if (channels) c.channels = *channels;
    if (feature_block) c.feature_block = io::parse_feature_block(*feature_block);
    if (illumination) c.illumination = io::parse_illumination(*illumination);
    if (no_cdc) c.use_cdc = false;
    if (share) c.share_stage_weights = true;
  }
};

struct TrainFlags {
  std::string config, data, out, val, log;
  std::optional<std::size_t> epochs, crop_size;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainFlags& tf, const ModelFlags& mf) {
  io::ExperimentConfig cfg;
  if (!tf.config.empty()) cfg = io::load_experiment_config(tf.config);
  mf.apply(cfg.model);
  if (tf.epochs) cfg.train.epochs = *tf.epochs;
  if (tf.seed) cfg.train.seed = *tf.seed;
  if (tf.crop_size) cfg.train.crop_size = *tf.crop_size;
  const auto data = io::load_dataset<double>(tf.data);
  const Dims5 d = data.front().input.dims();
  cfg.model.views_u = d.u;
  cfg.model.views_v = d.v;
  cfg.model.image_channels = d.c;
  cfg.model.validate();
  cfg.train.validate();
  std::vector<Sample<double>> val;
  if (!tf.val.empty()) val = io::load_dataset<double>(tf.val);

  std::ofstream log_file;
  if (!tf.log.empty()) {
    log_file.open(tf.log);
    if (!log_file) throw IoError("cannot open " + tf.log);
  }
  std::ostream& log = tf.log.empty() ? std::cout : log_file;
  nlohmann::json head{{"config", io::to_json(cfg)}, {"samples", data.size()}};
  log << head.dump() << '\n';
  const auto init = Model<double>::make(cfg.model, cfg.train.seed);
  const auto result = train(init, data, cfg.train, cfg.loss, val, nullptr,
                            [&](const EpochLog& e) { log << to_json(e).dump() << std::endl; });
  const auto crc = io::save_weights(result.model, tf.out);
  std::cerr << "saved " << tf.out << " crc32=" << crc << '\n';
  return kOk;
}

int run_enhance(const fs::path& weights, const fs::path& in, const fs::path& out,
                const std::string& dump, int depth) {
  const auto model = io::load_weights<double>(weights);
  const auto lf = io::load_lf_dir<double>(in).lf;
  const auto r = enhance(lf, model);
  io::save_lf_dir(r.output, out, depth);
  if (!dump.empty()) {
    for (std::size_t k = 0; k < r.stage_outputs.size(); ++k)
      io::save_lf_dir(r.stage_outputs[k], fs::path(dump) / ("stage_" + std::to_string(k + 1)),
                      depth);
  }
  return kOk;
}

int run_eval(const fs::path& weights, const fs::path& data, const std::string& report,
             const std::string& jsonl) {
  const auto model = io::load_weights<double>(weights);
  const auto samples = io::load_dataset<double>(data);
  const auto table = evaluate_dataset(model, samples);
  if (!report.empty()) {
    std::ostringstream os;
    write_csv(os, table);
    io::write_file_atomic(report, os.str());
  }
  if (!jsonl.empty()) {
    std::ostringstream os;
    write_jsonl(os, table);
    io::write_file_atomic(jsonl, os.str());
  }
  std::cout << "mean psnr_db=" << table.mean.psnr_db << " ssim=" << table.mean.ssim
            << " input_psnr_db=" << table.mean.input_psnr_db << '\n';
  return kOk;
}

int run_svd(const fs::path& in, const std::string& delta_from, std::size_t topk,
            const std::string& out) {
  const auto lf = io::load_lf_dir<double>(in).lf;
  Spectrum spec;
  if (delta_from.empty()) {
    spec = center_sai_spectrum(lf, topk);
  } else {
    const auto model = io::load_weights<double>(delta_from);
    const auto r = enhance(lf, model);
    Tensor<double> comp = lf.data();
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] -= r.final_delta[i];
    spec = center_sai_spectrum(LightField4D<double>(std::move(comp)), topk);
  }
  std::ostringstream os;
  write_spectrum(os, spec);
  if (out.empty() || out == "-") {
    std::cout << os.str();
  } else {
    io::write_file_atomic(out, os.str());
  }
  return kOk;
}

int run_epi(const fs::path& in, const std::string& orientation, std::size_t fixed_angular,
            std::size_t fixed_spatial, const fs::path& out, int depth) {
  const auto lf = io::load_lf_dir<double>(in).lf;
  const auto o = orientation == "h" ? EpiOrientation::kHorizontal : EpiOrientation::kVertical;
  const std::size_t chans = lf.dims().c;
  io::RawImage img;
  img.bit_depth = depth;
  img.channels = chans;
  const double scale = depth == 16 ? 65535.0 : 255.0;
  for (std::size_t c = 0; c < chans; ++c) {
    const auto epi = extract_epi(lf, o, fixed_angular, fixed_spatial, c);
    img.rows = epi.rows;
    img.cols = epi.cols;
    img.samples.resize(epi.rows * epi.cols * chans);
    for (std::size_t i = 0; i < epi.data.size(); ++i)
      img.samples[i * chans + c] = static_cast<std::uint16_t>(std::lround(epi.data[i] * scale));
  }
  io::write_png(out, img);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Low-light light-field enhancement by deep compensation unfolding"};
  app.require_subcommand(1);
  int depth = 16;
  app.add_option("--bit-depth", depth, "PNG bit depth for written images")
      ->check(CLI::IsMember({8, 16}));

  auto* sim = app.add_subcommand("simulate", "Synthesise low-light captures");
  std::string sim_in;
  fs::path sim_out;
  NoiseFlags sim_noise;
  sim->add_option("--in", sim_in, "Light-field directory or glob")->required();
  sim->add_option("--out", sim_out)->required();
  sim_noise.attach(sim);

  auto* syn = app.add_subcommand("synth", "Generate a paired synthetic dataset");
  fs::path syn_out;
  SynthFlags syn_flags;
  NoiseFlags syn_noise;
  syn_noise.alpha_mode = "dynamic";
  syn_noise.sigma255 = 15.0;
  syn->add_option("--out", syn_out)->required();
  syn->add_option("--count", syn_flags.count);
  syn->add_option("--views", syn_flags.views);
  syn->add_option("--size", syn_flags.size, "Spatial size of every view");
  syn->add_option("--disparity", syn_flags.disparity);
  syn->add_option("--scene-seed", syn_flags.scene_seed);
  syn_noise.attach(syn);

  auto* tr = app.add_subcommand("train", "Train a model on a paired dataset");
  TrainFlags tf;
  ModelFlags mf;
  tr->add_option("--config", tf.config)->check(CLI::ExistingFile);
  tr->add_option("--data", tf.data)->required();
  tr->add_option("--out", tf.out, "Checkpoint path")->required();
  tr->add_option("--val", tf.val, "Validation dataset");
  tr->add_option("--log", tf.log, "JSON-lines training log (default stdout)");
  tr->add_option("--epochs", tf.epochs);
  tr->add_option("--seed", tf.seed);
  tr->add_option("--crop-size", tf.crop_size);
  mf.attach(tr);

  auto* en = app.add_subcommand("enhance", "Enhance one light field");
  fs::path en_w, en_in, en_out;
  std::string en_dump;
  en->add_option("--weights", en_w)->required();
  en->add_option("--in", en_in)->required();
  en->add_option("--out", en_out)->required();
  en->add_option("--dump-stages", en_dump, "Directory for per-stage outputs");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a paired dataset");
  fs::path ev_w, ev_data;
  std::string ev_report, ev_jsonl;
  ev->add_option("--weights", ev_w)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--report", ev_report, "CSV report path");
  ev->add_option("--jsonl", ev_jsonl, "JSON-lines report path");

  auto* sv = app.add_subcommand("svd", "Centre-view singular value spectrum");
  fs::path sv_in;
  std::string sv_delta, sv_out;
  std::size_t sv_k = 200;
  sv->add_option("--in", sv_in)->required();
  sv->add_option("--delta-from", sv_delta, "Checkpoint whose compensation is subtracted");
  sv->add_option("--topk", sv_k);
  sv->add_option("--out", sv_out);

  auto* ep = app.add_subcommand("epi", "Write an epipolar-plane image");
  fs::path ep_in, ep_out;
  std::string ep_o = "h";
  std::size_t ep_a = 0, ep_s = 0;
  ep->add_option("--in", ep_in)->required();
  ep->add_option("--orientation", ep_o)->check(CLI::IsMember({"h", "v"}));
  ep->add_option("--fixed-angular", ep_a);
  ep->add_option("--fixed-spatial", ep_s);
  ep->add_option("--out", ep_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) return run_simulate(sim_in, sim_out, sim_noise, depth);
    if (*syn) return run_synth(syn_out, syn_flags, syn_noise, depth);
    if (*tr) return run_train(tf, mf);
    if (*en) return run_enhance(en_w, en_in, en_out, en_dump, depth);
    if (*ev) return run_eval(ev_w, ev_data, ev_report, ev_jsonl);
    if (*sv) return run_svd(sv_in, sv_delta, sv_k, sv_out);
    if (*ep) return run_epi(ep_in, ep_o, ep_a, ep_s, ep_out, depth);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
