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

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lfdcu/errors.hpp"
#include "lfdcu/lowlight_sim.hpp"
#include "lfdcu/train.hpp"
#include "lfdcu/unfold.hpp"

namespace lfdcu::io {

using Json = nlohmann::json;

inline FeatureBlock parse_feature_block(const std::string& s) {
  if (s == "dpef") return FeatureBlock::kDpef;
  if (s == "sas") return FeatureBlock::kSas;
  if (s == "simplified") return FeatureBlock::kSimplified;
  throw ConfigError("unknown feature block '" + s + "'");
}

inline IlluminationMode parse_illumination(const std::string& s) {
  if (s == "signal") return IlluminationMode::kSignalDependent;
  if (s == "dual") return IlluminationMode::kDualVariable;
  throw ConfigError("unknown illumination mode '" + s + "'");
}

inline AlphaMode parse_alpha_mode(const std::string& s) {
  if (s == "fixed") return AlphaMode::kFixed;
  if (s == "dynamic") return AlphaMode::kDynamic;
  throw ConfigError("unknown alpha mode '" + s + "'");
}

inline const char* alpha_mode_name(AlphaMode m) {
  return m == AlphaMode::kFixed ? "fixed" : "dynamic";
}

namespace detail {

template <typename V>
void read_key(const Json& j, const char* key, V& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<V>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys,
                           const std::string& section) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + section);
  }
}

}  // namespace detail

inline Json to_json(const ModelConfig& c) {
  return Json{{"stages", c.stages},
              {"layers", c.layers},
              {"channels", c.channels},
              {"use_cdc", c.use_cdc},
              {"feature_block", feature_block_name(c.feature_block)},
              {"share_stage_weights", c.share_stage_weights},
              {"illumination", illumination_name(c.illumination)},
              {"clamp_floor", c.clamp_floor},
              {"match_param_count", c.match_param_count},
              {"views_u", c.views_u},
              {"views_v", c.views_v},
              {"image_channels", c.image_channels}};
}

inline ModelConfig model_config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"stages", "layers", "channels", "use_cdc", "feature_block",
                          "share_stage_weights", "illumination", "clamp_floor",
                          "match_param_count", "views_u", "views_v", "image_channels"},
                         "model");
  ModelConfig c;
  detail::read_key(j, "stages", c.stages);
  detail::read_key(j, "layers", c.layers);
  detail::read_key(j, "channels", c.channels);
  detail::read_key(j, "use_cdc", c.use_cdc);
  detail::read_key(j, "share_stage_weights", c.share_stage_weights);
  detail::read_key(j, "clamp_floor", c.clamp_floor);
  detail::read_key(j, "match_param_count", c.match_param_count);
  detail::read_key(j, "views_u", c.views_u);
  detail::read_key(j, "views_v", c.views_v);
  detail::read_key(j, "image_channels", c.image_channels);
  std::string s;
  if (j.contains("feature_block")) {
    detail::read_key(j, "feature_block", s);
    c.feature_block = parse_feature_block(s);
  }
  if (j.contains("illumination")) {
    detail::read_key(j, "illumination", s);
    c.illumination = parse_illumination(s);
  }
  c.validate();
  return c;
}

inline Json to_json(const NoiseParams& p) {
  return Json{{"alpha_mode", alpha_mode_name(p.alpha_mode)},
              {"alpha", p.alpha},
              {"alpha_range", {p.alpha_range[0], p.alpha_range[1]}},
              {"sigma255", p.gaussian_sigma_255},
              {"poisson_gain", p.poisson_gain},
              {"seed", p.seed}};
}

inline NoiseParams noise_params_from_json(const Json& j) {
  detail::reject_unknown(
      j, {"alpha_mode", "alpha", "alpha_range", "sigma255", "poisson_gain", "seed"},
      "noise");
  NoiseParams p;
  std::string mode;
  if (j.contains("alpha_mode")) {
    detail::read_key(j, "alpha_mode", mode);
    p.alpha_mode = parse_alpha_mode(mode);
  }
  detail::read_key(j, "alpha", p.alpha);
  detail::read_key(j, "alpha_range", p.alpha_range);
  detail::read_key(j, "sigma255", p.gaussian_sigma_255);
  detail::read_key(j, "poisson_gain", p.poisson_gain);
  detail::read_key(j, "seed", p.seed);
  p.validate();
  return p;
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"crop_size", c.crop_size},   {"batch_size", c.batch_size},
              {"lr0", c.lr0},               {"halve_every", c.halve_every},
              {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},     {"epochs", c.epochs},
              {"seed", c.seed},             {"val_every", c.val_every}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"crop_size", "batch_size", "lr0", "halve_every", "adam_beta1",
                          "adam_beta2", "adam_eps", "epochs", "seed", "val_every",
                          "loss"},
                         "train");
  TrainConfig c;
  detail::read_key(j, "crop_size", c.crop_size);
  detail::read_key(j, "batch_size", c.batch_size);
  detail::read_key(j, "lr0", c.lr0);
  detail::read_key(j, "halve_every", c.halve_every);
  detail::read_key(j, "adam_beta1", c.adam_beta1);
  detail::read_key(j, "adam_beta2", c.adam_beta2);
  detail::read_key(j, "adam_eps", c.adam_eps);
  detail::read_key(j, "epochs", c.epochs);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "val_every", c.val_every);
  c.validate();
  return c;
}

inline Json to_json(const LossWeights& w) {
  return Json{{"l1", w.l1}, {"ssim", w.ssim}, {"perceptual", w.perceptual}};
}

inline LossWeights loss_weights_from_json(const Json& j) {
  detail::reject_unknown(j, {"l1", "ssim", "perceptual"}, "loss");
  LossWeights w;
  detail::read_key(j, "l1", w.l1);
  detail::read_key(j, "ssim", w.ssim);
  detail::read_key(j, "perceptual", w.perceptual);
  w.validate();
  return w;
}

/// Contents of the experiment config file: {"model":..,"noise":..,"train":{..,"loss":..}}.
struct ExperimentConfig {
  ModelConfig model;
  NoiseParams noise;
  TrainConfig train;
  LossWeights loss;
};

inline Json to_json(const ExperimentConfig& c) {
  Json train = to_json(c.train);
  train["loss"] = to_json(c.loss);
  return Json{{"model", to_json(c.model)}, {"noise", to_json(c.noise)}, {"train", train}};
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  detail::reject_unknown(j, {"model", "noise", "train"}, "config");
  ExperimentConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("noise")) c.noise = noise_params_from_json(j.at("noise"));
  if (j.contains("train")) {
    c.train = train_config_from_json(j.at("train"));
    if (j.at("train").contains("loss"))
      c.loss = loss_weights_from_json(j.at("train").at("loss"));
  }
  return c;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

}  // namespace lfdcu::io
