/*
 * Copyright 2026 The ibn-forecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ibn/config.hpp"

#include <charconv>
#include <fstream>

namespace ibn::config {

using nlohmann::json;

namespace {

// Keys whose default is null accept these types.
const json kNullable = {{"data.threshold", "number"}, {"mask.seed", "unsigned"}};

std::string join(const std::string& path, const std::string& key)
{
  return path.empty() ? key : path + "." + key;
}

bool compatible(const json& def, const json& value, const std::string& path)
{
  if (def.is_null())
  {
    if (value.is_null()) return true;
    const auto it = kNullable.find(path);
    if (it == kNullable.end()) return false;
    if (*it == "number") return value.is_number();
    return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  }
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_number_unsigned())
    return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  if (def.is_number()) return value.is_number();
  if (def.is_string()) return value.is_string();
  if (def.is_array())
  {
    if (!value.is_array()) return false;
    for (const auto& v : value)
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        return false;
    return true;
  }
  return false;
}

std::string type_name(const json& def, const std::string& path)
{
  if (def.is_null()) return kNullable.contains(path) ? kNullable[path].get<std::string>() : "null";
  if (def.is_boolean()) return "boolean";
  if (def.is_number_unsigned()) return "non-negative integer";
  if (def.is_number()) return "number";
  if (def.is_string()) return "string";
  if (def.is_array()) return "array of non-negative integers";
  return "object";
}

const json& at(const json& j, const char* section, const char* key)
{
  return j.at(section).at(key);
}

template <typename T>
T get(const json& j, const char* section, const char* key)
{
  return at(j, section, key).get<T>();
}

} // namespace

json default_json()
{
  const data::SyntheticOptions syn;
  const ModelConfig model;
  const train::TrainConfig tr;
  return {
    {"data",
     {{"name", "synthetic"},
      {"source", "synthetic"},
      {"series", ""},
      {"adjacency", ""},
      {"coords", ""},
      {"threshold", nullptr},
      {"history", model.h},
      {"horizon", model.l},
      {"train_ratio", 0.7},
      {"val_ratio", 0.1},
      {"synthetic",
       {{"n", syn.n},
        {"t", syn.t},
        {"seed", syn.seed},
        {"alpha", syn.alpha},
        {"beta", syn.beta},
        {"period", syn.period},
        {"noise_std", syn.noise_std}}}}},
    {"model",
     {{"d", model.d},
      {"embed_dim", model.embed_dim},
      {"dropout", model.dropout},
      {"samples", model.samples},
      {"tie_ggcn_weights", model.tie_ggcn_weights},
      {"resample_per_gate", model.resample_per_gate},
      {"deterministic_eval", model.deterministic_eval}}},
    {"train",
     {{"seed", tr.seed},
      {"lr", tr.adam.lr},
      {"beta1", tr.adam.beta1},
      {"beta2", tr.adam.beta2},
      {"eps", tr.adam.eps},
      {"clip_norm", tr.adam.clip_norm},
      {"batch_size", tr.batch_size},
      {"max_epochs", tr.max_epochs},
      {"patience", tr.patience},
      {"train_stride", tr.train_stride},
      {"eval_seed", tr.eval_seed}}},
    {"mask", {{"rate", 0.5}, {"seed", nullptr}}},
    {"ablation",
     {{"uai_to_ia", false},
      {"ggcn_to_agcn", false},
      {"bi_to_uni", false},
      {"seeds", json::array({1, 2, 3})}}},
  };
}

json merge(const json& base, const json& overlay, const std::string& path)
{
  if (!overlay.is_object())
    throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
  json out = base;
  for (const auto& [key, value] : overlay.items())
  {
    const std::string full = join(path, key);
    if (!base.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    const json& def = base.at(key);
    if (def.is_object())
      out[key] = merge(def, value, full);
    else if (!compatible(def, value, full))
      throw ConfigError("config key '" + full + "' expects " + type_name(def, full) + ", got " +
                        value.dump());
    else
      out[key] = value;
  }
  return out;
}

void apply_override(json& config, const std::string& dotted, const std::string& value)
{
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  json patch = parsed;
  std::string rest = dotted;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("malformed override key '" + dotted + "'");
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};

  // A string default given an unquoted value such as a path stays a string.
  const json* def = &config;
  for (const auto& p : parts)
  {
    if (!def->is_object() || !def->contains(p)) break;
    def = &def->at(p);
  }
  if (def->is_string() && !parsed.is_string())
  {
    patch = value;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  }
  config = merge(config, patch);
}

json model_to_json(const ModelConfig& m)
{
  return {{"n", m.n},
          {"h", m.h},
          {"l", m.l},
          {"c", m.c},
          {"d", m.d},
          {"embed_dim", m.embed_dim},
          {"dropout", m.dropout},
          {"samples", m.samples},
          {"uai_to_ia", m.uai_to_ia},
          {"ggcn_to_agcn", m.ggcn_to_agcn},
          {"bi_to_uni", m.bi_to_uni},
          {"tie_ggcn_weights", m.tie_ggcn_weights},
          {"resample_per_gate", m.resample_per_gate},
          {"deterministic_eval", m.deterministic_eval}};
}

ModelConfig model_from_json(const json& j)
{
  ModelConfig m;
  m.n = j.at("n").get<std::size_t>();
  m.h = j.at("h").get<std::size_t>();
  m.l = j.at("l").get<std::size_t>();
  m.c = j.at("c").get<std::size_t>();
  m.d = j.at("d").get<std::size_t>();
  m.embed_dim = j.at("embed_dim").get<std::size_t>();
  m.dropout = j.at("dropout").get<double>();
  m.samples = j.at("samples").get<std::size_t>();
  m.uai_to_ia = j.at("uai_to_ia").get<bool>();
  m.ggcn_to_agcn = j.at("ggcn_to_agcn").get<bool>();
  m.bi_to_uni = j.at("bi_to_uni").get<bool>();
  m.tie_ggcn_weights = j.at("tie_ggcn_weights").get<bool>();
  m.resample_per_gate = j.at("resample_per_gate").get<bool>();
  m.deterministic_eval = j.at("deterministic_eval").get<bool>();
  return m;
}

RunConfig from_json(const json& raw)
{
  const json j = merge(default_json(), raw);
  RunConfig c;

  auto& d = c.data;
  d.name = get<std::string>(j, "data", "name");
  d.source = get<std::string>(j, "data", "source");
  d.series = get<std::string>(j, "data", "series");
  d.adjacency = get<std::string>(j, "data", "adjacency");
  d.coords = get<std::string>(j, "data", "coords");
  if (const auto& t = at(j, "data", "threshold"); !t.is_null()) d.threshold = t.get<double>();
  d.history = get<std::size_t>(j, "data", "history");
  d.horizon = get<std::size_t>(j, "data", "horizon");
  d.train_ratio = get<double>(j, "data", "train_ratio");
  d.val_ratio = get<double>(j, "data", "val_ratio");
  const json& syn = at(j, "data", "synthetic");
  d.synthetic.n = syn.at("n").get<std::size_t>();
  d.synthetic.t = syn.at("t").get<std::size_t>();
  d.synthetic.seed = syn.at("seed").get<std::uint64_t>();
  d.synthetic.alpha = syn.at("alpha").get<double>();
  d.synthetic.beta = syn.at("beta").get<double>();
  d.synthetic.period = syn.at("period").get<double>();
  d.synthetic.noise_std = syn.at("noise_std").get<double>();

  if (d.source != "synthetic" && d.source != "csv")
    throw ConfigError("data.source must be \"synthetic\" or \"csv\", got \"" + d.source + "\"");
  if (d.source == "csv" && d.series.empty())
    throw ConfigError("data.series is required when data.source is \"csv\"");
  if (d.source == "csv" && d.adjacency.empty() && d.coords.empty())
    throw ConfigError("csv data needs data.adjacency or data.coords");
  if (d.history == 0 || d.horizon == 0) throw ConfigError("data.history and data.horizon must be positive");
  if (!(d.train_ratio > 0.0) || !(d.val_ratio >= 0.0) || d.train_ratio + d.val_ratio >= 1.0)
    throw ConfigError("data split ratios must satisfy 0 < train_ratio, 0 <= val_ratio, sum < 1");
  if (d.synthetic.n < 2) throw ConfigError("data.synthetic.n must be at least 2");
  if (!(d.synthetic.period > 0.0)) throw ConfigError("data.synthetic.period must be positive");

  auto& m = c.model;
  m.h = d.history;
  m.l = d.horizon;
  m.c = 1;
  m.d = get<std::size_t>(j, "model", "d");
  m.embed_dim = get<std::size_t>(j, "model", "embed_dim");
  m.dropout = get<double>(j, "model", "dropout");
  m.samples = get<std::size_t>(j, "model", "samples");
  m.tie_ggcn_weights = get<bool>(j, "model", "tie_ggcn_weights");
  m.resample_per_gate = get<bool>(j, "model", "resample_per_gate");
  m.deterministic_eval = get<bool>(j, "model", "deterministic_eval");
  if (m.d == 0 || m.embed_dim == 0) throw ConfigError("model.d and model.embed_dim must be positive");
  if (!(m.dropout >= 0.0 && m.dropout < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
  if (m.samples == 0) throw ConfigError("model.samples must be at least 1");

  auto& t = c.train;
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.adam.lr = get<double>(j, "train", "lr");
  t.adam.beta1 = get<double>(j, "train", "beta1");
  t.adam.beta2 = get<double>(j, "train", "beta2");
  t.adam.eps = get<double>(j, "train", "eps");
  t.adam.clip_norm = get<double>(j, "train", "clip_norm");
  t.batch_size = get<std::size_t>(j, "train", "batch_size");
  t.max_epochs = get<std::size_t>(j, "train", "max_epochs");
  t.patience = get<std::size_t>(j, "train", "patience");
  t.train_stride = get<std::size_t>(j, "train", "train_stride");
  t.eval_seed = get<std::uint64_t>(j, "train", "eval_seed");
  try
  {
    t.validate();
  }
  catch (const std::invalid_argument& e)
  {
    throw ConfigError(std::string("train: ") + e.what());
  }

  c.mask.rate = get<double>(j, "mask", "rate");
  if (const auto& s = at(j, "mask", "seed"); !s.is_null()) c.mask.seed = s.get<std::uint64_t>();
  if (!(c.mask.rate >= 0.0 && c.mask.rate < 1.0)) throw ConfigError("mask.rate must be in [0, 1)");

  auto& a = c.ablation;
  a.uai_to_ia = get<bool>(j, "ablation", "uai_to_ia");
  a.ggcn_to_agcn = get<bool>(j, "ablation", "ggcn_to_agcn");
  a.bi_to_uni = get<bool>(j, "ablation", "bi_to_uni");
  a.seeds = get<std::vector<std::uint64_t>>(j, "ablation", "seeds");
  if (a.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
  m.uai_to_ia = a.uai_to_ia;
  m.ggcn_to_agcn = a.ggcn_to_agcn;
  m.bi_to_uni = a.bi_to_uni;
  return c;
}

json to_json(const RunConfig& c)
{
  json j = default_json();
  auto& d = j["data"];
  d["name"] = c.data.name;
  d["source"] = c.data.source;
  d["series"] = c.data.series;
  d["adjacency"] = c.data.adjacency;
  d["coords"] = c.data.coords;
  d["threshold"] = c.data.threshold ? json(*c.data.threshold) : json(nullptr);
  d["history"] = c.data.history;
  d["horizon"] = c.data.horizon;
  d["train_ratio"] = c.data.train_ratio;
  d["val_ratio"] = c.data.val_ratio;
  d["synthetic"] = {{"n", c.data.synthetic.n},         {"t", c.data.synthetic.t},
                    {"seed", c.data.synthetic.seed},   {"alpha", c.data.synthetic.alpha},
                    {"beta", c.data.synthetic.beta},   {"period", c.data.synthetic.period},
                    {"noise_std", c.data.synthetic.noise_std}};
  j["model"] = {{"d", c.model.d},
                {"embed_dim", c.model.embed_dim},
                {"dropout", c.model.dropout},
                {"samples", c.model.samples},
                {"tie_ggcn_weights", c.model.tie_ggcn_weights},
                {"resample_per_gate", c.model.resample_per_gate},
                {"deterministic_eval", c.model.deterministic_eval}};
  j["train"] = {{"seed", c.train.seed},
                {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"eps", c.train.adam.eps},
                {"clip_norm", c.train.adam.clip_norm},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"train_stride", c.train.train_stride},
                {"eval_seed", c.train.eval_seed}};
  j["mask"] = {{"rate", c.mask.rate}, {"seed", c.mask.seed ? json(*c.mask.seed) : json(nullptr)}};
  j["ablation"] = {{"uai_to_ia", c.ablation.uai_to_ia},
                   {"ggcn_to_agcn", c.ablation.ggcn_to_agcn},
                   {"bi_to_uni", c.ablation.bi_to_uni},
                   {"seeds", c.ablation.seeds}};
  return j;
}

RunConfig load(const std::optional<std::filesystem::path>& file,
               const std::vector<std::pair<std::string, std::string>>& overrides,
               const char* env_seed)
{
  json j = default_json();
  if (file)
  {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    json user = json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw ConfigError("config " + file->string() + " is not valid JSON");
    j = merge(j, user);
  }
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  if (env_seed && *env_seed)
  {
    std::uint64_t seed = 0;
    const char* end = env_seed + std::char_traits<char>::length(env_seed);
    const auto [ptr, ec] = std::from_chars(env_seed, end, seed);
    if (ec != std::errc() || ptr != end)
      throw ConfigError(std::string("IBN_SEED must be a non-negative integer, got '") + env_seed + "'");
    j["train"]["seed"] = seed;
  }
  return from_json(j);
}

} // namespace ibn::config
