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

#include "ibn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ibn/config.hpp"

namespace ibn::checkpoint {

using nlohmann::json;

namespace {

constexpr int kFormat = 1;

std::uint64_t to_little(std::uint64_t v)
{
  if constexpr (std::endian::native == std::endian::little)
    return v;
  else
  {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
}

class Writer
{
public:
  void add(const std::string& name, const Tensor& t)
  {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", bytes.size()}});
    for (double v : t.data())
    {
      const std::uint64_t le = to_little(std::bit_cast<std::uint64_t>(v));
      const auto* p = reinterpret_cast<const char*>(&le);
      bytes.insert(bytes.end(), p, p + 8);
    }
  }

  json entries = json::array();
  std::vector<char> bytes;
};

class Reader
{
public:
  Reader(const json& entries, std::vector<char> bytes, const std::filesystem::path& dir)
  : _bytes(std::move(bytes)), _dir(dir)
  {
    for (const auto& e : entries) _index[e.at("name").get<std::string>()] = e;
  }

  bool has(const std::string& name) const { return _index.contains(name); }

  Tensor get(const std::string& name) const
  {
    const auto it = _index.find(name);
    if (it == _index.end()) throw std::runtime_error(_dir.string() + ": checkpoint lacks " + name);
    const Shape shape = it->second.at("shape").get<Shape>();
    const std::size_t offset = it->second.at("offset").get<std::size_t>();
    Tensor t(shape);
    if (offset + 8 * t.size() > _bytes.size())
      throw std::runtime_error(_dir.string() + ": weights.bin too short for " + name);
    for (std::size_t i = 0; i < t.size(); ++i)
    {
      std::uint64_t le = 0;
      std::memcpy(&le, _bytes.data() + offset + 8 * i, 8);
      t[i] = std::bit_cast<double>(to_little(le));
    }
    return t;
  }

private:
  std::map<std::string, json> _index;
  std::vector<char> _bytes;
  std::filesystem::path _dir;
};

void fill_params(ParameterSet& params, const Reader& reader, const std::string& prefix,
                 const std::filesystem::path& dir)
{
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    Tensor t = reader.get(prefix + params.name(i));
    if (t.shape() != params.value(i).shape())
      throw std::runtime_error(dir.string() + ": shape of " + prefix + params.name(i) + " is " +
                               to_string(t.shape()) + ", model expects " +
                               to_string(params.value(i).shape()));
    params.value(i) = std::move(t);
  }
}

} // namespace

void save(const std::filesystem::path& dir, const ForecastModel& model, const json& run_config,
          const train::TrainState* state)
{
  std::filesystem::create_directories(dir);
  const auto& ps = model.params();
  Writer w;
  for (std::size_t i = 0; i < ps.size(); ++i) w.add(ps.name(i), ps.value(i));
  w.add("buffer.a_pre", model.a_pre());

  json manifest = {{"format", kFormat},
                   {"model", config::model_to_json(model.config())},
                   {"run_config", run_config}};
  if (state)
  {
    json s = {{"epoch", state->epoch},
              {"adam_step", state->adam.step},
              {"best_val", state->best_val},
              {"best_epoch", state->best_epoch},
              {"stale_epochs", state->stale_epochs},
              {"finished", state->finished},
              {"has_best", state->best.has_value()},
              {"history", json::array()}};
    // Wall-clock times stay out so identical runs give identical checkpoints.
    for (const auto& r : state->history)
      s["history"].push_back({{"epoch", r.epoch}, {"train_mae", r.train_mae}, {"val_mae", r.val_mae}});
    for (std::size_t i = 0; i < state->adam.m.size(); ++i)
    {
      w.add("adam.m." + ps.name(i), state->adam.m[i]);
      w.add("adam.v." + ps.name(i), state->adam.v[i]);
    }
    if (state->best)
      for (std::size_t i = 0; i < state->best->size(); ++i)
        w.add("best." + state->best->name(i), state->best->value(i));
    manifest["train_state"] = std::move(s);
  }
  manifest["tensors"] = std::move(w.entries);

  std::ofstream bin(dir / "weights.bin", std::ios::binary);
  bin.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!bin) throw std::runtime_error("cannot write " + (dir / "weights.bin").string());
  std::ofstream man(dir / "manifest.json");
  man << manifest.dump(2) << '\n';
  if (!man) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

Checkpoint load(const std::filesystem::path& dir)
{
  std::ifstream man(dir / "manifest.json");
  if (!man) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  const json manifest = json::parse(man, nullptr, false);
  if (manifest.is_discarded())
    throw std::runtime_error((dir / "manifest.json").string() + " is not valid JSON");
  if (manifest.value("format", 0) != kFormat)
    throw std::runtime_error((dir / "manifest.json").string() + ": unsupported format");

  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + (dir / "weights.bin").string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const Reader reader(manifest.at("tensors"), std::move(bytes), dir);

  Checkpoint ck{ForecastModel(config::model_from_json(manifest.at("model")),
                              reader.get("buffer.a_pre"), 0),
                manifest.value("run_config", json(nullptr)), std::nullopt};
  auto& params = ck.model.params();
  fill_params(params, reader, "", dir);

  if (manifest.contains("train_state"))
  {
    const json& s = manifest.at("train_state");
    train::TrainState st;
    st.epoch = s.at("epoch").get<std::size_t>();
    st.adam.step = s.at("adam_step").get<std::uint64_t>();
    st.best_val = s.at("best_val").get<double>();
    st.best_epoch = s.at("best_epoch").get<std::size_t>();
    st.stale_epochs = s.at("stale_epochs").get<std::size_t>();
    st.finished = s.at("finished").get<bool>();
    for (const auto& r : s.at("history"))
      st.history.push_back({r.at("epoch").get<std::size_t>(), r.at("train_mae").get<double>(),
                            r.at("val_mae").get<double>(), 0.0});
    if (reader.has("adam.m." + params.name(0)))
      for (std::size_t i = 0; i < params.size(); ++i)
      {
        st.adam.m.push_back(reader.get("adam.m." + params.name(i)));
        st.adam.v.push_back(reader.get("adam.v." + params.name(i)));
      }
    if (s.at("has_best").get<bool>())
    {
      st.best = params;
      fill_params(*st.best, reader, "best.", dir);
    }
    ck.state = std::move(st);
  }
  return ck;
}

} // namespace ibn::checkpoint
