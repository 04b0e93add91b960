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

#include "ibn/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "ibn/graph.hpp"

namespace ibn {

Experiment load_experiment(const config::RunConfig& config)
{
  const auto& dc = config.data;
  Experiment ex;
  if (dc.source == "synthetic")
  {
    auto syn = data::generate_synthetic(dc.synthetic);
    ex.series = std::move(syn.series);
    ex.ground_truth = syn.graph;
    ex.a_pre = dc.threshold ? graph::build_predefined_from_coords(*ex.series.coords, *dc.threshold)
                            : std::move(syn.graph);
  }
  else
  {
    ex.series = data::load_csv_series(dc.series);
    if (!dc.adjacency.empty())
      ex.a_pre = data::load_adjacency(dc.adjacency);
    else
    {
      const Tensor coords = data::load_coords(dc.coords);
      const Tensor dist = graph::distances_from_coords(coords);
      ex.a_pre = graph::build_predefined(dist, dc.threshold.value_or(graph::median_offdiagonal(dist)));
      ex.series.coords = coords;
    }
    if (ex.a_pre.dim(0) != ex.series.variables())
      throw std::runtime_error("graph has " + std::to_string(ex.a_pre.dim(0)) + " nodes but series has " +
                               std::to_string(ex.series.variables()) + " variables");
  }

  data::DataOptions opts;
  opts.history = dc.history;
  opts.horizon = dc.horizon;
  opts.train_ratio = dc.train_ratio;
  opts.val_ratio = dc.val_ratio;
  opts.mask_rate = config.mask.rate;
  opts.mask_seed = config.mask_seed();
  ex.datasets = data::prepare_datasets(ex.series, opts);
  ex.fingerprint = data::fingerprint(ex.series.values);
  return ex;
}

ModelConfig model_config(const config::RunConfig& config, std::size_t n)
{
  ModelConfig m = config.model;
  m.n = n;
  return m;
}

std::string utc_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, std::uint64_t seed)
{
  const std::string base = utc_timestamp() + "-seed" + std::to_string(seed);
  std::filesystem::create_directories(root);
  for (int k = 0;; ++k)
  {
    auto dir = root / (k == 0 ? base : base + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_manifest(const std::filesystem::path& run_dir, const config::RunConfig& config,
                        std::uint64_t fingerprint, const std::string& command,
                        const std::string& started_at)
{
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fingerprint));
  write_json(run_dir / "manifest.json", {{"command", command},
                                         {"config", config::to_json(config)},
                                         {"seed", config.seed()},
                                         {"mask_seed", config.mask_seed()},
                                         {"dataset_fingerprint", hex},
                                         {"version", kVersion},
                                         {"started_at", started_at}});
}

void write_run_status(const std::filesystem::path& run_dir, const std::string& started_at,
                      const std::string& status)
{
  write_json(run_dir / "status.json",
             {{"started_at", started_at}, {"finished_at", utc_timestamp()}, {"status", status}});
}

} // namespace ibn
