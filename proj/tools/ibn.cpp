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

// Command-line front end: synth, train, eval, ablate, diagnose.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
// Failures print one JSON line to stderr: {"error": <kind>, "message": ...}.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibn/checkpoint.hpp"
#include "ibn/config.hpp"
#include "ibn/diagnostics.hpp"
#include "ibn/experiment.hpp"
#include "ibn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ibn;

namespace {

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// Splits leftover arguments into dotted config overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras)
{
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i)
  {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos)
      throw UsageError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos)
    {
      value = key.substr(eq + 1);
      key.resize(eq);
    }
    else
    {
      if (i + 1 >= extras.size()) throw UsageError("override '" + arg + "' needs a value");
      value = extras[++i];
    }
    out.emplace_back(key, value);
  }
  return out;
}

json metrics_json(const train::MetricReport& r)
{
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json mape_per = json::array();
  for (const auto& v : r.mape_per_variable) mape_per.push_back(opt(v));
  return {{"mae", r.mae},
          {"rmse", r.rmse},
          {"mape", opt(r.mape)},
          {"normalized_mae", r.normalized_mae},
          {"count", r.count},
          {"mae_per_variable", r.mae_per_variable},
          {"rmse_per_variable", r.rmse_per_variable},
          {"mape_per_variable", mape_per}};
}

void write_history(const fs::path& path, const std::vector<train::EpochRecord>& history)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_mae,val_mae,seconds\n";
  for (const auto& r : history)
    out << r.epoch << ',' << data::format_real(r.train_mae) << ',' << data::format_real(r.val_mae)
        << ',' << data::format_real(r.seconds) << '\n';
}

const std::vector<data::Window>& split_windows(const Experiment& ex, const std::string& split)
{
  if (split == "train") return ex.datasets.train;
  if (split == "val") return ex.datasets.val;
  if (split == "test") return ex.datasets.test;
  throw UsageError("unknown split '" + split + "' (expected train, val or test)");
}

struct Common
{
  std::optional<std::string> config;
  std::string out = "runs";
  std::vector<std::string> extras;

  config::RunConfig resolve(CLI::App* app) const
  {
    std::optional<fs::path> file;
    if (config) file = *config;
    return config::load(file, parse_overrides(app->remaining()), std::getenv("IBN_SEED"));
  }
};

// Starts a run directory with its manifest; returns (dir, start time).
std::pair<fs::path, std::string> start_run(const std::string& root, const config::RunConfig& cfg,
                                           std::uint64_t fingerprint, const std::string& command)
{
  const std::string started = utc_timestamp();
  const auto dir = make_run_dir(root, cfg.seed());
  write_run_manifest(dir, cfg, fingerprint, command, started);
  return {dir, started};
}

int cmd_synth(const data::SyntheticOptions& opts, const std::string& out_root)
{
  const auto syn = data::generate_synthetic(opts);
  const std::string started = utc_timestamp();
  const auto dir = make_run_dir(out_root, opts.seed);
  data::save_csv_series(dir / "series.csv", syn.series);
  data::save_adjacency(dir / "adj.csv", syn.graph);
  data::save_coords(dir / "coords.csv", *syn.series.coords, syn.series.ids);
  write_json(dir / "meta.json", {{"generator", "graph_diffusion"},
                                 {"n", opts.n},
                                 {"t", opts.t},
                                 {"seed", opts.seed},
                                 {"alpha", opts.alpha},
                                 {"beta", opts.beta},
                                 {"period", opts.period},
                                 {"noise_std", opts.noise_std},
                                 {"threshold", syn.threshold},
                                 {"dataset_fingerprint", data::fingerprint(syn.series.values)},
                                 {"version", kVersion},
                                 {"created_at", started}});
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_train(const config::RunConfig& cfg, const std::string& out_root,
              const std::optional<std::string>& resume)
{
  const Experiment ex = load_experiment(cfg);
  auto [dir, started] = start_run(out_root, cfg, ex.fingerprint, "train");

  std::optional<ForecastModel> model;
  train::TrainState state;
  if (resume)
  {
    auto ck = checkpoint::load(*resume);
    if (!ck.state) throw std::runtime_error(*resume + ": checkpoint has no training state to resume");
    model.emplace(std::move(ck.model));
    state = std::move(*ck.state);
  }
  else
    model.emplace(model_config(cfg, ex.series.variables()), ex.a_pre, cfg.seed());

  train::TrainOptions topts;
  topts.on_epoch = [](const train::EpochRecord& r) {
    std::fprintf(stderr, "epoch %zu train_mae %.6f val_mae %.6f (%.1fs)\n", r.epoch, r.train_mae,
                 r.val_mae, r.seconds);
  };
  train::train(*model, ex.datasets, cfg.train, state, topts);

  write_history(dir / "history.csv", state.history);
  checkpoint::save(dir / "checkpoint", *model, config::to_json(cfg), &state);
  const auto val = train::evaluate(*model, ex.datasets.val, ex.datasets.mask, ex.datasets.scaler,
                                   cfg.train.eval_seed);
  const auto test = train::evaluate(*model, ex.datasets.test, ex.datasets.mask, ex.datasets.scaler,
                                    cfg.train.eval_seed);
  write_json(dir / "report.json", {{"best_epoch", state.best_epoch},
                                   {"best_val_mae", state.best_val},
                                   {"epochs", state.epoch},
                                   {"val", metrics_json(val)},
                                   {"test", metrics_json(test)}});
  write_run_status(dir, started, "ok");
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& split, const std::string& out_root)
{
  auto ck = checkpoint::load(ckpt_dir);
  if (ck.run_config.is_null())
    throw std::runtime_error(ckpt_dir + ": checkpoint carries no run configuration");
  const auto cfg = config::from_json(ck.run_config);
  const Experiment ex = load_experiment(cfg);
  const auto& windows = split_windows(ex, split);
  auto [dir, started] = start_run(out_root, cfg, ex.fingerprint, "eval");
  const auto report =
    train::evaluate(ck.model, windows, ex.datasets.mask, ex.datasets.scaler, cfg.train.eval_seed);
  json j = {{"checkpoint", ckpt_dir}, {"split", split}, {"metrics", metrics_json(report)}};
  write_json(dir / "report.json", j);
  write_run_status(dir, started, "ok");
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_ablate(const config::RunConfig& cfg, const std::string& out_root)
{
  const Experiment ex = load_experiment(cfg);
  auto [dir, started] = start_run(out_root, cfg, ex.fingerprint, "ablate");

  std::ofstream per_seed(dir / "ablation_seeds.csv");
  std::vector<std::vector<train::VariantResult>> all;
  for (std::uint64_t seed : cfg.ablation.seeds)
  {
    config::RunConfig c = cfg;
    c.train.seed = seed;
    const Experiment e = load_experiment(c);
    auto results = train::ablate(model_config(c, e.series.variables()), e.a_pre, e.datasets, c.train, seed);
    if (all.empty()) per_seed << "seed," << train::ablation_csv_header(results) << '\n';
    per_seed << seed << ',' << train::ablation_csv_row(cfg.data.name, results) << '\n';
    std::fprintf(stderr, "seed %llu done\n", static_cast<unsigned long long>(seed));
    all.push_back(std::move(results));
  }

  // Table row: metrics averaged over seeds.
  std::vector<train::VariantResult> mean = all.front();
  for (std::size_t v = 0; v < mean.size(); ++v)
  {
    double mae = 0, rmse = 0, mape = 0;
    bool have_mape = true;
    for (const auto& run : all)
    {
      mae += run[v].test.mae;
      rmse += run[v].test.rmse;
      if (run[v].test.mape) mape += *run[v].test.mape;
      else have_mape = false;
    }
    const double k = static_cast<double>(all.size());
    mean[v].test.mae = mae / k;
    mean[v].test.rmse = rmse / k;
    mean[v].test.mape = have_mape ? std::optional<double>(mape / k) : std::nullopt;
  }
  std::ofstream table(dir / "ablation.csv");
  table << train::ablation_csv_header(mean) << '\n' << train::ablation_csv_row(cfg.data.name, mean) << '\n';
  write_run_status(dir, started, "ok");
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_diagnose(const config::RunConfig& base, const std::optional<std::string>& ckpt_dir,
                 const std::string& split, std::size_t window_index, const std::string& out_root)
{
  config::RunConfig cfg = base;
  std::optional<ForecastModel> model;
  if (ckpt_dir)
  {
    auto ck = checkpoint::load(*ckpt_dir);
    if (!ck.run_config.is_null()) cfg = config::from_json(ck.run_config);
    model.emplace(std::move(ck.model));
  }
  const Experiment ex = load_experiment(cfg);
  if (!model) model.emplace(model_config(cfg, ex.series.variables()), ex.a_pre, cfg.seed());
  const auto& windows = split_windows(ex, split);
  if (windows.empty()) throw std::runtime_error("split '" + split + "' has no windows");
  if (window_index >= windows.size())
    throw UsageError("window index " + std::to_string(window_index) + " out of range (split has " +
                     std::to_string(windows.size()) + " windows)");
  auto [dir, started] = start_run(out_root, cfg, ex.fingerprint, "diagnose");

  const auto report =
    diagnostics::uncertainty_diagnostics(*model, windows, ex.datasets.mask, cfg.train.eval_seed);
  diagnostics::write_uncertainty_csv(dir / "uncertainty.csv", report);
  const auto adj = diagnostics::export_adjacency(*model, windows[window_index], ex.datasets.mask,
                                                 cfg.train.eval_seed);
  data::save_adjacency(dir / "a_pre.csv", adj.a_pre);
  data::save_adjacency(dir / "a_gau_mean.csv", adj.a_dyn);
  json summary = {{"split", split},
                  {"rows", report.rows.size()},
                  {"spearman", report.spearman ? json(*report.spearman) : json(nullptr)},
                  {"adjacency_window", windows[window_index].start}};
  if (ex.ground_truth)
  {
    const auto c = diagnostics::pair_contrast(adj.a_dyn, *ex.ground_truth);
    summary["a_gau_connected_mean"] = c.connected;
    summary["a_gau_unconnected_mean"] = c.unconnected;
  }
  write_json(dir / "diagnostics.json", summary);
  write_run_status(dir, started, "ok");
  std::cout << dir.string() << '\n';
  return 0;
}

void fail(const char* kind, const std::string& message)
{
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Forecasting with entirely missing variables"};
  app.require_subcommand(1);

  data::SyntheticOptions synth_opts;
  std::string synth_out = "runs";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic graph-diffusion dataset");
  synth->add_option("--n", synth_opts.n, "Number of variables")->capture_default_str();
  synth->add_option("--t", synth_opts.t, "Number of time steps")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "Generator seed")->capture_default_str();
  synth->add_option("--alpha", synth_opts.alpha, "Diffusion strength")->capture_default_str();
  synth->add_option("--beta", synth_opts.beta, "Forcing amplitude")->capture_default_str();
  synth->add_option("--period", synth_opts.period, "Forcing period")->capture_default_str();
  synth->add_option("--noise-std", synth_opts.noise_std, "Noise standard deviation")->capture_default_str();
  synth->add_option("--out", synth_out, "Root directory for run folders")->capture_default_str();

  Common train_args, ablate_args, diag_args;
  std::optional<std::string> resume;
  auto* train_cmd = app.add_subcommand("train", "Train a model; dotted --section.key overrides allowed");
  train_cmd->add_option("--config", train_args.config, "JSON config file");
  train_cmd->add_option("--out", train_args.out, "Root directory for run folders")->capture_default_str();
  train_cmd->add_option("--resume", resume, "Checkpoint directory to continue from");
  train_cmd->allow_extras();

  std::string eval_ckpt, eval_split = "test", eval_out = "runs";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Root directory for run folders")->capture_default_str();

  auto* ablate_cmd = app.add_subcommand("ablate", "Train the full model and its three ablations");
  ablate_cmd->add_option("--config", ablate_args.config, "JSON config file");
  ablate_cmd->add_option("--out", ablate_args.out, "Root directory for run folders")->capture_default_str();
  ablate_cmd->allow_extras();

  std::optional<std::string> diag_ckpt;
  std::string diag_split = "test";
  std::size_t diag_window = 0;
  auto* diag_cmd = app.add_subcommand("diagnose", "Uncertainty and adjacency exports");
  diag_cmd->add_option("--checkpoint", diag_ckpt, "Checkpoint directory (default: untrained model)");
  diag_cmd->add_option("--config", diag_args.config, "JSON config file");
  diag_cmd->add_option("--split", diag_split, "train, val or test")->capture_default_str();
  diag_cmd->add_option("--window", diag_window, "Window index for the adjacency export")->capture_default_str();
  diag_cmd->add_option("--out", diag_args.out, "Root directory for run folders")->capture_default_str();
  diag_cmd->allow_extras();

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::CallForAllHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError& e)
  {
    fail("usage", e.what());
    return 2;
  }

  try
  {
    if (synth->parsed()) return cmd_synth(synth_opts, synth_out);
    if (train_cmd->parsed()) return cmd_train(train_args.resolve(train_cmd), train_args.out, resume);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_split, eval_out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args.resolve(ablate_cmd), ablate_args.out);
    if (diag_cmd->parsed())
      return cmd_diagnose(diag_args.resolve(diag_cmd), diag_ckpt, diag_split, diag_window, diag_args.out);
  }
  catch (const config::ConfigError& e)
  {
    fail("config", e.what());
    return 2;
  }
  catch (const UsageError& e)
  {
    fail("usage", e.what());
    return 2;
  }
  catch (const train::NumericalError& e)
  {
    fail("numerical", e.what());
    return 1;
  }
  catch (const std::exception& e)
  {
    fail("runtime", e.what());
    return 1;
  }
  return 0;
}
