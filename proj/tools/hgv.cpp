#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgv/data.hpp"
#include "hgv/errors.hpp"
#include "hgv/harness.hpp"

using namespace hgv;
using nlohmann::json;

namespace {

template <typename T>
std::vector<T> parse_csv_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || item[0] == '-') throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a non-negative integer");
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
  return out;
}

std::vector<std::string> parse_ids(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  if (out.empty()) throw ConfigError("--ids: empty list");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

struct Prepared {
  data::Dataset train, valid, test;
  data::NormStats stats;
};

// Stratified split of one file, then z-scoring with training statistics.
Prepared prepare(const std::string& path, const harness::TrainConfig& cfg) {
  const auto ds = data::load_jsonl(path);
  if (!(ds.dims() == cfg.model.dims))
    throw SchemaError("data dimensions do not match the config (N_d, N_b, T)");
  data::SplitSpec spec;
  spec.train = cfg.train_fraction;
  spec.valid = cfg.valid_fraction;
  spec.test = 1.0 - cfg.train_fraction - cfg.valid_fraction;
  spec.seed = cfg.seed;
  auto parts = data::split(ds, spec);
  auto norm = data::fit_apply_zscore(parts.train, {parts.valid, parts.test});
  for (const auto& w : norm.stats.warnings) std::cerr << "warning: " << w << '\n';
  return {std::move(norm.train), std::move(norm.others[0]), std::move(norm.others[1]), std::move(norm.stats)};
}

void put_metric(json& out, const std::string& name, const objective::MetricValue& v) {
  out[name] = v.point;
  out[name + "_mean"] = v.mean;
  out[name + "_std"] = v.std;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HGV risk prediction: training, evaluation and diagnostics"};
  app.require_subcommand(1);

  data::SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-rhythm synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "Output JSONL")->required();
  synth_cmd->add_option("--n", synth.n, "Number of instances")->required();
  synth_cmd->add_option("--nd", synth.dims.n_dynamic, "Dynamic channels")->required();
  synth_cmd->add_option("--nb", synth.dims.n_static, "Static features")->required();
  synth_cmd->add_option("--t", synth.dims.steps, "Time steps")->required();
  synth_cmd->add_option("--sparsity", synth.sparsity, "Fraction of positive instances")->required();
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise std")->required();
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->required();

  std::string data_path, config_path, out_path, profile, ckpt_path, report_path, ids, outdir;
  std::string seeds_csv, d1_csv, d2_csv, heads_csv;
  std::size_t n_boot = 1000;
  std::uint64_t seed = 0;
  double tol = 1e-4;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write the best checkpoint");
  train_cmd->add_option("--data", data_path, "Input JSONL")->required();
  train_cmd->add_option("--config", config_path, "Config JSON")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint path")->required();
  train_cmd->add_option("--profile", profile, "Batch size / learning rate preset")
      ->check(CLI::IsMember({"mimic", "mybank"}));

  auto* eval_cmd = app.add_subcommand("eval", "Score a dataset with a checkpoint");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "Input JSONL")->required();
  eval_cmd->add_option("--boot", n_boot, "Bootstrap resamples")->required();
  eval_cmd->add_option("--seed", seed, "Bootstrap seed")->required();
  eval_cmd->add_option("--report", report_path, "Report JSON")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  grad_cmd->add_option("--config", config_path, "Config JSON")->required();
  grad_cmd->add_option("--seed", seed, "Seed")->required();
  grad_cmd->add_option("--tol", tol, "Maximum relative error");

  auto* ablate_cmd = app.add_subcommand("ablate", "Full model vs. w/o beta-attention vs. w/o GGE");
  ablate_cmd->add_option("--data", data_path, "Input JSONL")->required();
  ablate_cmd->add_option("--config", config_path, "Config JSON")->required();
  ablate_cmd->add_option("--seeds", seeds_csv, "Comma-separated seeds")->required();
  ablate_cmd->add_option("--report", report_path, "CSV report")->required();

  auto* grid_cmd = app.add_subcommand("grid", "Hyper-parameter grid over d1, d2 and heads");
  grid_cmd->add_option("--data", data_path, "Input JSONL")->required();
  grid_cmd->add_option("--config", config_path, "Config JSON")->required();
  grid_cmd->add_option("--d1", d1_csv, "Comma-separated d1 values")->required();
  grid_cmd->add_option("--d2", d2_csv, "Comma-separated d2 values")->required();
  grid_cmd->add_option("--heads", heads_csv, "Comma-separated head counts")->required();
  grid_cmd->add_option("--report", report_path, "CSV report")->required();

  auto* trace_cmd = app.add_subcommand("trace", "Dump graph, attention and view weights per instance");
  trace_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  trace_cmd->add_option("--data", data_path, "Input JSONL")->required();
  trace_cmd->add_option("--ids", ids, "Comma-separated instance ids")->required();
  trace_cmd->add_option("--outdir", outdir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      std::vector<data::PlantInfo> truth;
      const auto ds = data::synth_generate(synth, &truth);
      data::save_jsonl(ds, synth_out);
      std::cout << "wrote " << ds.size() << " records (" << ds.positives() << " positive) to " << synth_out << '\n';
    } else if (*train_cmd) {
      auto cfg = harness::load_config(config_path);
      if (!profile.empty()) harness::apply_profile(cfg, harness::parse_profile(profile));
      cfg.validate();
      auto prepared = prepare(data_path, cfg);
      auto result = harness::train(prepared.train, prepared.valid, cfg);
      for (const auto& e : result.log)
        std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " valid_auroc " << e.valid_auroc
                  << " valid_auprc " << e.valid_auprc << '\n';
      result.best.norm = prepared.stats;
      harness::save_checkpoint(result.best, out_path);
      std::cout << "best epoch " << result.best_epoch << " valid_auroc " << result.best_valid_auroc << " -> "
                << out_path << '\n';
    } else if (*eval_cmd) {
      const auto ckpt = harness::load_checkpoint(ckpt_path);
      const auto ds = data::load_jsonl(data_path);
      const auto r = harness::evaluate(ckpt, ds, n_boot, seed);
      json report{{"n", ds.size()}, {"n_boot", r.n_boot}, {"seed", seed}, {"redrawn", r.redrawn}};
      put_metric(report, "auroc", r.auroc);
      put_metric(report, "auprc", r.auprc);
      put_metric(report, "min_se_pplus", r.min_se_pplus);
      write_text(report_path, report.dump(2) + "\n");
      std::cout << "auroc " << r.auroc.point << " (" << r.auroc.mean << " +/- " << r.auroc.std << ")\n"
                << "auprc " << r.auprc.point << " (" << r.auprc.mean << " +/- " << r.auprc.std << ")\n"
                << "min_se_pplus " << r.min_se_pplus.point << " (" << r.min_se_pplus.mean << " +/- "
                << r.min_se_pplus.std << ")\n";
    } else if (*grad_cmd) {
      const auto cfg = harness::load_config(config_path);
      const auto check = harness::model_grad_check(cfg, seed);
      std::cout << "parameters " << check.parameters << " checked " << check.report.checked << " skipped "
                << check.report.skipped << '\n'
                << "max relative error " << check.report.max_rel_error << " (" << check.report.worst_param << ")\n"
                << "seconds " << check.seconds << '\n';
      if (!(check.report.max_rel_error < tol)) {
        std::cerr << "gradient check failed: " << check.report.max_rel_error << " >= " << tol << '\n';
        return 1;
      }
    } else if (*ablate_cmd) {
      const auto cfg = harness::load_config(config_path);
      const auto seeds = parse_csv_list<std::uint64_t>(seeds_csv, "--seeds");
      const auto prepared = prepare(data_path, cfg);
      const auto result = harness::ablate(prepared.train, prepared.valid, prepared.test, cfg, seeds);
      const auto csv = harness::ablation_csv(result);
      write_text(report_path, csv);
      std::cout << csv;
    } else if (*grid_cmd) {
      const auto cfg = harness::load_config(config_path);
      harness::GridSpace space{parse_csv_list<std::size_t>(d1_csv, "--d1"), parse_csv_list<std::size_t>(d2_csv, "--d2"),
                               parse_csv_list<std::size_t>(heads_csv, "--heads")};
      const auto prepared = prepare(data_path, cfg);
      const auto rows = harness::grid_search(prepared.train, prepared.valid, space, cfg);
      const auto csv = harness::grid_csv(rows);
      write_text(report_path, csv);
      std::cout << csv;
    } else if (*trace_cmd) {
      const auto ckpt = harness::load_checkpoint(ckpt_path);
      const auto ds = data::load_jsonl(data_path);
      for (const auto& p : harness::export_trace(ckpt, ds, parse_ids(ids), outdir)) std::cout << p << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
