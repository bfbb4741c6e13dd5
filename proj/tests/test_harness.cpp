#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hgv/errors.hpp"
#include "hgv/harness.hpp"

using namespace hgv;
using namespace hgv::harness;
namespace fs = std::filesystem;

namespace {

data::Dataset tiny_data(std::size_t n, std::uint64_t seed, double noise = 0.3, double flip = 0.05) {
  data::SynthSpec spec;
  spec.n = n;
  spec.dims = tiny_config().model.dims;
  spec.seed = seed;
  spec.noise = noise;
  spec.flip_rate = flip;
  return data::fit_apply_zscore(data::synth_generate(spec), {}).train;
}

TrainConfig quick_config(std::size_t epochs = 2) {
  auto cfg = tiny_config();
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  return cfg;
}

bool same_params(const tensor::ParamStore& a, const tensor::ParamStore& b) {
  const auto pa = a.all();
  const auto pb = b.all();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->name != pb[i]->name || !(pa[i]->value == pb[i]->value)) return false;
  return true;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hgv_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config json round trip") {
  auto cfg = tiny_config();
  cfg.seed = 17;
  cfg.model.disable_gge = true;
  CHECK(config_from_json(config_to_json(cfg)) == cfg);

  auto j = config_to_json(cfg);
  j["unknown_field"] = 3;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  auto bad = config_to_json(cfg);
  bad["d1"] = "eight";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);

  nlohmann::json partial = {{"n_dynamic", 3}, {"n_static", 2}, {"steps", 8}};
  CHECK(config_from_json(partial).model.dims.steps == 8);
}

TEST_CASE("config validation and profiles") {
  auto cfg = tiny_config();
  cfg.model.heads = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = tiny_config();
  apply_profile(cfg, parse_profile("mimic"));
  CHECK(cfg.batch_size == 256);
  CHECK(cfg.lr == 0.001);
  apply_profile(cfg, parse_profile("mybank"));
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.lr == 0.001);
  CHECK_THROWS_AS(parse_profile("other"), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const auto ds = tiny_data(24, 3);
  auto cfg = quick_config(1);
  auto result = train(ds, ds, cfg);
  result.best.norm = data::fit_zscore(ds);
  const auto dir = scratch_dir("ckpt");
  const auto path = (dir / "model.json").string();
  save_checkpoint(result.best, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config == result.best.config);
  CHECK(loaded.epoch == result.best.epoch);
  CHECK(same_params(loaded.params, result.best.params));
  REQUIRE(loaded.norm.has_value());
  CHECK(loaded.norm->dynamic_mean == result.best.norm->dynamic_mean);
  CHECK(loaded.norm->static_std == result.best.norm->static_std);
  CHECK(evaluate(loaded, ds, 20, 1) == evaluate(result.best, ds, 20, 1));

  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  {
    std::ofstream out(dir / "truncated.json");
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "truncated.json").string()), ParseError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), ParseError);

  auto j = checkpoint_to_json(result.best);
  j["version"] = kCheckpointVersion + 1;
  CHECK_THROWS_AS(checkpoint_from_json(j), VersionError);
  auto no_params = checkpoint_to_json(result.best);
  no_params.erase("params");
  CHECK_THROWS_AS(checkpoint_from_json(no_params), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("training determinism and learning rate zero") {
  const auto ds = tiny_data(24, 5);
  auto cfg = quick_config(2);
  const auto a = train(ds, ds, cfg);
  const auto b = train(ds, ds, cfg);
  CHECK(same_params(a.final_params, b.final_params));
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].valid_auroc == b.log[i].valid_auroc);
  CHECK(std::isnan(a.log[0].train_loss));
  CHECK(std::isfinite(a.log[1].train_loss));
  CHECK(a.best_valid_auroc >= a.log[0].valid_auroc);

  cfg.lr = 0.0;
  const auto frozen = train(ds, ds, cfg);
  const fusion::HgvModel initial(cfg.model, cfg.seed);
  CHECK(same_params(frozen.final_params, initial.params()));
}

TEST_CASE("checkpoint selection keeps the best validation epoch") {
  const auto ds = tiny_data(32, 6);
  auto cfg = quick_config(4);
  const auto r = train(ds, ds, cfg);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.log)
    if (e.valid_auroc > best) {
      best = e.valid_auroc;
      best_epoch = e.epoch;
    }
  CHECK(r.best_valid_auroc == best);
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best.epoch == best_epoch);
  fusion::HgvModel m(cfg.model, r.best.params);
  CHECK(objective::auroc(predict_scores(m, ds), ds.labels()) == best);
}

TEST_CASE("grid search") {
  const auto ds = tiny_data(16, 8);
  auto cfg = quick_config(1);
  GridSpace space{{8, 8, 4}, {4}, {2, 1}};
  const auto rows = grid_search(ds, ds, space, cfg);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.ok);
    CHECK(r.valid_auroc >= 0.0);
    CHECK(r.valid_auroc <= 1.0);
  }
  GridSpace bad{{0}, {4}, {2}};
  const auto failed = grid_search(ds, ds, bad, cfg);
  REQUIRE(failed.size() == 1);
  CHECK_FALSE(failed[0].ok);
  CHECK_FALSE(failed[0].error.empty());
  const auto csv = grid_csv(rows);
  CHECK(csv.rfind("d1,d2,heads,status,valid_auroc,valid_auprc,valid_min_se_pplus,error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("largest grid cell builds") {
  auto cfg = tiny_config();
  cfg.model.d1 = 64;
  cfg.model.d2 = 32;
  cfg.model.heads = 4;
  cfg.model.db = cfg.model.dg = 64;
  cfg.validate();
  fusion::HgvModel model(cfg.model, 0);
  const auto ds = tiny_data(2, 1);
  tensor::Tape tape;
  const auto out = fusion::hgv_forward(tape, ds[0], model, fusion::Mode::eval);
  CHECK(out.representation.shape() == tensor::Shape{64, 1});
}

TEST_CASE("ablation table") {
  const auto ds = tiny_data(16, 9);
  auto cfg = quick_config(1);
  const auto result = ablate(ds, ds, ds, cfg, {1, 2});
  REQUIRE(result.rows.size() == 6);
  CHECK(result.rows[0].variant == Variant::full);
  CHECK(result.rows[2].variant == Variant::without_beta_attn);
  CHECK(result.rows[4].variant == Variant::without_gge);
  CHECK(result.rows[1].seed == 2);
  const double m = result.median_auroc(Variant::full);
  CHECK(m == doctest::Approx((result.rows[0].auroc.point + result.rows[1].auroc.point) / 2.0));
  CHECK(variant_name(Variant::full) == "HGV");
  CHECK(variant_config(cfg, Variant::without_gge).model.disable_gge);
  CHECK(variant_config(cfg, Variant::without_beta_attn).model.disable_beta_attn);
  const auto csv = ablation_csv(result);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("traces") {
  const auto ds = tiny_data(8, 10);
  auto cfg = quick_config(1);
  Checkpoint ckpt{cfg, fusion::HgvModel::build_params(cfg.model, 4), std::nullopt, 0};
  const auto traces = collect_traces(ckpt, ds, {ds[0].id, ds[3].id});
  REQUIRE(traces.size() == 2);
  for (const auto& t : traces) {
    const auto& g = t.trace.graph;
    for (std::size_t i = 0; i < g.shape()[0]; ++i)
      for (std::size_t j = 0; j < g.shape()[1]; ++j) CHECK(g.at(i, j) == g.at(j, i));
    for (const auto& a : t.trace.alpha) {
      double s = 0.0;
      for (double v : a) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(collect_traces(ckpt, ds, {"no-such-id"}), LookupError);

  const auto dir = scratch_dir("trace");
  const auto paths = export_trace(ckpt, ds, {ds[1].id}, dir.string());
  REQUIRE(paths.size() == 1);
  std::ifstream in(paths[0]);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("id") == ds[1].id);
  CHECK(j.at("g").size() == cfg.model.dims.steps);
  CHECK(j.at("mu").size() == cfg.model.dims.n_dynamic + 1);
  fs::remove_all(dir);
}

TEST_CASE("evaluate perfect separation") {
  const auto ds = tiny_data(40, 11, 0.0, 0.0);
  auto cfg = tiny_config();
  cfg.epochs = 60;
  const auto r = train(ds, ds, cfg);
  const auto report = evaluate(r.best, ds, 50, 0);
  CHECK(report.auroc.point == 1.0);
  CHECK(report.auprc.point == 1.0);
  CHECK(report.min_se_pplus.point == 1.0);
}

TEST_CASE("model gradient check on tiny config") {
  const auto check = model_grad_check(tiny_config(), 0);
  CHECK(check.report.max_rel_error < 1e-4);
  CHECK(check.report.checked > 0);
}
