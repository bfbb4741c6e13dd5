#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgv/data.hpp"
#include "hgv/fusion.hpp"
#include "hgv/gradcheck.hpp"
#include "hgv/model_config.hpp"
#include "hgv/objective.hpp"

namespace hgv::harness {

struct TrainConfig {
  ModelConfig model;
  double lambda_d = 1.0;
  std::size_t batch_size = 256;
  double lr = 0.001;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  // Used by the CLI when a single file has to be partitioned.
  double train_fraction = 0.8;
  double valid_fraction = 0.1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class Profile { mimic, mybank };
Profile parse_profile(const std::string& name);
// mimic: B=256, lr=0.001; mybank: B=128, lr=0.001.
void apply_profile(TrainConfig& config, Profile profile);

nlohmann::json config_to_json(const TrainConfig& config);
// Flat object keyed by field name; unknown keys and wrong types raise ConfigError.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::string& path);

struct Checkpoint {
  TrainConfig config;
  tensor::ParamStore params;
  std::optional<data::NormStats> norm;
  std::size_t epoch = 0;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// ParseError on unreadable or truncated files, VersionError on a foreign version.
Checkpoint load_checkpoint(const std::string& path);

// Adam with bias correction; moments are keyed by parameter order in the store.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  void step(tensor::ParamStore& params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<tensor::Tensor> m_, v_;
};

struct BatchLoss {
  tensor::Var total;
  tensor::Var classification;
  tensor::Var decov;
  std::vector<double> predictions;
};

// Forward pass of a batch plus the hybrid loss on one tape.
BatchLoss batch_loss(tensor::Tape& tape, fusion::HgvModel& model, std::span<const data::InstanceRecord* const> batch,
                     double lambda_d, fusion::Mode mode, std::mt19937_64* rng);

std::vector<double> predict_scores(fusion::HgvModel& model, const data::Dataset& ds);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean hybrid loss per instance; NaN for the untrained epoch 0
  double valid_auroc = 0.0;
  double valid_auprc = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_valid_auroc = 0.0;
  tensor::ParamStore final_params;
};

// Datasets must already be normalized. Epoch 0 scores the initial model; the
// checkpoint with the best validation AUROC (earliest on ties) is kept.
TrainResult train(const data::Dataset& train_ds, const data::Dataset& valid_ds, const TrainConfig& config);

// Applies the checkpoint's normalization (if any) to `ds` before scoring.
objective::MetricReport evaluate(const Checkpoint& ckpt, const data::Dataset& ds, std::size_t n_boot,
                                 std::uint64_t seed);

struct GridSpace {
  std::vector<std::size_t> d1, d2, heads;
};

struct GridRow {
  std::size_t d1 = 0, d2 = 0, heads = 0;
  bool ok = false;
  std::string error;
  double valid_auroc = 0.0, valid_auprc = 0.0, valid_min_se_pplus = 0.0;
};

// Cartesian product with duplicate values removed, each combo trained with base.seed.
std::vector<GridRow> grid_search(const data::Dataset& train_ds, const data::Dataset& valid_ds, const GridSpace& space,
                                 const TrainConfig& base);
std::string grid_csv(const std::vector<GridRow>& rows);

enum class Variant { full, without_beta_attn, without_gge };
std::string variant_name(Variant v);
TrainConfig variant_config(const TrainConfig& base, Variant v);

struct AblationRow {
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  objective::MetricValue auroc, auprc, min_se_pplus;  // point values only
};

struct AblationResult {
  std::vector<AblationRow> rows;  // variant-major, then seed, in declaration order
  double median_auroc(Variant v) const;
  double median_auprc(Variant v) const;
  double median_min_se_pplus(Variant v) const;
};

AblationResult ablate(const data::Dataset& train_ds, const data::Dataset& valid_ds, const data::Dataset& test_ds,
                      const TrainConfig& config, const std::vector<std::uint64_t>& seeds);
std::string ablation_csv(const AblationResult& result);

struct TraceDump {
  std::string id;
  int label = 0;
  fusion::Trace trace;
};

nlohmann::json trace_to_json(const TraceDump& dump);
// Eval-mode traces for the requested ids (normalization from the checkpoint applied).
std::vector<TraceDump> collect_traces(const Checkpoint& ckpt, const data::Dataset& ds,
                                      const std::vector<std::string>& ids);
// Writes <outdir>/<id>.json for each id; returns the written paths.
std::vector<std::string> export_trace(const Checkpoint& ckpt, const data::Dataset& ds,
                                      const std::vector<std::string>& ids, const std::string& outdir);

struct ModelGradCheck {
  tensor::GradCheckReport report;
  std::size_t parameters = 0;
  double seconds = 0.0;
};

// Full hybrid loss on a small synthetic batch (dropout off) checked against
// fourth-order central differences (h = 2e-3) over every parameter. The
// attention weights carry gradients near 1e-8, where the two-point rule at
// small h is dominated by rounding in the loss.
ModelGradCheck model_grad_check(const TrainConfig& config, std::uint64_t seed, std::size_t batch = 4);

// The small configuration used for gradient checks and capacity tests:
// T=8, N_d=3, N_b=2, d1=8, d2=4, d_b=d_g=8, N_H=2, lambda=(4,8).
TrainConfig tiny_config();

}  // namespace hgv::harness
