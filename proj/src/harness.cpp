#include "hgv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "hgv/errors.hpp"

namespace hgv::harness {

using nlohmann::json;
using tensor::Tensor;

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda_d >= 0.0)) throw ConfigError("lambda_d must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(train_fraction > 0.0 && valid_fraction > 0.0 && train_fraction + valid_fraction < 1.0))
    throw ConfigError("train_fraction and valid_fraction must be positive and leave room for a test split");
}

Profile parse_profile(const std::string& name) {
  if (name == "mimic") return Profile::mimic;
  if (name == "mybank") return Profile::mybank;
  throw ConfigError("unknown profile '" + name + "' (expected mimic or mybank)");
}

void apply_profile(TrainConfig& config, Profile profile) {
  config.batch_size = profile == Profile::mimic ? 256 : 128;
  config.lr = 0.001;
}

namespace {

using Setter = std::function<void(TrainConfig&, const json&)>;

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool as_flag(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto count = [&t](const std::string& key, std::size_t TrainConfig::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.*field = as_count(v, key); };
    };
    auto model_count = [&t](const std::string& key, std::size_t ModelConfig::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.model.*field = as_count(v, key); };
    };
    auto dims_count = [&t](const std::string& key, std::size_t data::Dims::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.model.dims.*field = as_count(v, key); };
    };
    auto real = [&t](const std::string& key, double TrainConfig::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.*field = as_real(v, key); };
    };
    auto model_real = [&t](const std::string& key, double ModelConfig::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.model.*field = as_real(v, key); };
    };
    auto model_flag = [&t](const std::string& key, bool ModelConfig::*field) {
      t[key] = [key, field](TrainConfig& c, const json& v) { c.model.*field = as_flag(v, key); };
    };
    dims_count("n_dynamic", &data::Dims::n_dynamic);
    dims_count("n_static", &data::Dims::n_static);
    dims_count("steps", &data::Dims::steps);
    model_count("d1", &ModelConfig::d1);
    model_count("d2", &ModelConfig::d2);
    model_count("db", &ModelConfig::db);
    model_count("dg", &ModelConfig::dg);
    model_count("heads", &ModelConfig::heads);
    model_count("cnn_layers", &ModelConfig::cnn_layers);
    model_count("lambda1", &ModelConfig::lambda1);
    model_count("lambda2", &ModelConfig::lambda2);
    model_count("kernel", &ModelConfig::kernel);
    model_count("stride", &ModelConfig::stride);
    model_count("lstm_layers", &ModelConfig::lstm_layers);
    model_real("c", &ModelConfig::c);
    model_real("dropout", &ModelConfig::dropout);
    model_flag("disable_gge", &ModelConfig::disable_gge);
    model_flag("disable_beta_attn", &ModelConfig::disable_beta_attn);
    real("lambda_d", &TrainConfig::lambda_d);
    count("batch_size", &TrainConfig::batch_size);
    real("lr", &TrainConfig::lr);
    count("epochs", &TrainConfig::epochs);
    t["seed"] = [](TrainConfig& c, const json& v) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError("config key 'seed' must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    };
    real("train_fraction", &TrainConfig::train_fraction);
    real("valid_fraction", &TrainConfig::valid_fraction);
    return t;
  }();
  return table;
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  const auto& m = c.model;
  return json{{"n_dynamic", m.dims.n_dynamic},
              {"n_static", m.dims.n_static},
              {"steps", m.dims.steps},
              {"d1", m.d1},
              {"d2", m.d2},
              {"db", m.db},
              {"dg", m.dg},
              {"heads", m.heads},
              {"cnn_layers", m.cnn_layers},
              {"lambda1", m.lambda1},
              {"lambda2", m.lambda2},
              {"kernel", m.kernel},
              {"stride", m.stride},
              {"lstm_layers", m.lstm_layers},
              {"c", m.c},
              {"dropout", m.dropout},
              {"disable_gge", m.disable_gge},
              {"disable_beta_attn", m.disable_beta_attn},
              {"lambda_d", c.lambda_d},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"train_fraction", c.train_fraction},
              {"valid_fraction", c.valid_fraction}};
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  TrainConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value);
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json tensor_json(const Tensor& t) { return json{{"shape", t.shape()}, {"data", t.values()}}; }

json vector_json(const std::vector<double>& v) { return tensor_json(Tensor::vector(v)); }

Tensor tensor_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data") || !j["shape"].is_array() ||
      !j["data"].is_array())
    throw ParseError("checkpoint parameter '" + name + "' must have 'shape' and 'data' arrays");
  tensor::Shape shape;
  for (const auto& e : j["shape"]) {
    if (!e.is_number_unsigned()) throw ParseError("checkpoint parameter '" + name + "': bad shape entry");
    shape.push_back(e.get<std::size_t>());
  }
  std::vector<double> values;
  values.reserve(j["data"].size());
  for (const auto& e : j["data"]) {
    if (!e.is_number()) throw ParseError("checkpoint parameter '" + name + "': non-numeric value");
    values.push_back(e.get<double>());
  }
  try {
    return Tensor(std::move(shape), std::move(values));
  } catch (const StructuralError& e) {
    throw ParseError("checkpoint parameter '" + name + "': " + e.what());
  }
}

constexpr const char* kNormKeys[] = {"norm/dynamic_mean", "norm/dynamic_std", "norm/static_mean", "norm/static_std"};

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::object();
  for (const auto* p : ckpt.params.all()) params[p->name] = tensor_json(p->value);
  if (ckpt.norm) {
    params["norm/dynamic_mean"] = vector_json(ckpt.norm->dynamic_mean);
    params["norm/dynamic_std"] = vector_json(ckpt.norm->dynamic_std);
    params["norm/static_mean"] = vector_json(ckpt.norm->static_mean);
    params["norm/static_std"] = vector_json(ckpt.norm->static_std);
  }
  return json{{"version", kCheckpointVersion},
              {"config", config_to_json(ckpt.config)},
              {"epoch", ckpt.epoch},
              {"params", std::move(params)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("checkpoint must be a JSON object");
  if (!j.contains("version") || !j["version"].is_number_integer()) throw ParseError("checkpoint has no version");
  if (j["version"].get<int>() != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(j["version"].get<int>()) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  for (const char* key : {"config", "epoch", "params"})
    if (!j.contains(key)) throw ParseError(std::string("checkpoint is missing '") + key + "'");
  if (!j["epoch"].is_number_unsigned()) throw ParseError("checkpoint epoch must be a non-negative integer");
  if (!j["params"].is_object()) throw ParseError("checkpoint params must be an object");

  Checkpoint ckpt;
  ckpt.config = config_from_json(j["config"]);
  ckpt.epoch = j["epoch"].get<std::size_t>();

  std::map<std::string, Tensor> norm_parts;
  tensor::ParamStore loaded;
  for (const auto& [name, value] : j["params"].items()) {
    Tensor t = tensor_from_json(value, name);
    if (name.rfind("norm/", 0) == 0)
      norm_parts.emplace(name, std::move(t));
    else
      loaded.add(name, std::move(t));
  }
  if (!norm_parts.empty()) {
    for (const char* key : kNormKeys)
      if (!norm_parts.count(key)) throw SchemaError(std::string("checkpoint is missing '") + key + "'");
    data::NormStats ns;
    ns.dynamic_mean = norm_parts.at("norm/dynamic_mean").values();
    ns.dynamic_std = norm_parts.at("norm/dynamic_std").values();
    ns.static_mean = norm_parts.at("norm/static_mean").values();
    ns.static_std = norm_parts.at("norm/static_std").values();
    ckpt.norm = std::move(ns);
  }
  // Reorder into registration order and verify names and shapes.
  fusion::HgvModel model(ckpt.config.model, std::move(loaded));
  const auto reference = fusion::HgvModel::build_params(ckpt.config.model, 0);
  ckpt.params = tensor::ParamStore();
  for (const auto* p : reference.all()) ckpt.params.add(p->name, model.params().get(p->name).value);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string text = checkpoint_to_json(ckpt).dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << text << '\n';
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// Optimization

void Adam::step(tensor::ParamStore& params) {
  auto all = params.all();
  if (m_.empty()) {
    for (const auto* p : all) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != all.size()) throw StructuralError("Adam: parameter set changed between steps");
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < all.size(); ++k) {
    auto& value = all[k]->value;
    const auto& grad = all[k]->grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

BatchLoss batch_loss(tensor::Tape& tape, fusion::HgvModel& model, std::span<const data::InstanceRecord* const> batch,
                     double lambda_d, fusion::Mode mode, std::mt19937_64* rng) {
  if (batch.empty()) throw ProtocolError("empty batch");
  std::vector<tensor::Var> predictions, representations;
  std::vector<int> labels;
  BatchLoss out;
  for (const auto* record : batch) {
    auto fwd = fusion::hgv_forward(tape, *record, model, mode, rng);
    predictions.push_back(fwd.y_hat);
    representations.push_back(fwd.representation);
    labels.push_back(record->label);
    out.predictions.push_back(fwd.trace.y_hat);
  }
  out.classification = objective::ce_loss(tensor::concat_rows(predictions), labels);
  out.decov = objective::decov_loss(tensor::transpose(tensor::concat_cols(representations)));
  out.total = objective::hybrid_loss(out.classification, out.decov, lambda_d);
  return out;
}

std::vector<double> predict_scores(fusion::HgvModel& model, const data::Dataset& ds) {
  std::vector<double> scores;
  scores.reserve(ds.size());
  tensor::Tape tape;
  for (const auto& r : ds.records()) {
    tape.clear();
    scores.push_back(fusion::hgv_forward(tape, r, model, fusion::Mode::eval).trace.y_hat);
  }
  return scores;
}

namespace {

void check_dims(const ModelConfig& model, const data::Dataset& ds, const char* what) {
  if (!ds.empty() && !(ds.dims() == model.dims))
    throw SchemaError(std::string(what) + " dimensions (N_d=" + std::to_string(ds.dims().n_dynamic) +
                      ", N_b=" + std::to_string(ds.dims().n_static) + ", T=" + std::to_string(ds.dims().steps) +
                      ") do not match the model configuration (N_d=" + std::to_string(model.dims.n_dynamic) +
                      ", N_b=" + std::to_string(model.dims.n_static) + ", T=" + std::to_string(model.dims.steps) + ")");
}

}  // namespace

TrainResult train(const data::Dataset& train_ds, const data::Dataset& valid_ds, const TrainConfig& config) {
  config.validate();
  if (train_ds.empty() || valid_ds.empty()) throw ProtocolError("train: empty training or validation set");
  check_dims(config.model, train_ds, "training set");
  check_dims(config.model, valid_ds, "validation set");

  fusion::HgvModel model(config.model, config.seed);
  Adam adam(config.lr);
  std::mt19937_64 rng(tensor::derive_seed(config.seed, "train"));
  const auto valid_labels = valid_ds.labels();

  TrainResult result;
  auto score_valid = [&](std::size_t epoch, double train_loss) {
    const auto scores = predict_scores(model, valid_ds);
    EpochLog log{epoch, train_loss, objective::auroc(scores, valid_labels), objective::auprc(scores, valid_labels)};
    result.log.push_back(log);
    if (epoch == 0 || log.valid_auroc > result.best_valid_auroc) {
      result.best_valid_auroc = log.valid_auroc;
      result.best_epoch = epoch;
      result.best.params = model.params();
      result.best.epoch = epoch;
    }
  };
  score_valid(0, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const data::InstanceRecord*> batch;
  tensor::Tape tape;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_id) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&train_ds[order[i]]);
      tape.clear();
      model.params().zero_grad();
      BatchLoss loss = batch_loss(tape, model, batch, config.lambda_d, fusion::Mode::train, &rng);
      const double value = loss.total.value().item();
      if (!std::isfinite(value))
        throw Error("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_id));
      loss_sum += value;
      tape.backward(loss.total);
      adam.step(model.params());
    }
    tape.clear();
    score_valid(epoch, loss_sum / static_cast<double>(train_ds.size()));
  }
  result.best.config = config;
  result.final_params = model.params();
  return result;
}

objective::MetricReport evaluate(const Checkpoint& ckpt, const data::Dataset& ds, std::size_t n_boot,
                                 std::uint64_t seed) {
  check_dims(ckpt.config.model, ds, "dataset");
  if (ds.empty()) throw ProtocolError("evaluate: empty dataset");
  fusion::HgvModel model(ckpt.config.model, ckpt.params);
  const data::Dataset normalized = ckpt.norm ? data::apply_zscore(ds, *ckpt.norm) : ds;
  const auto scores = predict_scores(model, normalized);
  return objective::metric_report(scores, normalized.labels(), n_boot, seed);
}

// ---------------------------------------------------------------------------
// Experiments

namespace {
std::vector<std::size_t> dedupe(const std::vector<std::size_t>& values) {
  std::vector<std::size_t> out;
  for (auto v : values)
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  return out;
}
}  // namespace

std::vector<GridRow> grid_search(const data::Dataset& train_ds, const data::Dataset& valid_ds, const GridSpace& space,
                                 const TrainConfig& base) {
  std::vector<GridRow> rows;
  const auto valid_labels = valid_ds.labels();
  for (auto d1 : dedupe(space.d1))
    for (auto d2 : dedupe(space.d2))
      for (auto heads : dedupe(space.heads)) {
        GridRow row;
        row.d1 = d1;
        row.d2 = d2;
        row.heads = heads;
        try {
          TrainConfig cfg = base;
          cfg.model.d1 = d1;
          cfg.model.d2 = d2;
          cfg.model.heads = heads;
          auto result = train(train_ds, valid_ds, cfg);
          fusion::HgvModel model(cfg.model, result.best.params);
          const auto scores = predict_scores(model, valid_ds);
          row.valid_auroc = objective::auroc(scores, valid_labels);
          row.valid_auprc = objective::auprc(scores, valid_labels);
          row.valid_min_se_pplus = objective::min_se_pplus(scores, valid_labels);
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
  return rows;
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

std::string grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "d1,d2,heads,status,valid_auroc,valid_auprc,valid_min_se_pplus,error\n";
  for (const auto& r : rows) {
    os << r.d1 << ',' << r.d2 << ',' << r.heads << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok)
      os << fmt(r.valid_auroc) << ',' << fmt(r.valid_auprc) << ',' << fmt(r.valid_min_se_pplus) << ',';
    else
      os << ",,,";
    os << csv_field(r.error) << '\n';
  }
  return os.str();
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "HGV";
    case Variant::without_beta_attn: return "HGV-w/o-beta-attn";
    case Variant::without_gge: return "HGV-w/o-GGE";
  }
  return "?";
}

TrainConfig variant_config(const TrainConfig& base, Variant v) {
  TrainConfig cfg = base;
  cfg.model.disable_beta_attn = base.model.disable_beta_attn || v == Variant::without_beta_attn;
  cfg.model.disable_gge = base.model.disable_gge || v == Variant::without_gge;
  return cfg;
}

namespace {
double median(std::vector<double> v) {
  if (v.empty()) throw ProtocolError("median of no values");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Pick>
double variant_median(const std::vector<AblationRow>& rows, Variant v, Pick pick) {
  std::vector<double> values;
  for (const auto& r : rows)
    if (r.variant == v) values.push_back(pick(r));
  return median(values);
}
}  // namespace

double AblationResult::median_auroc(Variant v) const {
  return variant_median(rows, v, [](const AblationRow& r) { return r.auroc.point; });
}
double AblationResult::median_auprc(Variant v) const {
  return variant_median(rows, v, [](const AblationRow& r) { return r.auprc.point; });
}
double AblationResult::median_min_se_pplus(Variant v) const {
  return variant_median(rows, v, [](const AblationRow& r) { return r.min_se_pplus.point; });
}

AblationResult ablate(const data::Dataset& train_ds, const data::Dataset& valid_ds, const data::Dataset& test_ds,
                      const TrainConfig& config, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ProtocolError("ablate: no seeds given");
  AblationResult result;
  const auto test_labels = test_ds.labels();
  for (Variant v : {Variant::full, Variant::without_beta_attn, Variant::without_gge}) {
    for (auto seed : seeds) {
      TrainConfig cfg = variant_config(config, v);
      cfg.seed = seed;
      auto trained = train(train_ds, valid_ds, cfg);
      fusion::HgvModel model(cfg.model, trained.best.params);
      const auto scores = predict_scores(model, test_ds);
      AblationRow row;
      row.variant = v;
      row.seed = seed;
      row.auroc.point = objective::auroc(scores, test_labels);
      row.auprc.point = objective::auprc(scores, test_labels);
      row.min_se_pplus.point = objective::min_se_pplus(scores, test_labels);
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream os;
  os << "variant,seed,test_auroc,test_auprc,test_min_se_pplus\n";
  for (const auto& r : result.rows)
    os << variant_name(r.variant) << ',' << r.seed << ',' << fmt(r.auroc.point) << ',' << fmt(r.auprc.point) << ','
       << fmt(r.min_se_pplus.point) << '\n';
  for (Variant v : {Variant::full, Variant::without_beta_attn, Variant::without_gge})
    os << variant_name(v) << ",median," << fmt(result.median_auroc(v)) << ',' << fmt(result.median_auprc(v)) << ','
       << fmt(result.median_min_se_pplus(v)) << '\n';
  return os.str();
}

json trace_to_json(const TraceDump& dump) {
  const auto& t = dump.trace;
  json graph = json::array();
  if (t.graph.defined())
    for (std::size_t r = 0; r < t.graph.dim(0); ++r) {
      std::vector<double> row(t.graph.dim(1));
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = t.graph.at(r, c);
      graph.push_back(std::move(row));
    }
  return json{{"id", dump.id},   {"label", dump.label}, {"y_hat", t.y_hat}, {"g", std::move(graph)},
              {"alpha", t.alpha}, {"beta", t.beta},     {"mu", t.mu}};
}

std::vector<TraceDump> collect_traces(const Checkpoint& ckpt, const data::Dataset& ds,
                                      const std::vector<std::string>& ids) {
  check_dims(ckpt.config.model, ds, "dataset");
  fusion::HgvModel model(ckpt.config.model, ckpt.params);
  std::vector<TraceDump> out;
  tensor::Tape tape;
  for (const auto& id : ids) {
    data::InstanceRecord record = ds.find(id);
    if (ckpt.norm) record = data::apply_zscore(data::Dataset({record}, ds.dims()), *ckpt.norm)[0];
    tape.clear();
    auto fwd = fusion::hgv_forward(tape, record, model, fusion::Mode::eval);
    out.push_back({record.id, record.label, std::move(fwd.trace)});
  }
  return out;
}

std::vector<std::string> export_trace(const Checkpoint& ckpt, const data::Dataset& ds,
                                      const std::vector<std::string>& ids, const std::string& outdir) {
  const auto dumps = collect_traces(ckpt, ds, ids);
  std::filesystem::create_directories(outdir);
  std::vector<std::string> paths;
  for (const auto& d : dumps) {
    const auto path = (std::filesystem::path(outdir) / (d.id + ".json")).string();
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace '" + path + "'");
    out << trace_to_json(d).dump(1) << '\n';
    paths.push_back(path);
  }
  return paths;
}

ModelGradCheck model_grad_check(const TrainConfig& config, std::uint64_t seed, std::size_t batch) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg = config;
  cfg.model.dropout = 0.0;
  cfg.validate();
  fusion::HgvModel model(cfg.model, seed);
  data::SynthSpec spec;
  spec.n = std::max<std::size_t>(batch, 2);
  spec.dims = cfg.model.dims;
  spec.seed = seed;
  spec.sparsity = 0.5;
  spec.flip_rate = 0.0;
  const auto ds = data::synth_generate(spec);
  std::vector<const data::InstanceRecord*> records;
  for (const auto& r : ds.records()) records.push_back(&r);

  auto f = [&](tensor::Tape& tape) {
    return batch_loss(tape, model, records, cfg.lambda_d, fusion::Mode::eval, nullptr).total;
  };
  auto params = model.params().all();
  ModelGradCheck out;
  tensor::GradCheckOptions options;
  options.step = 2e-3;
  options.stencil = tensor::Stencil::central4;
  out.report = tensor::grad_check(f, params, options);
  out.parameters = model.params().total_numel();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.dims = {3, 2, 8};
  c.model.d1 = 8;
  c.model.d2 = 4;
  c.model.db = 8;
  c.model.dg = 8;
  c.model.heads = 2;
  c.model.lambda1 = 4;
  c.model.lambda2 = 8;
  c.model.dropout = 0.0;
  c.batch_size = 16;
  c.lr = 0.01;
  c.epochs = 200;
  return c;
}

}  // namespace hgv::harness
