#include "hgv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hgv/errors.hpp"

namespace hgv::data {

using nlohmann::json;
using tensor::Tensor;

namespace {

void validate(const InstanceRecord& r, const Dims& dims) {
  if (r.dynamic.rank() != 2 || r.dynamic.dim(0) != dims.n_dynamic || r.dynamic.dim(1) != dims.steps)
    throw SchemaError("record '" + r.id + "': dynamic matrix " + tensor::shape_str(r.dynamic.shape()) +
                      " does not match N_d=" + std::to_string(dims.n_dynamic) + ", T=" + std::to_string(dims.steps));
  if (r.static_features.size() != dims.n_static)
    throw SchemaError("record '" + r.id + "': " + std::to_string(r.static_features.size()) +
                      " static features, expected " + std::to_string(dims.n_static));
  if (r.label != 0 && r.label != 1)
    throw DomainError("record '" + r.id + "': label " + std::to_string(r.label) + " not in {0,1}");
  if (!r.dynamic.all_finite()) throw DomainError("record '" + r.id + "': non-finite dynamic value");
  for (double v : r.static_features)
    if (!std::isfinite(v)) throw DomainError("record '" + r.id + "': non-finite static value");
}

Dims dims_of(const InstanceRecord& r) {
  if (r.dynamic.rank() != 2) throw SchemaError("record '" + r.id + "': dynamic must be a matrix");
  return {r.dynamic.dim(0), r.static_features.size(), r.dynamic.dim(1)};
}

}  // namespace

Dataset::Dataset(std::vector<InstanceRecord> records) : records_(std::move(records)) {
  if (records_.empty()) return;
  dims_ = dims_of(records_.front());
  for (const auto& r : records_) {
    validate(r, dims_);
    positives_ += static_cast<std::size_t>(r.label);
  }
  sparsity_ = static_cast<double>(positives_) / static_cast<double>(records_.size());
}

Dataset::Dataset(std::vector<InstanceRecord> records, Dims dims) : records_(std::move(records)), dims_(dims) {
  for (const auto& r : records_) {
    validate(r, dims_);
    positives_ += static_cast<std::size_t>(r.label);
  }
  if (!records_.empty()) sparsity_ = static_cast<double>(positives_) / static_cast<double>(records_.size());
}

const InstanceRecord& Dataset::find(const std::string& id) const {
  for (const auto& r : records_)
    if (r.id == id) return r;
  throw LookupError("no record with id '" + id + "'");
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label);
  return out;
}

namespace {

InstanceRecord record_from_json(const json& j, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) fail("record is not a JSON object");
  for (const char* key : {"id", "static", "dynamic", "label"})
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
  if (!j.at("id").is_string()) fail("'id' must be a string");
  InstanceRecord r;
  r.id = j.at("id").get<std::string>();

  auto number = [&](const json& v) -> double {
    if (!v.is_number()) fail("non-numeric value in record '" + r.id + "'");
    return v.get<double>();
  };

  const json& st = j.at("static");
  if (!st.is_array()) fail("'static' must be an array");
  for (const auto& v : st) r.static_features.push_back(number(v));

  const json& dyn = j.at("dynamic");
  if (!dyn.is_array() || dyn.empty()) fail("'dynamic' must be a non-empty array of channel rows");
  const std::size_t nd = dyn.size();
  std::size_t steps = 0;
  std::vector<double> values;
  for (const auto& row : dyn) {
    if (!row.is_array() || row.empty()) fail("'dynamic' rows must be non-empty arrays");
    if (steps == 0) steps = row.size();
    if (row.size() != steps)
      throw SchemaError("record '" + r.id + "': ragged dynamic rows (" + std::to_string(row.size()) + " vs " +
                        std::to_string(steps) + ")");
    for (const auto& v : row) values.push_back(number(v));
  }
  r.dynamic = Tensor({nd, steps}, std::move(values));

  const json& lab = j.at("label");
  if (!lab.is_number_integer()) fail("'label' must be 0 or 1");
  r.label = lab.get<int>();
  return r;
}

}  // namespace

Dataset parse_jsonl(std::istream& in) {
  std::vector<InstanceRecord> records;
  Dims dims;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    InstanceRecord r = record_from_json(j, line_no);
    if (records.empty()) dims = dims_of(r);
    validate(r, dims);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw SchemaError("no records");
  return Dataset(std::move(records), dims);
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  return parse_jsonl(in);
}

void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto& r : ds.records()) {
    json j;
    j["id"] = r.id;
    j["static"] = r.static_features;
    json dyn = json::array();
    const std::size_t steps = r.dynamic.dim(1);
    for (std::size_t n = 0; n < r.dynamic.dim(0); ++n) {
      std::vector<double> row(steps);
      for (std::size_t t = 0; t < steps; ++t) row[t] = r.dynamic.at(n, t);
      dyn.push_back(std::move(row));
    }
    j["dynamic"] = std::move(dyn);
    j["label"] = r.label;
    out << j.dump() << '\n';
  }
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  write_jsonl(ds, out);
}

NormStats fit_zscore(const Dataset& train) {
  if (train.empty()) throw ProtocolError("cannot fit normalization on an empty training split");
  const Dims d = train.dims();
  NormStats s;
  s.dynamic_mean.assign(d.n_dynamic, 0.0);
  s.dynamic_std.assign(d.n_dynamic, 0.0);
  s.static_mean.assign(d.n_static, 0.0);
  s.static_std.assign(d.n_static, 0.0);
  const double n_dyn = static_cast<double>(train.size() * d.steps);
  const double n_sta = static_cast<double>(train.size());

  for (const auto& r : train.records()) {
    for (std::size_t c = 0; c < d.n_dynamic; ++c)
      for (std::size_t t = 0; t < d.steps; ++t) s.dynamic_mean[c] += r.dynamic.at(c, t);
    for (std::size_t f = 0; f < d.n_static; ++f) s.static_mean[f] += r.static_features[f];
  }
  for (auto& m : s.dynamic_mean) m /= n_dyn;
  for (auto& m : s.static_mean) m /= n_sta;

  for (const auto& r : train.records()) {
    for (std::size_t c = 0; c < d.n_dynamic; ++c)
      for (std::size_t t = 0; t < d.steps; ++t) {
        const double dv = r.dynamic.at(c, t) - s.dynamic_mean[c];
        s.dynamic_std[c] += dv * dv;
      }
    for (std::size_t f = 0; f < d.n_static; ++f) {
      const double dv = r.static_features[f] - s.static_mean[f];
      s.static_std[f] += dv * dv;
    }
  }
  auto finish = [&](std::vector<double>& sd, double count, const char* kind) {
    for (std::size_t i = 0; i < sd.size(); ++i) {
      sd[i] = std::sqrt(sd[i] / count);
      if (sd[i] < NormStats::kStdFloor) {
        sd[i] = NormStats::kStdFloor;
        s.warnings.push_back(std::string(kind) + " " + std::to_string(i) + " is constant; std clamped to 1e-8");
      }
    }
  };
  finish(s.dynamic_std, n_dyn, "dynamic channel");
  finish(s.static_std, n_sta, "static feature");
  return s;
}

Dataset apply_zscore(const Dataset& ds, const NormStats& stats) {
  const Dims d = ds.dims();
  if (ds.empty()) return ds;
  if (stats.dynamic_mean.size() != d.n_dynamic || stats.static_mean.size() != d.n_static)
    throw SchemaError("normalization statistics do not match dataset dimensions");
  std::vector<InstanceRecord> out = ds.records();
  for (auto& r : out) {
    for (std::size_t c = 0; c < d.n_dynamic; ++c)
      for (std::size_t t = 0; t < d.steps; ++t)
        r.dynamic.at(c, t) = (r.dynamic.at(c, t) - stats.dynamic_mean[c]) / stats.dynamic_std[c];
    for (std::size_t f = 0; f < d.n_static; ++f)
      r.static_features[f] = (r.static_features[f] - stats.static_mean[f]) / stats.static_std[f];
  }
  return Dataset(std::move(out), d);
}

Normalized fit_apply_zscore(const Dataset& train, const std::vector<Dataset>& others) {
  Normalized n;
  n.stats = fit_zscore(train);
  n.train = apply_zscore(train, n.stats);
  for (const auto& o : others) n.others.push_back(apply_zscore(o, n.stats));
  return n;
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.valid > 0 && spec.test > 0) ||
      std::abs(spec.train + spec.valid + spec.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be positive and sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (ds[i].label ? pos : neg).push_back(i);

  std::mt19937_64 rng(spec.seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  // Split totals first, then the positive share of each split, so sizes
  // follow the fractions exactly and each split mirrors the overall sparsity.
  const auto total_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  const auto total_valid =
      std::min(n - total_train, static_cast<std::size_t>(std::llround(spec.valid * static_cast<double>(n))));
  const std::size_t P = pos.size();
  auto pos_share = [&](std::size_t total) {
    return std::min(total, static_cast<std::size_t>(std::llround(ds.sparsity() * static_cast<double>(total))));
  };
  std::size_t pos_train = std::min(P, pos_share(total_train));
  std::size_t pos_valid = std::min(P - pos_train, pos_share(total_valid));
  std::size_t neg_train = total_train - pos_train;
  std::size_t neg_valid = total_valid - pos_valid;
  if (neg_train + neg_valid > neg.size())
    throw ProtocolError("split: cannot satisfy split sizes with " + std::to_string(neg.size()) + " negatives");

  std::vector<std::size_t> idx_train, idx_valid, idx_test;
  for (std::size_t i = 0; i < P; ++i) (i < pos_train ? idx_train : i < pos_train + pos_valid ? idx_valid : idx_test).push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i)
    (i < neg_train ? idx_train : i < neg_train + neg_valid ? idx_valid : idx_test).push_back(neg[i]);

  auto build = [&](std::vector<std::size_t>& idx, const char* name) {
    std::sort(idx.begin(), idx.end());
    std::vector<InstanceRecord> recs;
    recs.reserve(idx.size());
    for (auto i : idx) recs.push_back(ds[i]);
    Dataset part(std::move(recs), ds.dims());
    if (part.positives() == 0 || part.positives() == part.size())
      throw ProtocolError(std::string("split: ") + name + " split has " +
                          (part.positives() == 0 ? "no positives" : "no negatives"));
    return part;
  };
  Split out;
  out.train = build(idx_train, "train");
  out.valid = build(idx_valid, "valid");
  out.test = build(idx_test, "test");
  return out;
}

Dataset synth_generate(const SynthSpec& spec, std::vector<PlantInfo>* truth) {
  const Dims d = spec.dims;
  if (d.steps < 8) throw ConfigError("synth: T must be at least 8");
  if (d.n_dynamic < 2) throw ConfigError("synth: N_d must be at least 2");
  if (spec.n == 0) throw ConfigError("synth: n must be positive");
  if (spec.sparsity < 0.0 || spec.sparsity > 1.0) throw ConfigError("synth: sparsity must lie in [0,1]");
  if (spec.noise < 0.0) throw ConfigError("synth: noise must be non-negative");

  std::mt19937_64 rng(spec.seed);
  const std::size_t T = d.steps;
  const std::size_t lag = T / 2;

  std::vector<int> labels(spec.n, 0);
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.sparsity * static_cast<double>(spec.n)));
  std::fill_n(labels.begin(), n_pos, 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<double> periods(d.n_dynamic);
  for (std::size_t c = 0; c < d.n_dynamic; ++c) periods[c] = 3.3 + 2.1 * static_cast<double>(c);

  std::uniform_real_distribution<double> amp_dist(0.8, 1.2);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> chan_dist(0, d.n_dynamic - 1);
  std::uniform_int_distribution<std::size_t> step_dist(0, T - 1);

  std::vector<InstanceRecord> records;
  std::vector<PlantInfo> plants(spec.n);
  records.reserve(spec.n);
  std::ostringstream id;
  for (std::size_t i = 0; i < spec.n; ++i) {
    InstanceRecord r;
    id.str("");
    id << "syn-" << std::setw(6) << std::setfill('0') << i;
    r.id = id.str();
    r.label = labels[i];
    r.dynamic = Tensor({d.n_dynamic, T});
    std::vector<double> amps(d.n_dynamic);
    for (std::size_t c = 0; c < d.n_dynamic; ++c) {
      amps[c] = amp_dist(rng);
      const double phase = phase_dist(rng);
      for (std::size_t t = 0; t < T; ++t) {
        const double base = amps[c] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / periods[c] + phase);
        r.dynamic.at(c, t) = base + spec.noise * gauss(rng);
      }
    }
    if (r.label == 1) {
      PlantInfo& p = plants[i];
      p.planted = true;
      p.channel = chan_dist(rng);
      do {
        p.step = step_dist(rng);
      } while (p.step + lag + 2 >= T);
      r.dynamic.at(p.channel, p.step) = 3.0 * amps[p.channel];
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < d.n_dynamic; ++c) r.dynamic.at(c, p.step + lag + k) = r.dynamic.at(c, p.step + k);
    }
    r.static_features.resize(d.n_static);
    for (std::size_t f = 0; f < d.n_static; ++f)
      r.static_features[f] = (f == 0 ? static_cast<double>(r.label) : 0.0) + gauss(rng);
    records.push_back(std::move(r));
  }

  const auto n_flip = static_cast<std::size_t>(std::llround(spec.flip_rate * static_cast<double>(spec.n)));
  if (n_flip > 0) {
    std::vector<std::size_t> order(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < n_flip && k < spec.n; ++k) records[order[k]].label ^= 1;
  }

  if (truth) *truth = std::move(plants);
  return Dataset(std::move(records), d);
}

}  // namespace hgv::data
