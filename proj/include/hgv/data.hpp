#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "hgv/tensor.hpp"

namespace hgv::data {

struct Dims {
  std::size_t n_dynamic = 0;  // channels N_d
  std::size_t n_static = 0;   // static features N_b
  std::size_t steps = 0;      // time steps T

  friend bool operator==(const Dims&, const Dims&) = default;
};

// One user/patient. `dynamic` is N_d x T (row = channel, column = time step).
struct InstanceRecord {
  std::string id;
  tensor::Tensor dynamic;
  std::vector<double> static_features;
  int label = 0;

  friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  // Validates shapes, finiteness and labels; dims come from the first record.
  explicit Dataset(std::vector<InstanceRecord> records);
  Dataset(std::vector<InstanceRecord> records, Dims dims);

  const std::vector<InstanceRecord>& records() const { return records_; }
  const InstanceRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Dims& dims() const { return dims_; }
  double sparsity() const { return sparsity_; }
  std::size_t positives() const { return positives_; }

  const InstanceRecord& find(const std::string& id) const;
  std::vector<int> labels() const;

 private:
  std::vector<InstanceRecord> records_;
  Dims dims_;
  double sparsity_ = 0.0;
  std::size_t positives_ = 0;
};

Dataset load_jsonl(const std::string& path);
Dataset parse_jsonl(std::istream& in);
void save_jsonl(const Dataset& ds, const std::string& path);
void write_jsonl(const Dataset& ds, std::ostream& out);

struct NormStats {
  std::vector<double> dynamic_mean, dynamic_std;  // per channel
  std::vector<double> static_mean, static_std;    // per feature
  std::vector<std::string> warnings;

  static constexpr double kStdFloor = 1e-8;
};

// Population statistics over `train` (every record and time step for a channel).
NormStats fit_zscore(const Dataset& train);
Dataset apply_zscore(const Dataset& ds, const NormStats& stats);

struct Normalized {
  Dataset train;
  std::vector<Dataset> others;
  NormStats stats;
};
Normalized fit_apply_zscore(const Dataset& train, const std::vector<Dataset>& others);

struct SplitSpec {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train, valid, test;
};

// Label-stratified, seeded partition. Records keep their original relative order.
Split split(const Dataset& ds, const SplitSpec& spec);

struct SynthSpec {
  std::size_t n = 1000;
  Dims dims{6, 4, 16};
  std::uint64_t seed = 0;
  double noise = 0.3;
  double sparsity = 0.5;
  double flip_rate = 0.05;
};

// Ground truth kept alongside generated data (not part of the file format).
struct PlantInfo {
  bool planted = false;     // generated as a positive (before label flips)
  std::size_t channel = 0;  // spike channel
  std::size_t step = 0;     // t*, 0-based; the repeat starts at t* + floor(T/2)
};

// Sinusoidal channels with Gaussian noise. Positives get a 3a spike on one
// channel at t* and an exact copy of columns [t*, t*+2] at t* + floor(T/2).
Dataset synth_generate(const SynthSpec& spec, std::vector<PlantInfo>* truth = nullptr);

}  // namespace hgv::data
