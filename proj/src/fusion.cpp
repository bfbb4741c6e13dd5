#include "hgv/fusion.hpp"

#include <cmath>
#include <string>

#include "hgv/errors.hpp"

namespace hgv::fusion {

using tensor::Tensor;
using tensor::Var;

Var embed_and_fuse(tensor::Tape& tape, std::span<const double> static_features, Var graph_embedding,
                   const FuseParams& params) {
  const std::size_t nb = params.static_weight->value.dim(1);
  if (static_features.size() != nb)
    throw StructuralError("embed_and_fuse: " + std::to_string(static_features.size()) +
                          " static features, model expects " + std::to_string(nb));
  Var f = tape.constant(Tensor({nb, 1}, std::vector<double>(static_features.begin(), static_features.end())));
  Var static_embedding =
      tensor::relu(tensor::add(tensor::matmul(tape.param(*params.static_weight), f), tape.param(*params.static_bias)));
  Var fused_input = static_embedding;
  if (graph_embedding.valid()) {
    const Var parts[] = {static_embedding, graph_embedding};
    fused_input = tensor::concat_rows(parts);
  }
  if (params.fuse_weight->value.dim(1) != fused_input.shape()[0])
    throw StructuralError("embed_and_fuse: FuseNet expects " + std::to_string(params.fuse_weight->value.dim(1)) +
                          " inputs, got " + std::to_string(fused_input.shape()[0]));
  return tensor::add(tensor::matmul(tape.param(*params.fuse_weight), fused_input), tape.param(*params.fuse_bias));
}

MultiHeadResult multihead(tensor::Tape& tape, Var stack, const MultiHeadParams& params,
                          const MultiHeadOptions& options) {
  const std::size_t d = stack.shape()[0];
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  MultiHeadResult result;
  std::vector<Var> heads;
  for (std::size_t h = 0; h < params.query.size(); ++h) {
    Var q = tensor::matmul(tape.param(*params.query[h]), stack);
    Var k = tensor::matmul(tape.param(*params.key[h]), stack);
    Var v = tensor::matmul(tape.param(*params.value[h]), stack);
    Var scores = tensor::scale(tensor::matmul(tensor::transpose(q), k), inv_sqrt_d);
    Var attention = tensor::softmax(scores, 1);
    heads.push_back(tensor::matmul(v, tensor::transpose(attention)));
    result.attention.push_back(attention);
  }
  Var out = tensor::matmul(tensor::transpose(tape.param(*params.output)), tensor::concat_rows(heads));
  if (options.residual) out = tensor::add(out, stack);
  if (options.train && options.dropout > 0.0) {
    if (!options.rng) throw ProtocolError("multihead: dropout in train mode needs a random generator");
    Tensor mask(out.shape());
    std::bernoulli_distribution keep(1.0 - options.dropout);
    const double scale = 1.0 / (1.0 - options.dropout);
    for (auto& m : mask.data()) m = keep(*options.rng) ? scale : 0.0;
    out = tensor::mul(out, tape.constant(std::move(mask)));
  }
  result.output = out;
  return result;
}

Aggregate global_view_aggregate(Var refined) {
  const std::size_t m = refined.shape()[1];
  Var columns = tensor::transpose(refined);            // M x d
  Var guide = tensor::slice_rows(columns, m - 1, 1);   // 1 x d, the instance-level column
  Var logits = tensor::matmul(columns, tensor::transpose(guide));
  Var mu = tensor::softmax(logits, 0);
  return {tensor::matmul(refined, mu), mu};
}

Var predict(tensor::Tape& tape, Var representation, const PredictorParams& params) {
  Var hidden = tensor::relu(
      tensor::add(tensor::matmul(tape.param(*params.hidden_weight), representation), tape.param(*params.hidden_bias)));
  Var logit = tensor::add(tensor::matmul(tape.param(*params.out_weight), hidden), tape.param(*params.out_bias));
  return tensor::sigmoid(logit);
}

namespace {
void add_linear(tensor::ParamStore& store, const std::string& prefix, std::size_t out, std::size_t in,
                std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(prefix + "/W", tensor::uniform_init({out, in}, bound, seed, prefix + "/W"));
  store.add(prefix + "/b", tensor::uniform_init({out, 1}, bound, seed, prefix + "/b"));
}

std::string head_name(std::size_t h, const char* which) {
  return "mha/head" + std::to_string(h) + "/" + which;
}
}  // namespace

tensor::ParamStore HgvModel::build_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  tensor::ParamStore store;
  const auto& dims = config.dims;
  if (!config.disable_gge) gge::register_params(store, config, seed);
  for (std::size_t n = 0; n < dims.n_dynamic; ++n) seqenc::register_params(store, n, config.d1, seed);
  battn::register_params(store, dims.n_dynamic, config.d1, config.d2, !config.disable_beta_attn, seed);
  add_linear(store, "static", config.db, dims.n_static, seed);
  add_linear(store, "fuse", config.d1, config.db + (config.disable_gge ? 0 : config.dg), seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d1));
  for (std::size_t h = 0; h < config.heads; ++h)
    for (const char* which : {"Wq", "Wk", "Wv"})
      store.add(head_name(h, which), tensor::uniform_init({config.d1, config.d1}, bound, seed, head_name(h, which)));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(config.d1 * config.heads));
  store.add("mha/WH", tensor::uniform_init({config.d1 * config.heads, config.d1}, out_bound, seed, "mha/WH"));
  add_linear(store, "predictor/hidden", config.d1, config.d1, seed);
  add_linear(store, "predictor/out", 1, config.d1, seed);
  return store;
}

HgvModel::HgvModel(ModelConfig config, std::uint64_t seed) : config_(config), store_(build_params(config, seed)) {
  bind();
}

HgvModel::HgvModel(ModelConfig config, tensor::ParamStore params) : config_(config), store_(std::move(params)) {
  const tensor::ParamStore expected = build_params(config_, 0);
  if (expected.size() != store_.size())
    throw SchemaError("parameter set has " + std::to_string(store_.size()) + " entries, configuration expects " +
                      std::to_string(expected.size()));
  for (const auto* p : expected.all()) {
    if (!store_.contains(p->name)) throw SchemaError("missing parameter '" + p->name + "'");
    if (store_.get(p->name).value.shape() != p->value.shape())
      throw SchemaError("parameter '" + p->name + "' has shape " + tensor::shape_str(store_.get(p->name).value.shape()) +
                        ", expected " + tensor::shape_str(p->value.shape()));
  }
  bind();
}

HgvModel::HgvModel(const HgvModel& other) : config_(other.config_), store_(other.store_) { bind(); }

HgvModel& HgvModel::operator=(const HgvModel& other) {
  if (this != &other) {
    config_ = other.config_;
    store_ = other.store_;
    bind();
  }
  return *this;
}

void HgvModel::bind() {
  const auto& dims = config_.dims;
  gge_ = config_.disable_gge ? gge::GGEParams{} : gge::bind(store_, config_);
  lstms_.clear();
  for (std::size_t n = 0; n < dims.n_dynamic; ++n) lstms_.push_back(seqenc::bind(store_, n));
  battn_ = battn::bind(store_, dims.n_dynamic, !config_.disable_beta_attn, config_.c);
  fuse_ = {&store_.get("static/W"), &store_.get("static/b"), &store_.get("fuse/W"), &store_.get("fuse/b")};
  heads_ = {};
  for (std::size_t h = 0; h < config_.heads; ++h) {
    heads_.query.push_back(&store_.get(head_name(h, "Wq")));
    heads_.key.push_back(&store_.get(head_name(h, "Wk")));
    heads_.value.push_back(&store_.get(head_name(h, "Wv")));
  }
  heads_.output = &store_.get("mha/WH");
  predictor_ = {&store_.get("predictor/hidden/W"), &store_.get("predictor/hidden/b"), &store_.get("predictor/out/W"),
                &store_.get("predictor/out/b")};
}

ForwardResult hgv_forward(tensor::Tape& tape, const data::InstanceRecord& record, HgvModel& model, Mode mode,
                          std::mt19937_64* rng) {
  const ModelConfig& cfg = model.config();
  const auto& dims = cfg.dims;
  const Tensor& S = record.dynamic;
  if (S.rank() != 2 || S.dim(0) != dims.n_dynamic || S.dim(1) != dims.steps ||
      record.static_features.size() != dims.n_static)
    throw SchemaError("record '" + record.id + "' does not match model dimensions");
  const std::size_t T = dims.steps;

  ForwardResult result;
  Trace& trace = result.trace;

  // Instance level: correlation graph embedding fused with the static embedding.
  Var graph_embedding;
  if (!cfg.disable_gge) {
    gge::CorrGraph graph = gge::build_corr_graph(S);
    graph_embedding = gge::gge_forward(tape, graph, model.gge());
    trace.graph = std::move(graph.adjacency);
  }
  Var global_view = embed_and_fuse(tape, record.static_features, graph_embedding, model.fuse());

  // Channel level.
  const auto& attn = model.attention();
  const bool harmonic = !cfg.disable_beta_attn;
  Var beta;
  std::vector<double> decay;
  if (harmonic) {
    beta = battn::trade_off(tape, attn);
    decay = battn::decay_row(T);
  }
  std::vector<Var> columns;
  columns.reserve(dims.n_dynamic + 1);
  for (std::size_t n = 0; n < dims.n_dynamic; ++n) {
    std::span<const double> row(S.data().data() + n * T, T);
    seqenc::HiddenSeq hidden = seqenc::lstm_channel_forward(tape, row, model.lstms()[n]);
    Var alpha;
    if (harmonic) {
      Var betas = battn::harmonic_weights(tape, beta, decay, battn::significance_row(row));
      alpha = battn::battn_alpha(tape, hidden, betas, attn.channels[n], attn.c);
      trace.beta.push_back(betas.value().values());
    } else {
      alpha = battn::plain_alpha(tape, hidden, attn.channels[n]);
    }
    trace.alpha.push_back(alpha.value().values());
    columns.push_back(battn::channel_represent(hidden, alpha));
  }
  columns.push_back(global_view);
  Var stack = tensor::concat_cols(columns);

  MultiHeadOptions mh;
  mh.residual = true;
  mh.dropout = cfg.dropout;
  mh.train = mode == Mode::train;
  mh.rng = rng;
  MultiHeadResult refined = multihead(tape, stack, model.heads(), mh);
  Aggregate agg = global_view_aggregate(refined.output);
  result.representation = agg.representation;
  result.y_hat = predict(tape, agg.representation, model.predictor());
  trace.mu = agg.weights.value().values();
  trace.y_hat = result.y_hat.value().item();
  return result;
}

}  // namespace hgv::fusion
