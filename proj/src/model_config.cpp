#include "hgv/model_config.hpp"

#include <string>

#include "hgv/errors.hpp"
#include "hgv/gge.hpp"

namespace hgv {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(dims.n_dynamic, "n_dynamic");
  positive(dims.n_static, "n_static");
  positive(dims.steps, "steps");
  positive(d1, "d1");
  positive(d2, "d2");
  positive(db, "db");
  positive(dg, "dg");
  positive(heads, "heads");
  positive(lambda1, "lambda1");
  positive(lambda2, "lambda2");
  positive(kernel, "kernel");
  positive(stride, "stride");
  if (cnn_layers < 1 || cnn_layers > 2) throw ConfigError("cnn_layers must be 1 or 2");
  if (lstm_layers != 1) throw ConfigError("lstm_layers must be 1");
  if (!(c > 0.0)) throw ConfigError("c must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!disable_gge) gge::flatten_length(*this);
}

}  // namespace hgv
