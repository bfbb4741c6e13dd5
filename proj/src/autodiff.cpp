#include "hgv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hgv/errors.hpp"

namespace hgv::tensor {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.ref = &p.value;
  n.param = &p;
  param_nodes_[&p] = nodes_.size();
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (&p.tape() != this) throw StructuralError("operands recorded on different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) {
    n.parents.reserve(parents.size());
    for (const auto& p : parents) n.parents.push_back(p.id());
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw StructuralError("loss belongs to a different tape");
  const auto root = loss.id();
  if (nodes_.at(root).val().numel() != 1)
    throw StructuralError("backward seed must be a scalar, got shape " + shape_str(nodes_[root].val().shape()));

  std::vector<Tensor> grads(root + 1);
  grads[root] = Tensor(nodes_[root].val().shape(), 1.0);

  std::vector<const Tensor*> parent_values;
  std::vector<Tensor*> parent_grads;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!grads[i].defined() || !node.backward) continue;
    parent_values.clear();
    parent_grads.clear();
    for (auto pid : node.parents) {
      parent_values.push_back(&nodes_[pid].val());
      if (nodes_[pid].requires_grad) {
        if (!grads[pid].defined()) grads[pid] = Tensor(nodes_[pid].val().shape());
        parent_grads.push_back(&grads[pid]);
      } else {
        parent_grads.push_back(nullptr);
      }
    }
    node.backward(node.val(), grads[i], parent_values, parent_grads);
  }

  for (std::size_t i = 0; i <= root; ++i) {
    if (!grads[i].defined()) continue;
    Node& node = nodes_[i];
    if (node.param) node.param->grad += grads[i];
    if (node.grad.defined())
      node.grad += grads[i];
    else
      node.grad = std::move(grads[i]);
  }
}

const Tensor& Tape::grad(const Var& v) const {
  const Node& node = nodes_.at(v.id());
  if (!node.grad.defined()) {
    // Unreached nodes report a zero gradient of their own shape.
    auto& mutable_node = const_cast<Node&>(node);
    mutable_node.grad = Tensor(node.val().shape());
  }
  return node.grad;
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
  kink_signature_ = 0;
}

void Tape::note_branch(std::uint64_t branch) {
  kink_signature_ = (kink_signature_ ^ branch) * 0x100000001B3ULL + 0x9E3779B97F4A7C15ULL;
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw StructuralError("operands recorded on different tapes");
  return a.tape();
}

const char* kind_name(ElementwiseKind k) {
  switch (k) {
    case ElementwiseKind::add: return "add";
    case ElementwiseKind::sub: return "sub";
    case ElementwiseKind::mul: return "mul";
    case ElementwiseKind::div: return "div";
    case ElementwiseKind::sigmoid: return "sigmoid";
    case ElementwiseKind::tanh: return "tanh";
    case ElementwiseKind::relu: return "relu";
    case ElementwiseKind::log: return "log";
    case ElementwiseKind::negate: return "negate";
    case ElementwiseKind::scale: return "scale";
  }
  return "?";
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var binary(ElementwiseKind kind, Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_bcast = av.numel() == 1 && bv.numel() != 1;
  const bool b_bcast = bv.numel() == 1 && (av.numel() != 1 || av.shape() != bv.shape());
  if (!a_bcast && !b_bcast && av.shape() != bv.shape())
    throw StructuralError(std::string(kind_name(kind)) + ": shape mismatch " + shape_str(av.shape()) + " vs " +
                          shape_str(bv.shape()));

  Tensor out(a_bcast ? bv.shape() : av.shape());
  const std::size_t n = out.numel();
  auto A = [&](std::size_t i) { return a_bcast ? av[0] : av[i]; };
  auto B = [&](std::size_t i) { return b_bcast ? bv[0] : bv[i]; };

  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = A(i) + B(i);
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = A(i) - B(i);
      break;
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = A(i) * B(i);
      break;
    case ElementwiseKind::div:
      for (std::size_t i = 0; i < bv.numel(); ++i)
        if (bv[i] == 0.0) throw DomainError("div: zero divisor at index " + std::to_string(i));
      for (std::size_t i = 0; i < n; ++i) out[i] = A(i) / B(i);
      break;
    default:
      throw StructuralError(std::string(kind_name(kind)) + " is not a binary op");
  }

  return tape.record(std::move(out), {a, b},
                     [kind, a_bcast, b_bcast](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                                              std::span<Tensor* const> pg) {
                       const Tensor& x = *pv[0];
                       const Tensor& y = *pv[1];
                       Tensor* gx = pg[0];
                       Tensor* gy = pg[1];
                       const std::size_t n = g.numel();
                       auto X = [&](std::size_t i) { return a_bcast ? x[0] : x[i]; };
                       auto Y = [&](std::size_t i) { return b_bcast ? y[0] : y[i]; };
                       auto acc = [](Tensor* t, bool bcast, std::size_t i, double v) {
                         if (t) (*t)[bcast ? 0 : i] += v;
                       };
                       for (std::size_t i = 0; i < n; ++i) {
                         const double gi = g[i];
                         switch (kind) {
                           case ElementwiseKind::add:
                             acc(gx, a_bcast, i, gi);
                             acc(gy, b_bcast, i, gi);
                             break;
                           case ElementwiseKind::sub:
                             acc(gx, a_bcast, i, gi);
                             acc(gy, b_bcast, i, -gi);
                             break;
                           case ElementwiseKind::mul:
                             acc(gx, a_bcast, i, gi * Y(i));
                             acc(gy, b_bcast, i, gi * X(i));
                             break;
                           case ElementwiseKind::div: {
                             const double yi = Y(i);
                             acc(gx, a_bcast, i, gi / yi);
                             acc(gy, b_bcast, i, -gi * X(i) / (yi * yi));
                             break;
                           }
                           default:
                             break;
                         }
                       }
                     });
}

Var unary(ElementwiseKind kind, Var a, double constant) {
  Tape& tape = a.tape();
  const Tensor& av = a.value();
  Tensor out(av.shape());
  const std::size_t n = av.numel();
  switch (kind) {
    case ElementwiseKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(av[i]);
      break;
    case ElementwiseKind::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(av[i]);
      break;
    case ElementwiseKind::relu: {
      std::uint64_t h = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool on = av[i] > 0.0;
        out[i] = on ? av[i] : 0.0;
        h = h * 1099511628211ULL + (on ? 2 : 1);
      }
      tape.note_branch(h);
      break;
    }
    case ElementwiseKind::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(av[i] > 0.0)) throw DomainError("log: non-positive input at index " + std::to_string(i));
        out[i] = std::log(av[i]);
      }
      break;
    case ElementwiseKind::negate:
      for (std::size_t i = 0; i < n; ++i) out[i] = -av[i];
      break;
    case ElementwiseKind::scale:
      for (std::size_t i = 0; i < n; ++i) out[i] = constant * av[i];
      break;
    default:
      throw StructuralError(std::string(kind_name(kind)) + " is not a unary op");
  }
  return tape.record(std::move(out), {a},
                     [kind, constant](const Tensor& y, const Tensor& g, std::span<const Tensor* const> pv,
                                      std::span<Tensor* const> pg) {
                       Tensor& gx = *pg[0];
                       const Tensor& x = *pv[0];
                       const std::size_t n = g.numel();
                       switch (kind) {
                         case ElementwiseKind::sigmoid:
                           for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
                           break;
                         case ElementwiseKind::tanh:
                           for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
                           break;
                         case ElementwiseKind::relu:
                           for (std::size_t i = 0; i < n; ++i)
                             if (x[i] > 0.0) gx[i] += g[i];
                           break;
                         case ElementwiseKind::log:
                           for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / x[i];
                           break;
                         case ElementwiseKind::negate:
                           for (std::size_t i = 0; i < n; ++i) gx[i] -= g[i];
                           break;
                         case ElementwiseKind::scale:
                           for (std::size_t i = 0; i < n; ++i) gx[i] += constant * g[i];
                           break;
                         default:
                           break;
                       }
                     });
}

}  // namespace

Var elementwise(ElementwiseKind kind, Var a, std::optional<Var> b, double constant) {
  switch (kind) {
    case ElementwiseKind::add:
    case ElementwiseKind::sub:
    case ElementwiseKind::mul:
    case ElementwiseKind::div:
      if (!b) throw StructuralError(std::string(kind_name(kind)) + " needs two operands");
      return binary(kind, a, *b);
    default:
      if (b) throw StructuralError(std::string(kind_name(kind)) + " takes one operand");
      return unary(kind, a, constant);
  }
}

Var add(Var a, Var b) { return binary(ElementwiseKind::add, a, b); }
Var sub(Var a, Var b) { return binary(ElementwiseKind::sub, a, b); }
Var mul(Var a, Var b) { return binary(ElementwiseKind::mul, a, b); }
Var div(Var a, Var b) { return binary(ElementwiseKind::div, a, b); }
Var sigmoid(Var a) { return unary(ElementwiseKind::sigmoid, a, 0.0); }
Var tanh(Var a) { return unary(ElementwiseKind::tanh, a, 0.0); }
Var relu(Var a) { return unary(ElementwiseKind::relu, a, 0.0); }
Var log(Var a) { return unary(ElementwiseKind::log, a, 0.0); }
Var negate(Var a) { return unary(ElementwiseKind::negate, a, 0.0); }
Var scale(Var a, double factor) { return unary(ElementwiseKind::scale, a, factor); }

Var add_constant(Var a, double offset) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + offset;
  return a.tape().record(std::move(out), {a},
                         [](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                            std::span<Tensor* const> pg) { *pg[0] += g; });
}

Var softplus(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double x = av[i];
    out[i] = std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
  }
  return a.tape().record(std::move(out), {a},
                         [](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                            std::span<Tensor* const> pg) {
                           const Tensor& x = *pv[0];
                           Tensor& gx = *pg[0];
                           for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * sigmoid_scalar(x[i]);
                         });
}

Var clamp(Var a, double lo, double hi) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double x = av[i];
    const int side = x < lo ? 1 : (x > hi ? 2 : 3);
    out[i] = std::clamp(x, lo, hi);
    h = h * 1099511628211ULL + side;
  }
  a.tape().note_branch(h);
  return a.tape().record(std::move(out), {a},
                         [lo, hi](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                                  std::span<Tensor* const> pg) {
                           const Tensor& x = *pv[0];
                           Tensor& gx = *pg[0];
                           for (std::size_t i = 0; i < g.numel(); ++i)
                             if (x[i] >= lo && x[i] <= hi) gx[i] += g[i];
                         });
}

Var clamp_abs_min(Var a, double floor) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double x = av[i];
    const bool active = std::abs(x) < floor;
    out[i] = active ? (x < 0.0 ? -floor : floor) : x;
    h = h * 1099511628211ULL + (active ? 2 : 1);
  }
  a.tape().note_branch(h);
  return a.tape().record(std::move(out), {a},
                         [floor](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                                 std::span<Tensor* const> pg) {
                           const Tensor& x = *pv[0];
                           Tensor& gx = *pg[0];
                           for (std::size_t i = 0; i < g.numel(); ++i)
                             if (std::abs(x[i]) >= floor) gx[i] += g[i];
                         });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw StructuralError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw StructuralError("matmul inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor out({m, n});
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  Tensor out = matmul(a.value(), b.value());
  return tape.record(std::move(out), {a, b},
                     [](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                        std::span<Tensor* const> pg) {
                       const Tensor& A = *pv[0];
                       const Tensor& B = *pv[1];
                       const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
                       const double* G = g.data().data();
                       if (pg[0]) {
                         // dA = G * B^T
                         double* dA = pg[0]->data().data();
                         const double* Bd = B.data().data();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * Bd[p * n + j];
                             dA[i * k + p] += s;
                           }
                       }
                       if (pg[1]) {
                         // dB = A^T * G
                         double* dB = pg[1]->data().data();
                         const double* Ad = A.data().data();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = Ad[i * k + p];
                             if (aip == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += aip * G[i * n + j];
                           }
                       }
                     });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw StructuralError("transpose expects rank 2, got " + shape_str(av.shape()));
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.tape().record(std::move(out), {a},
                         [r, c](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                                std::span<Tensor* const> pg) {
                           Tensor& gx = *pg[0];
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g.at(j, i);
                         });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a},
                         [](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                            std::span<Tensor* const> pg) {
                           Tensor& gx = *pg[0];
                           for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                         });
}

Var conv2d(Var input, Var kernels, Var bias, std::size_t stride) {
  Tape& tape = same_tape(input, kernels);
  same_tape(input, bias);
  const Tensor& in = input.value();
  const Tensor& K = kernels.value();
  const Tensor& b = bias.value();
  if (in.rank() != 3) throw StructuralError("conv2d input must be cin x H x W, got " + shape_str(in.shape()));
  if (K.rank() != 4 || K.dim(2) != K.dim(3))
    throw StructuralError("conv2d kernels must be cout x cin x k x k, got " + shape_str(K.shape()));
  if (K.dim(1) != in.dim(0))
    throw StructuralError("conv2d channel mismatch: input " + shape_str(in.shape()) + ", kernels " +
                          shape_str(K.shape()));
  if (b.rank() != 1 || b.dim(0) != K.dim(0))
    throw StructuralError("conv2d bias must have length cout, got " + shape_str(b.shape()));
  if (stride == 0) throw StructuralError("conv2d stride must be >= 1");
  const std::size_t cin = in.dim(0), H = in.dim(1), W = in.dim(2);
  const std::size_t cout = K.dim(0), k = K.dim(2);
  if (H < k || W < k)
    throw StructuralError("conv2d kernel " + std::to_string(k) + " larger than input " + shape_str(in.shape()));
  const std::size_t Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;

  Tensor out({cout, Ho, Wo});
  for (std::size_t o = 0; o < cout; ++o) {
    double* op = &out.at(o, 0, 0);
    std::fill(op, op + Ho * Wo, b[o]);
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double w = K[((o * cin + c) * k + ky) * k + kx];
          for (std::size_t y = 0; y < Ho; ++y) {
            const double* row = &in.at(c, y * stride + ky, kx);
            double* orow = op + y * Wo;
            for (std::size_t x = 0; x < Wo; ++x) orow[x] += w * row[x * stride];
          }
        }
  }

  return tape.record(
      std::move(out), {input, kernels, bias},
      [cin, cout, k, stride, Ho, Wo](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                                     std::span<Tensor* const> pg) {
        const Tensor& in = *pv[0];
        const Tensor& K = *pv[1];
        Tensor* gin = pg[0];
        Tensor* gK = pg[1];
        Tensor* gb = pg[2];
        for (std::size_t o = 0; o < cout; ++o) {
          const double* go = &g.at(o, 0, 0);
          if (gb) {
            double s = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) s += go[i];
            (*gb)[o] += s;
          }
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::size_t kidx = ((o * cin + c) * k + ky) * k + kx;
                const double w = K[kidx];
                double acc = 0.0;
                for (std::size_t y = 0; y < Ho; ++y) {
                  const double* row = &in.at(c, y * stride + ky, kx);
                  const double* grow = go + y * Wo;
                  if (gK)
                    for (std::size_t x = 0; x < Wo; ++x) acc += grow[x] * row[x * stride];
                  if (gin) {
                    double* girow = &gin->at(c, y * stride + ky, kx);
                    for (std::size_t x = 0; x < Wo; ++x) girow[x * stride] += w * grow[x];
                  }
                }
                if (gK) (*gK)[kidx] += acc;
              }
        }
      });
}

namespace {
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw StructuralError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}
}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (!x.all_finite()) throw DomainError("softmax: non-finite input");
  const auto s = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, x[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(x[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  return out;
}

Var softmax(Var x, std::size_t axis) {
  Tensor out = softmax(x.value(), axis);
  const auto s = split_axis(x.shape(), axis);
  return x.tape().record(std::move(out), {x},
                         [s](const Tensor& y, const Tensor& g, std::span<const Tensor* const>,
                             std::span<Tensor* const> pg) {
                           Tensor& gx = *pg[0];
                           for (std::size_t o = 0; o < s.outer; ++o)
                             for (std::size_t in = 0; in < s.inner; ++in) {
                               const std::size_t base = o * s.n * s.inner + in;
                               double dot = 0.0;
                               for (std::size_t j = 0; j < s.n; ++j) {
                                 const std::size_t idx = base + j * s.inner;
                                 dot += g[idx] * y[idx];
                               }
                               for (std::size_t j = 0; j < s.n; ++j) {
                                 const std::size_t idx = base + j * s.inner;
                                 gx[idx] += y[idx] * (g[idx] - dot);
                               }
                             }
                         });
}

double max_abs(const Tensor& x) {
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

Var reduce(ReduceKind kind, Var x, std::optional<std::size_t> axis) {
  const Tensor& xv = x.value();
  Tape& tape = x.tape();
  if (!axis) {
    if (kind == ReduceKind::max_abs) return tape.constant(Tensor::scalar(max_abs(xv)));
    double total = 0.0;
    for (double v : xv.data()) total += v;
    const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(xv.numel()) : 1.0;
    return tape.record(Tensor::scalar(total * factor), {x},
                       [factor](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                                std::span<Tensor* const> pg) {
                         Tensor& gx = *pg[0];
                         const double gi = g[0] * factor;
                         for (auto& v : gx.data()) v += gi;
                       });
  }

  const auto s = split_axis(xv.shape(), *axis);
  Shape out_shape;
  for (std::size_t i = 0; i < xv.rank(); ++i)
    if (i != *axis) out_shape.push_back(xv.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double acc = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double v = xv[base + j * s.inner];
        acc = kind == ReduceKind::max_abs ? std::max(acc, std::abs(v)) : acc + v;
      }
      if (kind == ReduceKind::mean) acc /= static_cast<double>(s.n);
      out[o * s.inner + in] = acc;
    }
  if (kind == ReduceKind::max_abs) return tape.constant(std::move(out));
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(s.n) : 1.0;
  return tape.record(std::move(out), {x},
                     [s, factor](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                                 std::span<Tensor* const> pg) {
                       Tensor& gx = *pg[0];
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t in = 0; in < s.inner; ++in) {
                           const double gi = g[o * s.inner + in] * factor;
                           const std::size_t base = o * s.n * s.inner + in;
                           for (std::size_t j = 0; j < s.n; ++j) gx[base + j * s.inner] += gi;
                         }
                     });
}

Var sum(Var x) { return reduce(ReduceKind::sum, x); }
Var mean(Var x) { return reduce(ReduceKind::mean, x); }

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw StructuralError("slice_rows expects rank 2, got " + shape_str(xv.shape()));
  if (count == 0 || begin + count > xv.dim(0))
    throw StructuralError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                          ") out of range for " + shape_str(xv.shape()));
  const std::size_t cols = xv.dim(1);
  Tensor out({count, cols});
  std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * cols), count * cols, out.data().begin());
  return x.tape().record(std::move(out), {x},
                         [begin, cols](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                                       std::span<Tensor* const> pg) {
                           Tensor& gx = *pg[0];
                           const std::size_t off = begin * cols;
                           for (std::size_t i = 0; i < g.numel(); ++i) gx[off + i] += g[i];
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_cols of nothing");
  Tape& tape = parts[0].tape();
  const std::size_t rows = parts[0].value().rank() == 2 ? parts[0].value().dim(0) : 0;
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.dim(0) != rows)
      throw StructuralError("concat_cols: part of shape " + shape_str(v.shape()) + " does not have " +
                            std::to_string(rows) + " rows");
    offsets.push_back(cols);
    cols += v.dim(1);
  }
  Tensor out({rows, cols});
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& v = parts[pi].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.dim(1); ++c) out.at(r, offsets[pi] + c) = v.at(r, c);
  }
  return tape.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets](const Tensor&, const Tensor& g, std::span<const Tensor* const> pv,
                               std::span<Tensor* const> pg) {
                       for (std::size_t pi = 0; pi < pg.size(); ++pi) {
                         if (!pg[pi]) continue;
                         Tensor& gp = *pg[pi];
                         const std::size_t rows = pv[pi]->dim(0), pc = pv[pi]->dim(1);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < pc; ++c) gp.at(r, c) += g.at(r, offsets[pi] + c);
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_rows of nothing");
  Tape& tape = parts[0].tape();
  const std::size_t cols = parts[0].value().rank() == 2 ? parts[0].value().dim(1) : 0;
  std::vector<std::size_t> offsets;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.dim(1) != cols)
      throw StructuralError("concat_rows: part of shape " + shape_str(v.shape()) + " does not have " +
                            std::to_string(cols) + " columns");
    offsets.push_back(rows * cols);
    rows += v.dim(0);
  }
  Tensor out({rows, cols});
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto src = parts[pi].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offsets[pi]));
  }
  return tape.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                               std::span<Tensor* const> pg) {
                       for (std::size_t pi = 0; pi < pg.size(); ++pi) {
                         if (!pg[pi]) continue;
                         Tensor& gp = *pg[pi];
                         for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += g[offsets[pi] + i];
                       }
                     });
}

}  // namespace hgv::tensor
