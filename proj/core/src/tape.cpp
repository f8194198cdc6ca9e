// SPDX-License-Identifier: Apache-2.0
#include "sinflow/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "sinflow/errors.hpp"

namespace sinflow {

double softplus_stable(double x) {
  // max(x,0) + log1p(exp(-|x|)) does not overflow for any finite x.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)) {
  grad = Tensor::zeros(v.shape());
  value = std::move(v);
}

Parameter& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) {
    throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  }
  index_[name] = items_.size();
  items_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  return *items_.back();
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
  return *items_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
  return *items_[it->second];
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : items_[it->second].get();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : items_) p->grad.fill(0.0);
}

double ParamStore::grad_l2_norm() const {
  double s = 0.0;
  for (const auto& p : items_) {
    for (double g : p->grad.vec()) s += g * g;
  }
  return std::sqrt(s);
}

void ParamStore::scale_grads(double s) {
  for (auto& p : items_) {
    for (double& g : p->grad.vec()) g *= s;
  }
}

std::vector<Tensor> ParamStore::values() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->value);
  return out;
}

void ParamStore::set_values(const std::vector<Tensor>& values) {
  if (values.size() != items_.size()) {
    throw std::invalid_argument("ParamStore: snapshot has " + std::to_string(values.size()) +
                                " tensors, store has " + std::to_string(items_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(items_[i]->value)) {
      throw std::invalid_argument("ParamStore: shape mismatch restoring '" + items_[i]->name + "'");
    }
    items_[i]->value = values[i];
  }
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "negate";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kMatmul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSumLast: return "sum_last";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSoftplus: return "softplus";
    case Op::kSquare: return "square";
    case Op::kSoftmaxLast: return "softmax";
    case Op::kMaskMul: return "mask_mul";
    case Op::kBroadcastAdd: return "broadcast_add";
    case Op::kBroadcastMul: return "broadcast_mul";
    case Op::kExpandLast: return "expand_last";
    case Op::kConcatLast: return "concat";
  }
  return "?";
}

namespace {

void require_same_shape(Op op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// True when `suffix` is a trailing slice of `shape`.
bool is_suffix(const std::vector<std::size_t>& suffix, const std::vector<std::size_t>& shape) {
  if (suffix.size() > shape.size()) return false;
  const std::size_t off = shape.size() - suffix.size();
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (suffix[i] != shape[off + i]) return false;
  }
  return true;
}

void require_suffix(Op op, const Tensor& a, const Tensor& suffix) {
  if (!is_suffix(suffix.shape(), a.shape())) {
    throw std::invalid_argument(std::string(op_name(op)) + ": " + shape_str(suffix.shape()) +
                                " is not a trailing slice of " + shape_str(a.shape()));
  }
}

std::size_t last_extent(const Tensor& t) {
  if (t.rank() == 0) {
    throw std::invalid_argument("sum_last/softmax/concat: scalar operand has no last axis");
  }
  return t.shape().back();
}

}  // namespace

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor v) {
  Node n{Op::kInput};
  n.value = std::move(v);
  return push(std::move(n));
}

Tape::Id Tape::param(Parameter& p) {
  Node n{Op::kParam};
  n.value = p.value;
  n.param = &p;
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  require_same_shape(Op::kAdd, val(a), val(b));
  Node n{Op::kAdd, a, b};
  n.value = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += vb[i];
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  require_same_shape(Op::kSub, val(a), val(b));
  Node n{Op::kSub, a, b};
  n.value = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= vb[i];
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  require_same_shape(Op::kMul, val(a), val(b));
  Node n{Op::kMul, a, b};
  n.value = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= vb[i];
  return push(std::move(n));
}

Tape::Id Tape::div(Id a, Id b) {
  require_same_shape(Op::kDiv, val(a), val(b));
  Node n{Op::kDiv, a, b};
  n.value = val(a);
  const Tensor& vb = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] /= vb[i];
  return push(std::move(n));
}

Tape::Id Tape::neg(Id a) {
  Node n{Op::kNeg, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = -v;
  return push(std::move(n));
}

Tape::Id Tape::add_scalar(Id a, double c) {
  Node n{Op::kAddScalar, a};
  n.value = val(a);
  n.c = c;
  for (double& v : n.value.vec()) v += c;
  return push(std::move(n));
}

Tape::Id Tape::mul_scalar(Id a, double c) {
  Node n{Op::kMulScalar, a};
  n.value = val(a);
  n.c = c;
  for (double& v : n.value.vec()) v *= c;
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  if (va.rank() != 2 || vb.rank() != 2) {
    throw std::invalid_argument("matmul: operands must be rank-2, got " + shape_str(va.shape()) +
                                " and " + shape_str(vb.shape()));
  }
  if (va.extent(1) != vb.extent(0)) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(va.shape()) +
                                " vs " + shape_str(vb.shape()));
  }
  const std::size_t m = va.extent(0), k = va.extent(1), p = vb.extent(1);
  Node n{Op::kMatmul, a, b};
  n.value = Tensor::zeros({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double aval = va[i * k + t];
      if (aval == 0.0) continue;
      const double* brow = vb.data() + t * p;
      double* orow = n.value.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += aval * brow[j];
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  Node n{Op::kSum, a};
  double s = 0.0;
  for (double v : val(a).vec()) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
  if (val(a).size() == 0) throw std::invalid_argument("mean: empty operand");
  Node n{Op::kMean, a};
  double s = 0.0;
  for (double v : val(a).vec()) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(val(a).size()));
  return push(std::move(n));
}

Tape::Id Tape::sum_last(Id a) {
  const Tensor& va = val(a);
  const std::size_t m = last_extent(va);
  std::vector<std::size_t> shape(va.shape().begin(), va.shape().end() - 1);
  Node n{Op::kSumLast, a};
  n.value = Tensor::zeros(shape);
  const std::size_t rows = n.value.size();
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* row = va.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) s += row[j];
    n.value[i] = s;
  }
  return push(std::move(n));
}

Tape::Id Tape::sin(Id a) {
  Node n{Op::kSin, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = std::sin(v);
  return push(std::move(n));
}

Tape::Id Tape::cos(Id a) {
  Node n{Op::kCos, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = std::cos(v);
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  Node n{Op::kTanh, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = std::tanh(v);
  return push(std::move(n));
}

Tape::Id Tape::exp(Id a) {
  Node n{Op::kExp, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = std::exp(v);
  return push(std::move(n));
}

Tape::Id Tape::log(Id a) {
  Node n{Op::kLog, a};
  n.value = val(a);
  for (double& v : n.value.vec()) {
    if (v <= 0.0) {
      throw std::domain_error("log: non-positive input " + std::to_string(v));
    }
    v = std::log(v);
  }
  return push(std::move(n));
}

Tape::Id Tape::softplus(Id a) {
  Node n{Op::kSoftplus, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v = softplus_stable(v);
  return push(std::move(n));
}

Tape::Id Tape::square(Id a) {
  Node n{Op::kSquare, a};
  n.value = val(a);
  for (double& v : n.value.vec()) v *= v;
  return push(std::move(n));
}

Tape::Id Tape::softmax_last(Id a) {
  const Tensor& va = val(a);
  const std::size_t m = last_extent(va);
  Node n{Op::kSoftmaxLast, a};
  n.value = va;
  const std::size_t rows = va.size() / m;
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = n.value.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= s;
  }
  return push(std::move(n));
}

Tape::Id Tape::mask_mul(Id a, Tensor mask) {
  require_same_shape(Op::kMaskMul, val(a), mask);
  Node n{Op::kMaskMul, a};
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= mask[i];
  n.aux = std::move(mask);
  return push(std::move(n));
}

Tape::Id Tape::broadcast_add(Id a, Id suffix) {
  const Tensor& va = val(a);
  const Tensor& vs = val(suffix);
  require_suffix(Op::kBroadcastAdd, va, vs);
  Node n{Op::kBroadcastAdd, a, suffix};
  n.value = va;
  const std::size_t m = vs.size();
  for (std::size_t i = 0; i < va.size(); ++i) n.value[i] += vs[i % m];
  return push(std::move(n));
}

Tape::Id Tape::broadcast_mul(Id a, Id suffix) {
  const Tensor& va = val(a);
  const Tensor& vs = val(suffix);
  require_suffix(Op::kBroadcastMul, va, vs);
  Node n{Op::kBroadcastMul, a, suffix};
  n.value = va;
  const std::size_t m = vs.size();
  for (std::size_t i = 0; i < va.size(); ++i) n.value[i] *= vs[i % m];
  return push(std::move(n));
}

Tape::Id Tape::expand_last(Id a, std::size_t k) {
  if (k == 0) throw std::invalid_argument("expand_last: factor must be >= 1");
  const Tensor& va = val(a);
  std::vector<std::size_t> shape = va.shape();
  shape.push_back(k);
  Node n{Op::kExpandLast, a};
  n.value = Tensor::zeros(shape);
  n.c = static_cast<double>(k);
  for (std::size_t i = 0; i < va.size(); ++i) {
    double* out = n.value.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) out[j] = va[i];
  }
  return push(std::move(n));
}

Tape::Id Tape::concat_last(Id a, Id b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  if (va.rank() != vb.rank() || va.rank() == 0) {
    throw std::invalid_argument("concat: rank mismatch " + shape_str(va.shape()) + " vs " +
                                shape_str(vb.shape()));
  }
  for (std::size_t i = 0; i + 1 < va.rank(); ++i) {
    if (va.extent(i) != vb.extent(i)) {
      throw std::invalid_argument("concat: leading extents disagree, " + shape_str(va.shape()) +
                                  " vs " + shape_str(vb.shape()));
    }
  }
  const std::size_t ma = va.shape().back(), mb = vb.shape().back();
  std::vector<std::size_t> shape = va.shape();
  shape.back() = ma + mb;
  Node n{Op::kConcatLast, a, b};
  n.value = Tensor::zeros(shape);
  const std::size_t rows = va.size() / std::max<std::size_t>(ma, 1);
  for (std::size_t i = 0; i < rows; ++i) {
    double* out = n.value.data() + i * (ma + mb);
    for (std::size_t j = 0; j < ma; ++j) out[j] = va[i * ma + j];
    for (std::size_t j = 0; j < mb; ++j) out[ma + j] = vb[i * mb + j];
  }
  return push(std::move(n));
}

Tensor& Tape::grad_buf(Id id) {
  Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (g.size() == 0 && val(id).size() != 0) g = Tensor::zeros(val(id).shape());
  return g;
}

void Tape::backward(Id loss) {
  const Tensor& lv = val(loss);
  if (lv.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(lv.shape()));
  }
  grads_.assign(nodes_.size(), Tensor{});
  grads_[static_cast<std::size_t>(loss)] = Tensor::full(lv.shape(), 1.0);

  for (Id id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0) continue;  // not reachable from the loss

    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParam: {
        Tensor& pg = n.param->grad;
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
        break;
      }
      case Op::kAdd: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        const Tensor& va = val(n.p0);
        const Tensor& vb = val(n.p1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kDiv: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        const Tensor& vb = val(n.p1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] / vb[i];
          gb[i] -= g[i] * n.value[i] / vb[i];
        }
        break;
      }
      case Op::kNeg: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kAddScalar: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kMulScalar: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c;
        break;
      }
      case Op::kMatmul: {
        const Tensor& va = val(n.p0);
        const Tensor& vb = val(n.p1);
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        const std::size_t m = va.extent(0), k = va.extent(1), p = vb.extent(1);
        // dA += g * B^T;  dB += A^T * g
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * p;
          for (std::size_t t = 0; t < k; ++t) {
            const double* brow = vb.data() + t * p;
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
            ga[i * k + t] += s;
          }
        }
        for (std::size_t t = 0; t < k; ++t) {
          double* brow = gb.data() + t * p;
          for (std::size_t i = 0; i < m; ++i) {
            const double aval = va[i * k + t];
            if (aval == 0.0) continue;
            const double* grow = g.data() + i * p;
            for (std::size_t j = 0; j < p; ++j) brow[j] += aval * grow[j];
          }
        }
        break;
      }
      case Op::kSum: {
        Tensor& ga = grad_buf(n.p0);
        for (double& v : ga.vec()) v += g[0];
        break;
      }
      case Op::kMean: {
        Tensor& ga = grad_buf(n.p0);
        const double s = g[0] / static_cast<double>(ga.size());
        for (double& v : ga.vec()) v += s;
        break;
      }
      case Op::kSumLast: {
        Tensor& ga = grad_buf(n.p0);
        const std::size_t m = val(n.p0).shape().back();
        for (std::size_t i = 0; i < g.size(); ++i) {
          double* row = ga.data() + i * m;
          for (std::size_t j = 0; j < m; ++j) row[j] += g[i];
        }
        break;
      }
      case Op::kSin: {
        Tensor& ga = grad_buf(n.p0);
        const Tensor& va = val(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * std::cos(va[i]);
        break;
      }
      case Op::kCos: {
        Tensor& ga = grad_buf(n.p0);
        const Tensor& va = val(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i] * std::sin(va[i]);
        break;
      }
      case Op::kTanh: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kExp: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i];
        break;
      }
      case Op::kLog: {
        Tensor& ga = grad_buf(n.p0);
        const Tensor& va = val(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / va[i];
        break;
      }
      case Op::kSoftplus: {
        Tensor& ga = grad_buf(n.p0);
        const Tensor& va = val(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid_stable(va[i]);
        break;
      }
      case Op::kSquare: {
        Tensor& ga = grad_buf(n.p0);
        const Tensor& va = val(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * va[i];
        break;
      }
      case Op::kSoftmaxLast: {
        Tensor& ga = grad_buf(n.p0);
        const std::size_t m = n.value.shape().back();
        const std::size_t rows = n.value.size() / m;
        for (std::size_t i = 0; i < rows; ++i) {
          const double* out = n.value.data() + i * m;
          const double* go = g.data() + i * m;
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j) dot += go[j] * out[j];
          double* gi = ga.data() + i * m;
          for (std::size_t j = 0; j < m; ++j) gi[j] += out[j] * (go[j] - dot);
        }
        break;
      }
      case Op::kMaskMul: {
        Tensor& ga = grad_buf(n.p0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[i];
        break;
      }
      case Op::kBroadcastAdd: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gs = grad_buf(n.p1);
        const std::size_t m = gs.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gs[i % m] += g[i];
        }
        break;
      }
      case Op::kBroadcastMul: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gs = grad_buf(n.p1);
        const Tensor& va = val(n.p0);
        const Tensor& vs = val(n.p1);
        const std::size_t m = vs.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * vs[i % m];
          gs[i % m] += g[i] * va[i];
        }
        break;
      }
      case Op::kExpandLast: {
        Tensor& ga = grad_buf(n.p0);
        const std::size_t k = static_cast<std::size_t>(n.c);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          const double* row = g.data() + i * k;
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += row[j];
          ga[i] += s;
        }
        break;
      }
      case Op::kConcatLast: {
        Tensor& ga = grad_buf(n.p0);
        Tensor& gb = grad_buf(n.p1);
        const std::size_t ma = val(n.p0).shape().back();
        const std::size_t mb = val(n.p1).shape().back();
        const std::size_t rows = val(n.p0).size() / std::max<std::size_t>(ma, 1);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* grow = g.data() + i * (ma + mb);
          for (std::size_t j = 0; j < ma; ++j) ga[i * ma + j] += grow[j];
          for (std::size_t j = 0; j < mb; ++j) gb[i * mb + j] += grow[ma + j];
        }
        break;
      }
    }
  }
}

double grad_check_against(const std::function<Tape::Id(Tape&)>& loss, ParamStore& store,
                          const std::vector<Tensor>& analytic, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be > 0");
  if (analytic.size() != store.count()) {
    throw std::invalid_argument("grad_check: analytic gradient count mismatch");
  }

  const auto eval = [&]() {
    Tape t;
    const Tensor& v = t.value(loss(t));
    if (v.size() != 1) throw std::invalid_argument("grad_check: loss must be scalar");
    if (!v.all_finite()) throw NumericError("grad_check: non-finite loss value");
    return v[0];
  };

  double worst = 0.0;
  for (std::size_t pi = 0; pi < store.count(); ++pi) {
    Parameter& p = store.item(pi);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = eval();
      p.value[i] = saved - step;
      const double down = eval();
      p.value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[pi][i];
      const double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<Tape::Id(Tape&)>& loss, ParamStore& store, double step) {
  store.zero_grads();
  {
    Tape t;
    t.backward(loss(t));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) analytic.push_back(store.item(i).grad);
  return grad_check_against(loss, store, analytic, step);
}

}  // namespace sinflow
