// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sinflow/tensor.hpp"

namespace sinflow {

/// Trainable tensor together with its gradient accumulator. Gradients are
/// additive across backward passes until zeroed; zeroing leaves values intact.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v);
};

/// Named trainable parameters with stable registration order.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Parameter* find(const std::string& name);

  std::size_t count() const { return items_.size(); }
  std::size_t scalar_count() const;

  Parameter& item(std::size_t i) { return *items_[i]; }
  const Parameter& item(std::size_t i) const { return *items_[i]; }

  void zero_grads();
  double grad_l2_norm() const;
  void scale_grads(double s);

  std::vector<Tensor> values() const;
  void set_values(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> items_;  // pointer-stable
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Op : std::uint8_t {
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kAddScalar,
  kMulScalar,
  kMatmul,
  kSum,
  kMean,
  kSumLast,
  kSin,
  kCos,
  kTanh,
  kExp,
  kLog,
  kSoftplus,
  kSquare,
  kSoftmaxLast,
  kMaskMul,
  kBroadcastAdd,
  kBroadcastMul,
  kExpandLast,
  kConcatLast,
};

const char* op_name(Op op);

/// Define-by-run reverse-mode tape over Tensors.
///
/// Node creation evaluates the op eagerly and caches the output, so the graph
/// holds every intermediate needed by backward(). Node ids are topologically
/// ordered by creation; backward() visits each reachable node exactly once in
/// reverse creation order. The tape is rebuilt every forward pass.
class Tape {
 public:
  using Id = std::int32_t;

  Id input(Tensor v);
  Id param(Parameter& p);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id div(Id a, Id b);
  Id neg(Id a);
  Id add_scalar(Id a, double c);
  Id mul_scalar(Id a, double c);
  Id matmul(Id a, Id b);
  Id sum(Id a);
  Id mean(Id a);
  Id sum_last(Id a);
  Id sin(Id a);
  Id cos(Id a);
  Id tanh(Id a);
  Id exp(Id a);
  Id log(Id a);
  Id softplus(Id a);
  Id square(Id a);
  Id softmax_last(Id a);
  Id mask_mul(Id a, Tensor mask);
  /// Adds `suffix` to `a`, tiling it over the leading axes of `a`; the shape
  /// of `suffix` must be a trailing slice of a's shape.
  Id broadcast_add(Id a, Id suffix);
  Id broadcast_mul(Id a, Id suffix);
  /// Repeats each element k times along a new last axis.
  Id expand_last(Id a, std::size_t k);
  Id concat_last(Id a, Id b);

  const Tensor& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss; accumulates into Parameter::grad.
  void backward(Id loss);

  /// Gradient of the last backward() seed w.r.t. any node (empty if the node
  /// was not reached).
  const Tensor& grad(Id id) const { return grads_[static_cast<std::size_t>(id)]; }

 private:
  struct Node {
    explicit Node(Op o, Id a = -1, Id b = -1) : op(o), p0(a), p1(b) {}
    Op op;
    Id p0;
    Id p1;
    Tensor value;
    Tensor aux;               // mask for kMaskMul
    double c = 0.0;           // scalar operand / expand factor
    Parameter* param = nullptr;
  };

  Id push(Node n);
  const Tensor& val(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor& grad_buf(Id id);

  // deque keeps value() references stable while ops append
  std::deque<Node> nodes_;
  std::vector<Tensor> grads_;
};

/// Forward value of a node; intermediates are already cached for backward.
inline const Tensor& evaluate(const Tape& tape, Tape::Id id) { return tape.value(id); }

/// Max over all parameters of |analytic - central difference| / max(1, |analytic|),
/// where the analytic gradients are those provided by the caller.
double grad_check_against(const std::function<Tape::Id(Tape&)>& loss, ParamStore& store,
                          const std::vector<Tensor>& analytic, double step);

/// Full gradient check: runs backward for the analytic side, then central
/// differences with the given step on every parameter element.
double grad_check(const std::function<Tape::Id(Tape&)>& loss, ParamStore& store, double step);

double softplus_stable(double x);
double sigmoid_stable(double x);

}  // namespace sinflow
