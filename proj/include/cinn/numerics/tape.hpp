// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Recorded-operation reverse-mode differentiation.
//
// Every op evaluates eagerly and appends its output to a Tape together with a
// closure that pushes the output gradient back to its inputs. backward() walks
// the tape once in reverse. Nodes live in a deque so references handed out by
// value()/grad() stay valid while the tape grows.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

#include "cinn/errors.hpp"
#include "cinn/numerics/tensor.hpp"

namespace cinn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  // Frozen parameters still take part in the forward pass but receive no
  // gradient and are skipped by the optimizer.
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // A value that never receives a gradient (data, fixed matrices).
  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr, nullptr); }

  // A free input whose gradient is wanted (used for input Jacobians).
  Var<T> leaf(Tensor<T> value) { return push(std::move(value), grad_enabled_, nullptr, nullptr); }

  Var<T> parameter(Parameter<T>& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var<T>(this, it->second);
    const bool rg = grad_enabled_ && p.trainable;
    Var<T> v = push(p.value, rg, nullptr, rg ? &p : nullptr);
    param_ids_.emplace(&p, v.id());
    return v;
  }

  // Appends the result of an op. The closure is only kept when some parent
  // needs a gradient.
  Var<T> record(const char* op, Tensor<T> value, std::span<const Var<T>> parents, BackwardFn fn) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    bool rg = false;
    if (grad_enabled_)
      for (const Var<T>& p : parents) rg = rg || requires_grad(p.id());
    return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{}, nullptr);
  }
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record(op, std::move(value), std::span<const Var<T>>(parents.begin(), parents.size()), std::move(fn));
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient buffer of a node, allocated as zeros on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_.at(id).has_grad; }

  // Populates the gradients of every reachable node and accumulates them into
  // the bound Parameters.
  void backward(Var<T> loss) {
    if (loss.tape() != this) throw ContractError("backward: variable belongs to another tape");
    if (loss.value().size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (!requires_grad(loss.id())) return;
    grad(loss.id()).fill(T(1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        if (n.param->grad.shape() != n.value.shape()) n.param->zero_grad();
        T* dst = n.param->grad.ptr();
        const T* src = n.grad.ptr();
        for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn, Parameter<T>* param) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_ids_;
};

}  // namespace cinn
