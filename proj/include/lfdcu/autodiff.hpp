// Copyright 2026 The lfdcu Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lfdcu/tensor.hpp"

// Minimal tape-free reverse-mode differentiation over Tensor values.
//
// Every operation returns a Var that owns its value and, when any input
// requires a gradient, the closure that pushes its output gradient back to
// its inputs. Calling backward() on a scalar walks the resulting DAG once in
// reverse topological order.

namespace lfdcu::ad {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

namespace detail {

inline bool& grad_disabled() {
  thread_local bool disabled = false;
  return disabled;
}

struct BranchLog {
  bool enabled = false;
  std::uint64_t hash = 0;
};

inline BranchLog& branch_log() {
  thread_local BranchLog log;
  return log;
}

}  // namespace detail

/// While alive, operations on this thread do not record backward closures.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_disabled()) { detail::grad_disabled() = true; }
  ~NoGradGuard() { detail::grad_disabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Records which side of every kink (leaky ramp, max, clamp, |x|) each
/// element fell on. Used by gradient checks to detect finite-difference
/// probes that straddle a non-differentiable point.
class BranchRecorder {
 public:
  BranchRecorder() {
    auto& log = detail::branch_log();
    prev_ = log;
    log.enabled = true;
    log.hash = 0x9e3779b97f4a7c15ULL;
  }
  ~BranchRecorder() { detail::branch_log() = prev_; }
  BranchRecorder(const BranchRecorder&) = delete;
  BranchRecorder& operator=(const BranchRecorder&) = delete;

  std::uint64_t signature() const { return detail::branch_log().hash; }

 private:
  detail::BranchLog prev_;
};

inline bool branch_recording() { return detail::branch_log().enabled; }

inline void record_branch(std::uint64_t token) {
  auto& log = detail::branch_log();
  std::uint64_t h = log.hash ^ (token + 0x9e3779b97f4a7c15ULL + (log.hash << 6) +
                                (log.hash >> 2));
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  log.hash = h;
}

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  /// A trainable leaf.
  static Var parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Accumulated gradient, or nullptr when none has flowed here.
  const Tensor<T>* grad() const {
    return node_->has_grad ? &node_->grad : nullptr;
  }
  void zero_grad() {
    node_->has_grad = false;
    node_->grad = Tensor<T>();
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Wraps an op result; `fn(self)` reads self.grad and accumulates into the
/// parents that require gradients.
template <typename T, typename Fn>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, Fn&& fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (!detail::grad_disabled()) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (const auto& p : parents) n->parents.push_back(p.node());
      n->backward_fn = std::forward<Fn>(fn);
    }
  }
  return Var<T>(std::move(n));
}

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires it.
template <typename T>
void backward(const Var<T>& root, T seed = T(1)) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Tensor<T>& g = root.node()->grad_buffer();
  for (auto& x : g.values()) x += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
}

}  // namespace lfdcu::ad
