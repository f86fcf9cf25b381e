// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over row-major matrices. Every op
// records a closure that pushes its output gradient to its inputs; Tape
// replays them in reverse creation order. Rows are tokens throughout the
// model, so broadcasting is limited to 1 x d row vectors.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace gencomp::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
    return grad;
  }
  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> MakeLeaf(Matrix<T> value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var<T> Constant(Matrix<T> value) { return MakeLeaf<T>(std::move(value), false); }

  // Wraps `value` as an op output. The closure is kept only when recording
  // and at least one input needs a gradient.
  Var<T> Emit(Matrix<T> value, std::initializer_list<const Var<T>*> inputs,
              std::function<void(Node<T>&)> backward) {
    auto out = MakeLeaf<T>(std::move(value), false);
    if (!recording_) return out;
    bool needs = false;
    for (const Var<T>* in : inputs) needs = needs || (*in)->requires_grad;
    if (!needs) return out;
    out->requires_grad = true;
    out->backward = std::move(backward);
    nodes_.push_back(out);
    return out;
  }

  // Seeds d(root) = seed and propagates; clears the recorded graph.
  void Backward(const Var<T>& root, T seed = T(1));
  void Clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  bool recording_;
  std::vector<Var<T>> nodes_;
};

// --- ops -------------------------------------------------------------------

template <typename T>
Var<T> MatMul(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

// x * w + b, w stored (in x out); `b` may be null.
template <typename T>
Var<T> Linear(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b);

template <typename T>
Var<T> Add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

// Per-row normalization without affine parameters.
template <typename T>
Var<T> LayerNorm(Tape<T>& tape, const Var<T>& x, T eps = T(1e-6));

// x * (1 + scale) + shift with 1 x d shift/scale.
template <typename T>
Var<T> Modulate(Tape<T>& tape, const Var<T>& x, const Var<T>& shift, const Var<T>& scale);

// x + y * gate with 1 x d gate.
template <typename T>
Var<T> GatedAdd(Tape<T>& tape, const Var<T>& x, const Var<T>& y, const Var<T>& gate);

template <typename T>
Var<T> Silu(Tape<T>& tape, const Var<T>& x);

// tanh approximation.
template <typename T>
Var<T> Gelu(Tape<T>& tape, const Var<T>& x);

template <typename T>
Var<T> SliceCols(Tape<T>& tape, const Var<T>& x, Eigen::Index start, Eigen::Index count);

template <typename T>
Var<T> SliceRows(Tape<T>& tape, const Var<T>& x, Eigen::Index start, Eigen::Index count);

template <typename T>
Var<T> ConcatRows(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

// Rotary position embedding applied independently to each head's slice.
// `angles` is tokens x head_dim/2.
template <typename T>
Var<T> Rotary(Tape<T>& tape, const Var<T>& x, std::shared_ptr<const std::vector<double>> angles,
              int head_dim);

// Exact multi-head softmax attention. q: N x d, k/v: M x d.
template <typename T>
Var<T> Attention(Tape<T>& tape, const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads);

// x + diag(weights) * y.
template <typename T>
Var<T> RowWeightedAdd(Tape<T>& tape, const Var<T>& x, const Var<T>& y,
                      std::shared_ptr<const std::vector<T>> weights);

// out.flat[i] = x.flat[index[i]]; index -1 yields 0.
template <typename T>
Var<T> Gather(Tape<T>& tape, const Var<T>& x, std::shared_ptr<const std::vector<std::int64_t>> index,
              Eigen::Index rows, Eigen::Index cols);

// mean((pred - target)^2) as a 1 x 1 node.
template <typename T>
Var<T> MeanSquaredError(Tape<T>& tape, const Var<T>& pred, const Matrix<T>& target);

}  // namespace gencomp::ag
