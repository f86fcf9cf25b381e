// SPDX-License-Identifier: Apache-2.0
#include "gencomp/autograd.h"

#include <cmath>

#include "gencomp/error.h"
#include "gencomp/rope.h"

namespace gencomp::ag {
namespace {

template <typename T>
void Accumulate(const Var<T>& v, const auto& g) {
  if (v->requires_grad) v->grad_buffer() += g;
}

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

}  // namespace

template <typename T>
void Tape<T>::Backward(const Var<T>& root, T seed) {
  if (root->value.size() != 1) throw InvalidInput("backward root must be a scalar");
  if (!root->requires_grad) {
    Clear();
    return;
  }
  root->grad_buffer()(0, 0) += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<T>& n = **it;
    if (n.grad.size() != 0 && n.backward) n.backward(n);
  }
  Clear();
}

template <typename T>
Var<T> MatMul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->cols() != b->rows()) throw InvalidInput("matmul: inner dims mismatch");
  Matrix<T> out = a->value * b->value;
  return tape.Emit(std::move(out), {&a, &b}, [a, b](Node<T>& self) {
    if (a->requires_grad) a->grad_buffer().noalias() += self.grad * b->value.transpose();
    if (b->requires_grad) b->grad_buffer().noalias() += a->value.transpose() * self.grad;
  });
}

template <typename T>
Var<T> Linear(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x->cols() != w->rows()) throw InvalidInput("linear: input width mismatch");
  Matrix<T> out(x->rows(), w->cols());
  out.noalias() = x->value * w->value;
  if (b) out.rowwise() += b->value.row(0);
  auto fn = [x, w, b](Node<T>& self) {
    if (x->requires_grad) x->grad_buffer().noalias() += self.grad * w->value.transpose();
    if (w->requires_grad) w->grad_buffer().noalias() += x->value.transpose() * self.grad;
    if (b && b->requires_grad) b->grad_buffer() += self.grad.colwise().sum();
  };
  if (b) return tape.Emit(std::move(out), {&x, &w, &b}, fn);
  return tape.Emit(std::move(out), {&x, &w}, fn);
}

template <typename T>
Var<T> Add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) throw InvalidInput("add: shape mismatch");
  Matrix<T> out = a->value + b->value;
  return tape.Emit(std::move(out), {&a, &b}, [a, b](Node<T>& self) {
    Accumulate(a, self.grad);
    Accumulate(b, self.grad);
  });
}

template <typename T>
Var<T> LayerNorm(Tape<T>& tape, const Var<T>& x, T eps) {
  const Eigen::Index n = x->rows();
  const Eigen::Index d = x->cols();
  Matrix<T> out(n, d);
  auto rstd = std::make_shared<Eigen::Matrix<T, Eigen::Dynamic, 1>>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x->value.row(i).array();
    const T mean = row.mean();
    const T var = (row - mean).square().mean();
    const T r = T(1) / std::sqrt(var + eps);
    (*rstd)(i) = r;
    out.row(i) = ((row - mean) * r).matrix();
  }
  return tape.Emit(std::move(out), {&x}, [x, rstd, d](Node<T>& self) {
    if (!x->requires_grad) return;
    auto& gx = x->grad_buffer();
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const auto dy = self.grad.row(i).array();
      const auto y = self.value.row(i).array();
      const T mean_dy = dy.sum() / static_cast<T>(d);
      const T mean_dyy = (dy * y).sum() / static_cast<T>(d);
      gx.row(i).array() += (*rstd)(i) * (dy - mean_dy - y * mean_dyy);
    }
  });
}

template <typename T>
Var<T> Modulate(Tape<T>& tape, const Var<T>& x, const Var<T>& shift, const Var<T>& scale) {
  if (shift->rows() != 1 || scale->rows() != 1 || shift->cols() != x->cols() ||
      scale->cols() != x->cols()) {
    throw InvalidInput("modulate: expected 1 x d shift and scale");
  }
  const RowVector<T> factor = scale->value.row(0).array() + T(1);
  Matrix<T> out = x->value.array().rowwise() * factor.array();
  out.rowwise() += shift->value.row(0);
  return tape.Emit(std::move(out), {&x, &shift, &scale}, [x, shift, scale, factor](Node<T>& self) {
    if (x->requires_grad) x->grad_buffer().array() += self.grad.array().rowwise() * factor.array();
    if (shift->requires_grad) shift->grad_buffer() += self.grad.colwise().sum();
    if (scale->requires_grad) {
      scale->grad_buffer() += (self.grad.array() * x->value.array()).matrix().colwise().sum();
    }
  });
}

template <typename T>
Var<T> GatedAdd(Tape<T>& tape, const Var<T>& x, const Var<T>& y, const Var<T>& gate) {
  if (gate->rows() != 1 || gate->cols() != x->cols() || x->rows() != y->rows() ||
      x->cols() != y->cols()) {
    throw InvalidInput("gated add: shape mismatch");
  }
  Matrix<T> out = x->value;
  out.array() += y->value.array().rowwise() * gate->value.row(0).array();
  return tape.Emit(std::move(out), {&x, &y, &gate}, [x, y, gate](Node<T>& self) {
    Accumulate(x, self.grad);
    if (y->requires_grad) {
      y->grad_buffer().array() += self.grad.array().rowwise() * gate->value.row(0).array();
    }
    if (gate->requires_grad) {
      gate->grad_buffer() += (self.grad.array() * y->value.array()).matrix().colwise().sum();
    }
  });
}

template <typename T>
Var<T> Silu(Tape<T>& tape, const Var<T>& x) {
  const Matrix<T> sig = (T(1) / (T(1) + (-x->value.array()).exp())).matrix();
  Matrix<T> out = (x->value.array() * sig.array()).matrix();
  return tape.Emit(std::move(out), {&x}, [x, sig](Node<T>& self) {
    if (!x->requires_grad) return;
    x->grad_buffer().array() +=
        self.grad.array() * sig.array() * (T(1) + x->value.array() * (T(1) - sig.array()));
  });
}

template <typename T>
Var<T> Gelu(Tape<T>& tape, const Var<T>& x) {
  const T k = static_cast<T>(std::sqrt(2.0 / M_PI));
  const T c = static_cast<T>(0.044715);
  const auto xa = x->value.array();
  const Matrix<T> th = (k * (xa + c * xa.cube())).tanh().matrix();
  Matrix<T> out = (T(0.5) * xa * (T(1) + th.array())).matrix();
  return tape.Emit(std::move(out), {&x}, [x, th, k, c](Node<T>& self) {
    if (!x->requires_grad) return;
    const auto xa = x->value.array();
    const auto t = th.array();
    const auto d = T(0.5) * (T(1) + t) +
                   T(0.5) * xa * (T(1) - t.square()) * k * (T(1) + T(3) * c * xa.square());
    x->grad_buffer().array() += self.grad.array() * d;
  });
}

template <typename T>
Var<T> SliceCols(Tape<T>& tape, const Var<T>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x->cols()) throw InvalidInput("slice cols: range");
  Matrix<T> out = x->value.middleCols(start, count);
  return tape.Emit(std::move(out), {&x}, [x, start, count](Node<T>& self) {
    if (x->requires_grad) x->grad_buffer().middleCols(start, count) += self.grad;
  });
}

template <typename T>
Var<T> SliceRows(Tape<T>& tape, const Var<T>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x->rows()) throw InvalidInput("slice rows: range");
  Matrix<T> out = x->value.middleRows(start, count);
  return tape.Emit(std::move(out), {&x}, [x, start, count](Node<T>& self) {
    if (x->requires_grad) x->grad_buffer().middleRows(start, count) += self.grad;
  });
}

template <typename T>
Var<T> ConcatRows(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->cols() != b->cols()) throw InvalidInput("concat rows: width mismatch");
  Matrix<T> out(a->rows() + b->rows(), a->cols());
  out.topRows(a->rows()) = a->value;
  out.bottomRows(b->rows()) = b->value;
  return tape.Emit(std::move(out), {&a, &b}, [a, b](Node<T>& self) {
    if (a->requires_grad) a->grad_buffer() += self.grad.topRows(a->rows());
    if (b->requires_grad) b->grad_buffer() += self.grad.bottomRows(b->rows());
  });
}

template <typename T>
Var<T> Rotary(Tape<T>& tape, const Var<T>& x, std::shared_ptr<const std::vector<double>> angles,
              int head_dim) {
  const int heads = static_cast<int>(x->cols() / head_dim);
  if (heads * head_dim != x->cols() ||
      angles->size() != static_cast<std::size_t>(x->rows()) * (head_dim / 2)) {
    throw InvalidInput("rotary: shape mismatch");
  }
  Matrix<T> out = x->value;
  RotateInPlace<T>(std::span<T>(out.data(), static_cast<std::size_t>(out.size())), *angles,
                   head_dim, false, heads);
  return tape.Emit(std::move(out), {&x}, [x, angles, head_dim, heads](Node<T>& self) {
    if (!x->requires_grad) return;
    Matrix<T> g = self.grad;
    RotateInPlace<T>(std::span<T>(g.data(), static_cast<std::size_t>(g.size())), *angles,
                     head_dim, true, heads);
    x->grad_buffer() += g;
  });
}

template <typename T>
Var<T> Attention(Tape<T>& tape, const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads) {
  const Eigen::Index n = q->rows();
  const Eigen::Index m = k->rows();
  const Eigen::Index d = q->cols();
  if (k->cols() != d || v->cols() != d || v->rows() != m || d % heads != 0) {
    throw InvalidInput("attention: shape mismatch");
  }
  const Eigen::Index hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  auto probs = std::make_shared<std::vector<Matrix<T>>>(heads);
  Matrix<T> out(n, d);
  for (int h = 0; h < heads; ++h) {
    Matrix<T>& p = (*probs)[h];
    p.noalias() = q->value.middleCols(h * hd, hd) * k->value.middleCols(h * hd, hd).transpose();
    p *= scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = p.row(i);
      const T mx = row.maxCoeff();
      row = (row.array() - mx).exp().matrix();
      row /= row.sum();
    }
    out.middleCols(h * hd, hd).noalias() = p * v->value.middleCols(h * hd, hd);
  }
  return tape.Emit(std::move(out), {&q, &k, &v}, [q, k, v, probs, heads, hd, scale](Node<T>& self) {
    for (int h = 0; h < heads; ++h) {
      const Matrix<T>& p = (*probs)[h];
      const auto d_out = self.grad.middleCols(h * hd, hd);
      if (v->requires_grad) v->grad_buffer().middleCols(h * hd, hd).noalias() += p.transpose() * d_out;
      if (!q->requires_grad && !k->requires_grad) continue;
      Matrix<T> ds(p.rows(), p.cols());
      ds.noalias() = d_out * v->value.middleCols(h * hd, hd).transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = (ds.array() * p.array()).rowwise().sum();
      ds = (p.array() * (ds.array().colwise() - dot.array())).matrix();
      ds *= scale;
      if (q->requires_grad) {
        q->grad_buffer().middleCols(h * hd, hd).noalias() += ds * k->value.middleCols(h * hd, hd);
      }
      if (k->requires_grad) {
        k->grad_buffer().middleCols(h * hd, hd).noalias() +=
            ds.transpose() * q->value.middleCols(h * hd, hd);
      }
    }
  });
}

template <typename T>
Var<T> RowWeightedAdd(Tape<T>& tape, const Var<T>& x, const Var<T>& y,
                      std::shared_ptr<const std::vector<T>> weights) {
  if (x->rows() != y->rows() || x->cols() != y->cols() ||
      weights->size() != static_cast<std::size_t>(x->rows())) {
    throw InvalidInput("row weighted add: shape mismatch");
  }
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> w(weights->data(), x->rows());
  Matrix<T> out = x->value;
  for (Eigen::Index i = 0; i < x->rows(); ++i) {
    if (w(i) != T(0)) out.row(i) += w(i) * y->value.row(i);
  }
  return tape.Emit(std::move(out), {&x, &y}, [x, y, weights](Node<T>& self) {
    Accumulate(x, self.grad);
    if (!y->requires_grad) return;
    auto& gy = y->grad_buffer();
    for (Eigen::Index i = 0; i < gy.rows(); ++i) {
      const T wi = (*weights)[static_cast<std::size_t>(i)];
      if (wi != T(0)) gy.row(i) += wi * self.grad.row(i);
    }
  });
}

template <typename T>
Var<T> Gather(Tape<T>& tape, const Var<T>& x, std::shared_ptr<const std::vector<std::int64_t>> index,
              Eigen::Index rows, Eigen::Index cols) {
  if (index->size() != static_cast<std::size_t>(rows * cols)) {
    throw InvalidInput("gather: index size mismatch");
  }
  Matrix<T> out(rows, cols);
  const T* src = x->value.data();
  T* dst = out.data();
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::int64_t j = (*index)[i];
    dst[i] = j < 0 ? T(0) : src[j];
  }
  return tape.Emit(std::move(out), {&x}, [x, index](Node<T>& self) {
    if (!x->requires_grad) return;
    T* g = x->grad_buffer().data();
    const T* go = self.grad.data();
    for (std::size_t i = 0; i < index->size(); ++i) {
      const std::int64_t j = (*index)[i];
      if (j >= 0) g[j] += go[i];
    }
  });
}

template <typename T>
Var<T> MeanSquaredError(Tape<T>& tape, const Var<T>& pred, const Matrix<T>& target) {
  if (pred->rows() != target.rows() || pred->cols() != target.cols()) {
    throw InvalidInput("mse: shape mismatch");
  }
  auto diff = std::make_shared<Matrix<T>>(pred->value - target);
  const T count = static_cast<T>(diff->size());
  Matrix<T> out(1, 1);
  out(0, 0) = diff->squaredNorm() / count;
  return tape.Emit(std::move(out), {&pred}, [pred, diff, count](Node<T>& self) {
    if (pred->requires_grad) pred->grad_buffer() += (T(2) * self.grad(0, 0) / count) * *diff;
  });
}

#define GENCOMP_AG_INSTANTIATE(T)                                                             \
  template class Tape<T>;                                                                     \
  template Var<T> MatMul(Tape<T>&, const Var<T>&, const Var<T>&);                             \
  template Var<T> Linear(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);              \
  template Var<T> Add(Tape<T>&, const Var<T>&, const Var<T>&);                                \
  template Var<T> LayerNorm(Tape<T>&, const Var<T>&, T);                                      \
  template Var<T> Modulate(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);            \
  template Var<T> GatedAdd(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);            \
  template Var<T> Silu(Tape<T>&, const Var<T>&);                                              \
  template Var<T> Gelu(Tape<T>&, const Var<T>&);                                              \
  template Var<T> SliceCols(Tape<T>&, const Var<T>&, Eigen::Index, Eigen::Index);             \
  template Var<T> SliceRows(Tape<T>&, const Var<T>&, Eigen::Index, Eigen::Index);             \
  template Var<T> ConcatRows(Tape<T>&, const Var<T>&, const Var<T>&);                         \
  template Var<T> Rotary(Tape<T>&, const Var<T>&, std::shared_ptr<const std::vector<double>>, \
                         int);                                                                \
  template Var<T> Attention(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int);      \
  template Var<T> RowWeightedAdd(Tape<T>&, const Var<T>&, const Var<T>&,                      \
                                 std::shared_ptr<const std::vector<T>>);                      \
  template Var<T> Gather(Tape<T>&, const Var<T>&,                                             \
                         std::shared_ptr<const std::vector<std::int64_t>>, Eigen::Index,      \
                         Eigen::Index);                                                       \
  template Var<T> MeanSquaredError(Tape<T>&, const Var<T>&, const Matrix<T>&);

GENCOMP_AG_INSTANTIATE(float)
GENCOMP_AG_INSTANTIATE(double)

}  // namespace gencomp::ag
