#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fdgan/common.hpp"
#include "fdgan/shape.hpp"

namespace fdgan {

/// Reverse-mode automatic differentiation over flat Eigen arrays.
///
/// A Var is a shared handle to a graph node. Leaves hold parameters or
/// constants; interior nodes capture whatever their backward pass needs in a
/// closure. Gradients accumulate into Node::grad; parameter grads persist
/// across backward calls until zero_grad so one step can combine several
/// losses.
template <typename S>
class Var {
 public:
  struct Node {
    ArrayX<S> value;
    ArrayX<S> grad;  // empty until first needed
    Shape shape;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;  // reads grad, accumulates into parents

    ArrayX<S>& grad_ref() {
      if (grad.size() == 0) grad = ArrayX<S>::Zero(value.size());
      return grad;
    }
  };

  Var() = default;

  static Var leaf(Shape shape, ArrayX<S> value, bool requires_grad = false) {
    require(shape.numel() == value.size(),
            "leaf: shape " + shape.str() + " does not match value size");
    Var v;
    v.n = std::make_shared<Node>();
    v.n->value = std::move(value);
    v.n->shape = shape;
    v.n->requires_grad = requires_grad;
    return v;
  }

  static Var scalar(S x) { return leaf(Shape::vec(1), ArrayX<S>::Constant(1, x)); }

  static Var zeros(Shape shape, bool requires_grad = false) {
    return leaf(shape, ArrayX<S>::Zero(shape.numel()), requires_grad);
  }

  bool valid() const { return static_cast<bool>(n); }
  const Shape& shape() const { return n->shape; }
  const ArrayX<S>& value() const { return n->value; }
  ArrayX<S>& value() { return n->value; }
  const ArrayX<S>& grad() const { return n->grad; }
  ArrayX<S>& grad_ref() { return n->grad_ref(); }
  bool requires_grad() const { return n->requires_grad; }
  void set_requires_grad(bool rg) { n->requires_grad = rg; }
  void zero_grad() { n->grad.resize(0); }

  S item() const {
    require(n->value.size() == 1, "item: tensor is not scalar");
    return n->value[0];
  }

  /// Value copied into a fresh constant leaf; cuts the graph.
  Var detach() const { return leaf(n->shape, n->value, false); }

  std::shared_ptr<Node> n;
};

namespace detail {

template <typename S>
Var<S> make_node(Shape shape, ArrayX<S> value, std::vector<Var<S>> parents,
                 std::function<void(typename Var<S>::Node&)> backprop) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  Var<S> v = Var<S>::leaf(std::move(shape), std::move(value), rg);
  if (rg) {
    v.n->parents = std::move(parents);
    v.n->backprop = std::move(backprop);
  }
  return v;
}

}  // namespace detail

/// Runs reverse-mode accumulation from a scalar root.
template <typename S>
void backward(const Var<S>& root) {
  require(root.value().size() == 1, "backward: root must be scalar");
  using Node = typename Var<S>::Node;
  if (!root.requires_grad()) return;

  // Iterative post-order over the subgraph that requires grad.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{root.n.get(), 0}};
  seen.insert(root.n.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.node->parents.size()) {
      Node* c = f.node->parents[f.next_child++].n.get();
      if (c->requires_grad && !seen.count(c)) {
        seen.insert(c);
        stack.push_back({c, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root.n->grad_ref().setConstant(S(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->grad.size() != 0) node->backprop(*node);
  }
}

// ---------------------------------------------------------------------------
// elementwise ops

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
  return detail::make_node<S>(
      a.shape(), a.value() + b.value(), {a, b},
      [a, b](typename Var<S>::Node& n) mutable {
        if (a.requires_grad()) a.grad_ref() += n.grad;
        if (b.requires_grad()) b.grad_ref() += n.grad;
      });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  return detail::make_node<S>(
      a.shape(), a.value() - b.value(), {a, b},
      [a, b](typename Var<S>::Node& n) mutable {
        if (a.requires_grad()) a.grad_ref() += n.grad;
        if (b.requires_grad()) b.grad_ref() -= n.grad;
      });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  return detail::make_node<S>(
      a.shape(), a.value() * b.value(), {a, b},
      [a, b](typename Var<S>::Node& n) mutable {
        if (a.requires_grad()) a.grad_ref() += n.grad * b.value();
        if (b.requires_grad()) b.grad_ref() += n.grad * a.value();
      });
}

template <typename S>
Var<S> scale(const Var<S>& a, S c) {
  return detail::make_node<S>(a.shape(), a.value() * c, {a},
                              [a, c](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad * c;
                              });
}

template <typename S>
Var<S> square(const Var<S>& a) {
  return detail::make_node<S>(a.shape(), a.value().square(), {a},
                              [a](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += S(2) * n.grad * a.value();
                              });
}

template <typename S>
Var<S> abs_val(const Var<S>& a) {
  return detail::make_node<S>(
      a.shape(), a.value().abs(), {a}, [a](typename Var<S>::Node& n) mutable {
        a.grad_ref() += n.grad * a.value().sign();
      });
}

template <typename S>
Var<S> log_val(const Var<S>& a) {
  return detail::make_node<S>(a.shape(), a.value().log(), {a},
                              [a](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad / a.value();
                              });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return detail::make_node<S>(
      a.shape(), a.value().max(S(0)), {a},
      [a](typename Var<S>::Node& n) mutable {
        a.grad_ref() += n.grad * (a.value() > S(0)).template cast<S>();
      });
}

template <typename S>
Var<S> tanh_val(const Var<S>& a) {
  ArrayX<S> y = a.value().tanh();
  return detail::make_node<S>(a.shape(), y, {a},
                              [a, y](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad * (S(1) - y.square());
                              });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  ArrayX<S> y = (S(1) / (S(1) + (-a.value()).exp()));
  return detail::make_node<S>(a.shape(), y, {a},
                              [a, y](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad * y * (S(1) - y);
                              });
}

/// Clamps to [lo, hi]; gradient passes only through unclamped entries.
/// `saturated` (optional) is incremented by the number of clamped entries.
template <typename S>
Var<S> clamp(const Var<S>& a, S lo, S hi, long* saturated = nullptr) {
  ArrayX<S> y = a.value().max(lo).min(hi);
  if (saturated) *saturated += (a.value() < lo).count() + (a.value() > hi).count();
  return detail::make_node<S>(
      a.shape(), y, {a}, [a, lo, hi](typename Var<S>::Node& n) mutable {
        a.grad_ref() +=
            n.grad *
            ((a.value() >= lo) && (a.value() <= hi)).template cast<S>();
      });
}

// ---------------------------------------------------------------------------
// shape / stacking ops

template <typename S>
Var<S> reshape(const Var<S>& a, Shape shape) {
  require(shape.numel() == a.shape().numel(), "reshape: numel mismatch");
  return detail::make_node<S>(shape, a.value(), {a},
                              [a](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad;
                              });
}

/// Stacks along the leading (batch) axis. Flat layout makes this a copy.
template <typename S>
Var<S> concat_rows(const Var<S>& a, const Var<S>& b) {
  require(a.shape().rank == b.shape().rank, "concat_rows: rank mismatch");
  for (int i = 1; i < a.shape().rank; ++i)
    require(a.shape()[i] == b.shape()[i], "concat_rows: trailing dims differ");
  Shape out = a.shape();
  out.d[0] = a.shape()[0] + b.shape()[0];
  ArrayX<S> v(out.numel());
  v.head(a.value().size()) = a.value();
  v.tail(b.value().size()) = b.value();
  const Index na = a.value().size();
  return detail::make_node<S>(
      out, std::move(v), {a, b}, [a, b, na](typename Var<S>::Node& n) mutable {
        if (a.requires_grad()) a.grad_ref() += n.grad.head(na);
        if (b.requires_grad()) b.grad_ref() += n.grad.tail(n.grad.size() - na);
      });
}

/// rows [start, start+count) along the leading axis.
template <typename S>
Var<S> slice_rows(const Var<S>& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.shape()[0],
          "slice_rows: out of range");
  Shape out = a.shape();
  out.d[0] = count;
  const Index stride = a.shape().numel() / a.shape()[0];
  ArrayX<S> v = a.value().segment(start * stride, count * stride);
  return detail::make_node<S>(
      out, std::move(v), {a},
      [a, start, stride](typename Var<S>::Node& n) mutable {
        a.grad_ref().segment(start * stride, n.grad.size()) += n.grad;
      });
}

/// Concatenates along the feature axis of (N,D) tensors.
template <typename S>
Var<S> concat_features(const Var<S>& a, const Var<S>& b) {
  require(a.shape().rank == 2 && b.shape().rank == 2 &&
              a.shape()[0] == b.shape()[0],
          "concat_features: need (N,Da),(N,Db)");
  const Index n = a.shape()[0], da = a.shape()[1], db = b.shape()[1];
  Shape out = Shape::mat(n, da + db);
  ArrayX<S> v(out.numel());
  for (Index i = 0; i < n; ++i) {
    v.segment(i * (da + db), da) = a.value().segment(i * da, da);
    v.segment(i * (da + db) + da, db) = b.value().segment(i * db, db);
  }
  return detail::make_node<S>(
      out, std::move(v), {a, b},
      [a, b, n, da, db](typename Var<S>::Node& nd) mutable {
        for (Index i = 0; i < n; ++i) {
      if (a.requires_grad())
        a.grad_ref().segment(i * da, da) += nd.grad.segment(i * (da + db), da);
      if (b.requires_grad())
        b.grad_ref().segment(i * db, db) +=
            nd.grad.segment(i * (da + db) + da, db);
        }
      });
}

/// Concatenates along the channel axis of (N,C,H,W) tensors.
template <typename S>
Var<S> concat_channels(const Var<S>& a, const Var<S>& b) {
  require(a.shape().rank == 4 && b.shape().rank == 4, "concat_channels: rank");
  require(a.shape()[0] == b.shape()[0] && a.shape()[2] == b.shape()[2] &&
              a.shape()[3] == b.shape()[3],
          "concat_channels: spatial/batch mismatch");
  const Index n = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  const Index hw = a.shape()[2] * a.shape()[3];
  Shape out = Shape::nchw(n, ca + cb, a.shape()[2], a.shape()[3]);
  ArrayX<S> v(out.numel());
  for (Index i = 0; i < n; ++i) {
    v.segment(i * (ca + cb) * hw, ca * hw) = a.value().segment(i * ca * hw, ca * hw);
    v.segment(i * (ca + cb) * hw + ca * hw, cb * hw) =
        b.value().segment(i * cb * hw, cb * hw);
  }
  return detail::make_node<S>(
      out, std::move(v), {a, b},
      [a, b, n, ca, cb, hw](typename Var<S>::Node& nd) mutable {
        for (Index i = 0; i < n; ++i) {
          if (a.requires_grad())
            a.grad_ref().segment(i * ca * hw, ca * hw) +=
                nd.grad.segment(i * (ca + cb) * hw, ca * hw);
          if (b.requires_grad())
            b.grad_ref().segment(i * cb * hw, cb * hw) +=
                nd.grad.segment(i * (ca + cb) * hw + ca * hw, cb * hw);
        }
      });
}

// ---------------------------------------------------------------------------
// reductions

template <typename S>
Var<S> sum_all(const Var<S>& a) {
  ArrayX<S> v(1);
  v[0] = a.value().sum();
  return detail::make_node<S>(Shape::vec(1), std::move(v), {a},
                              [a](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad[0];
                              });
}

template <typename S>
Var<S> mean_all(const Var<S>& a) {
  const S inv = S(1) / static_cast<S>(a.value().size());
  ArrayX<S> v(1);
  v[0] = a.value().sum() * inv;
  return detail::make_node<S>(Shape::vec(1), std::move(v), {a},
                              [a, inv](typename Var<S>::Node& n) mutable {
                                a.grad_ref() += n.grad[0] * inv;
                              });
}

/// (N,C,H,W) -> (N,C) spatial mean.
template <typename S>
Var<S> global_avg_pool(const Var<S>& a) {
  require(a.shape().rank == 4, "global_avg_pool: need NCHW");
  const Index n = a.shape()[0], c = a.shape()[1];
  const Index hw = a.shape()[2] * a.shape()[3];
  const S inv = S(1) / static_cast<S>(hw);
  ArrayX<S> v(n * c);
  for (Index i = 0; i < n * c; ++i) v[i] = a.value().segment(i * hw, hw).sum() * inv;
  return detail::make_node<S>(
      Shape::mat(n, c), std::move(v), {a},
      [a, hw, inv](typename Var<S>::Node& nd) mutable {
        auto& g = a.grad_ref();
        for (Index i = 0; i < nd.grad.size(); ++i)
          g.segment(i * hw, hw) += nd.grad[i] * inv;
      });
}

/// (N,1,h,w) or (N,C,h,w) -> (N): mean over everything but the batch axis.
template <typename S>
Var<S> mean_per_sample(const Var<S>& a) {
  require(a.shape().rank >= 2, "mean_per_sample: rank");
  const Index n = a.shape()[0];
  const Index stride = a.shape().numel() / n;
  const S inv = S(1) / static_cast<S>(stride);
  ArrayX<S> v(n);
  for (Index i = 0; i < n; ++i) v[i] = a.value().segment(i * stride, stride).sum() * inv;
  return detail::make_node<S>(
      Shape::vec(n), std::move(v), {a},
      [a, stride, inv](typename Var<S>::Node& nd) mutable {
        auto& g = a.grad_ref();
        for (Index i = 0; i < nd.grad.size(); ++i)
          g.segment(i * stride, stride) += nd.grad[i] * inv;
      });
}

// ---------------------------------------------------------------------------
// dense / convolutional ops

/// x:(N,D) W:(M,D) b:(M) -> (N,M)
template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  require(x.shape().rank == 2, "linear: input must be (N,D)");
  const Index n = x.shape()[0], d = x.shape()[1];
  require(w.shape().rank == 2 && w.shape()[1] == d,
          "linear: weight must be (M,D) with D=" + std::to_string(d));
  const Index m = w.shape()[0];
  require(b.shape().numel() == m, "linear: bias size mismatch");

  using RM = RowMajorMatrixX<S>;
  Eigen::Map<const RM> X(x.value().data(), n, d);
  Eigen::Map<const RM> W(w.value().data(), m, d);
  ArrayX<S> out(n * m);
  Eigen::Map<RM> Y(out.data(), n, m);
  Y.noalias() = X * W.transpose();
  Y.array().rowwise() +=
      Eigen::Map<const Eigen::Array<S, 1, Eigen::Dynamic>>(b.value().data(), m);

  return detail::make_node<S>(
      Shape::mat(n, m), std::move(out), {x, w, b},
      [x, w, b, n, d, m](typename Var<S>::Node& nd) mutable {
        Eigen::Map<const RM> dY(nd.grad.data(), n, m);
        Eigen::Map<const RM> X2(x.value().data(), n, d);
        Eigen::Map<const RM> W2(w.value().data(), m, d);
        if (x.requires_grad()) {
          Eigen::Map<RM> dX(x.grad_ref().data(), n, d);
          dX.noalias() += dY * W2;
        }
        if (w.requires_grad()) {
          Eigen::Map<RM> dW(w.grad_ref().data(), m, d);
          dW.noalias() += dY.transpose() * X2;
        }
        if (b.requires_grad()) {
          Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(b.grad_ref().data(), m);
          db.noalias() += dY.colwise().sum().transpose();
        }
      });
}

namespace detail {

template <typename S>
void im2col(const ArrayX<S>& x, Index n, Index c, Index h, Index w, Index kh,
            Index kw, Index stride, Index pad, Index oh, Index ow,
            MatrixX<S>& col) {
  // col: (c*kh*kw) x (n*oh*ow), column = one output position of one sample.
  col.setZero(c * kh * kw, n * oh * ow);
  for (Index in = 0; in < n; ++in) {
    for (Index p = 0; p < oh; ++p) {
      for (Index q = 0; q < ow; ++q) {
        const Index colidx = (in * oh + p) * ow + q;
        S* dst = col.data() + colidx * col.rows();
        for (Index ic = 0; ic < c; ++ic) {
          for (Index i = 0; i < kh; ++i) {
            const Index hy = p * stride - pad + i;
            if (hy < 0 || hy >= h) continue;
            const Index base = ((in * c + ic) * h + hy) * w;
            const Index wx0 = q * stride - pad;
            for (Index j = 0; j < kw; ++j) {
              const Index wx = wx0 + j;
              if (wx < 0 || wx >= w) continue;
              dst[(ic * kh + i) * kw + j] = x[base + wx];
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const MatrixX<S>& col, Index n, Index c, Index h, Index w,
                Index kh, Index kw, Index stride, Index pad, Index oh,
                Index ow, ArrayX<S>& dx) {
  for (Index in = 0; in < n; ++in) {
    for (Index p = 0; p < oh; ++p) {
      for (Index q = 0; q < ow; ++q) {
        const Index colidx = (in * oh + p) * ow + q;
        const S* src = col.data() + colidx * col.rows();
        for (Index ic = 0; ic < c; ++ic) {
          for (Index i = 0; i < kh; ++i) {
            const Index hy = p * stride - pad + i;
            if (hy < 0 || hy >= h) continue;
            const Index base = ((in * c + ic) * h + hy) * w;
            const Index wx0 = q * stride - pad;
            for (Index j = 0; j < kw; ++j) {
              const Index wx = wx0 + j;
              if (wx < 0 || wx >= w) continue;
              dx[base + wx] += src[(ic * kh + i) * kw + j];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// x:(N,C,H,W) w:(K,C,kh,kw) b:(K); zero padding, square stride.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, Index stride,
              Index pad) {
  require(x.shape().rank == 4, "conv2d: input must be NCHW");
  require(w.shape().rank == 4, "conv2d: weight must be (K,C,kh,kw)");
  const Index n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              wd = x.shape()[3];
  const Index k = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  require(w.shape()[1] == c, "conv2d: channel mismatch");
  require(b.shape().numel() == k, "conv2d: bias size mismatch");
  const Index oh = (h + 2 * pad - kh) / stride + 1;
  const Index ow = (wd + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");

  auto col = std::make_shared<MatrixX<S>>();
  detail::im2col(x.value(), n, c, h, wd, kh, kw, stride, pad, oh, ow, *col);

  using RM = RowMajorMatrixX<S>;
  Eigen::Map<const RM> W(w.value().data(), k, c * kh * kw);
  ArrayX<S> out(n * k * oh * ow);
  for (Index in = 0; in < n; ++in) {
    Eigen::Map<RM> Y(out.data() + in * k * oh * ow, k, oh * ow);
    Y.noalias() = W * col->middleCols(in * oh * ow, oh * ow);
    Y.array().colwise() +=
        Eigen::Map<const ArrayX<S>>(b.value().data(), k);
  }

  const bool need_grad = x.requires_grad() || w.requires_grad() || b.requires_grad();
  if (!need_grad) col.reset();  // drop the cache when nothing propagates

  return detail::make_node<S>(
      Shape::nchw(n, k, oh, ow), std::move(out), {x, w, b},
      [x, w, b, col, n, c, h, wd, k, kh, kw, stride, pad, oh,
       ow](typename Var<S>::Node& nd) mutable {
        Eigen::Map<const RM> W2(w.value().data(), k, c * kh * kw);
        MatrixX<S> dcol;
        if (x.requires_grad()) dcol.setZero(c * kh * kw, n * oh * ow);
        for (Index in = 0; in < n; ++in) {
          Eigen::Map<const RM> dY(nd.grad.data() + in * k * oh * ow, k, oh * ow);
          if (w.requires_grad()) {
            Eigen::Map<RM> dW(w.grad_ref().data(), k, c * kh * kw);
            dW.noalias() += dY * col->middleCols(in * oh * ow, oh * ow).transpose();
          }
          if (b.requires_grad()) {
            Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(
                b.grad_ref().data(), k);
            db.noalias() += dY.rowwise().sum();
          }
          if (x.requires_grad())
            dcol.middleCols(in * oh * ow, oh * ow).noalias() =
                W2.transpose() * dY;
        }
        if (x.requires_grad())
          detail::col2im_add(dcol, n, c, h, wd, kh, kw, stride, pad, oh, ow,
                             x.grad_ref());
      });
}

template <typename S>
Var<S> maxpool2d(const Var<S>& x, Index ksize, Index stride, Index pad) {
  require(x.shape().rank == 4, "maxpool2d: input must be NCHW");
  const Index n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
  const Index oh = (h + 2 * pad - ksize) / stride + 1;
  const Index ow = (w + 2 * pad - ksize) / stride + 1;
  require(oh > 0 && ow > 0, "maxpool2d: empty output");
  ArrayX<S> out(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<Index>>(
      static_cast<std::size_t>(n * c * oh * ow));
  Index oidx = 0;
  for (Index in = 0; in < n; ++in)
    for (Index ic = 0; ic < c; ++ic)
      for (Index p = 0; p < oh; ++p)
        for (Index q = 0; q < ow; ++q, ++oidx) {
          S best = -std::numeric_limits<S>::infinity();
          Index besti = -1;
          for (Index i = 0; i < ksize; ++i) {
            const Index hy = p * stride - pad + i;
            if (hy < 0 || hy >= h) continue;
            for (Index j = 0; j < ksize; ++j) {
              const Index wx = q * stride - pad + j;
              if (wx < 0 || wx >= w) continue;
              const Index src = ((in * c + ic) * h + hy) * w + wx;
              if (x.value()[src] > best) {
                best = x.value()[src];
                besti = src;
              }
            }
          }
          out[oidx] = best;
          (*argmax)[static_cast<std::size_t>(oidx)] = besti;
        }
  return detail::make_node<S>(
      Shape::nchw(n, c, oh, ow), std::move(out), {x},
      [x, argmax](typename Var<S>::Node& nd) mutable {
        auto& g = x.grad_ref();
        for (Index i = 0; i < nd.grad.size(); ++i)
          g[(*argmax)[static_cast<std::size_t>(i)]] += nd.grad[i];
      });
}

/// Nearest-neighbour 2x upsampling.
template <typename S>
Var<S> upsample_nearest2(const Var<S>& x) {
  require(x.shape().rank == 4, "upsample_nearest2: input must be NCHW");
  const Index n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
  ArrayX<S> out(n * c * 4 * h * w);
  for (Index nc = 0; nc < n * c; ++nc)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const S v = x.value()[(nc * h + i) * w + j];
        const Index base = (nc * 2 * h + 2 * i) * 2 * w + 2 * j;
        out[base] = v;
        out[base + 1] = v;
        out[base + 2 * w] = v;
        out[base + 2 * w + 1] = v;
      }
  return detail::make_node<S>(
      Shape::nchw(n, c, 2 * h, 2 * w), std::move(out), {x},
      [x, n, c, h, w](typename Var<S>::Node& nd) mutable {
        auto& g = x.grad_ref();
        for (Index nc = 0; nc < n * c; ++nc)
          for (Index i = 0; i < h; ++i)
            for (Index j = 0; j < w; ++j) {
              const Index base = (nc * 2 * h + 2 * i) * 2 * w + 2 * j;
              g[(nc * h + i) * w + j] += nd.grad[base] + nd.grad[base + 1] +
                                         nd.grad[base + 2 * w] +
                                         nd.grad[base + 2 * w + 1];
            }
      });
}

// ---------------------------------------------------------------------------
// batch normalization

namespace detail {

template <typename S>
void bn_dims(const Shape& s, Index& n, Index& c, Index& hw) {
  if (s.rank == 4) {
    n = s[0];
    c = s[1];
    hw = s[2] * s[3];
  } else if (s.rank == 2) {
    n = s[0];
    c = s[1];
    hw = 1;
  } else {
    throw std::invalid_argument("batchnorm: rank must be 2 or 4");
  }
}

}  // namespace detail

/// Train-mode batch normalization; writes batch statistics (biased variance)
/// into `batch_mean`/`batch_var` so the caller can maintain running averages.
template <typename S>
Var<S> batchnorm_train(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                       ArrayX<S>& batch_mean, ArrayX<S>& batch_var, S eps) {
  Index n, c, hw;
  detail::bn_dims<S>(x.shape(), n, c, hw);
  require(gamma.value().size() == c && beta.value().size() == c,
          "batchnorm: affine size mismatch");
  const Index m = n * hw;
  batch_mean.setZero(c);
  batch_var.setZero(c);
  const auto& xv = x.value();
  for (Index in = 0; in < n; ++in)
    for (Index ic = 0; ic < c; ++ic)
      batch_mean[ic] += xv.segment((in * c + ic) * hw, hw).sum();
  batch_mean /= static_cast<S>(m);
  for (Index in = 0; in < n; ++in)
    for (Index ic = 0; ic < c; ++ic)
      batch_var[ic] +=
          (xv.segment((in * c + ic) * hw, hw) - batch_mean[ic]).square().sum();
  batch_var /= static_cast<S>(m);

  ArrayX<S> inv_std = (batch_var + eps).sqrt().inverse();
  auto xhat = std::make_shared<ArrayX<S>>(xv.size());
  ArrayX<S> out(xv.size());
  for (Index in = 0; in < n; ++in)
    for (Index ic = 0; ic < c; ++ic) {
      auto seg = xv.segment((in * c + ic) * hw, hw);
      xhat->segment((in * c + ic) * hw, hw) = (seg - batch_mean[ic]) * inv_std[ic];
      out.segment((in * c + ic) * hw, hw) =
          xhat->segment((in * c + ic) * hw, hw) * gamma.value()[ic] +
          beta.value()[ic];
    }

  ArrayX<S> inv_std_copy = inv_std;
  return detail::make_node<S>(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std_copy, n, c,
       hw](typename Var<S>::Node& nd) mutable {
        const Index m = n * hw;
        // per-channel sums of dy and dy*xhat
        ArrayX<S> sum_dy = ArrayX<S>::Zero(c);
        ArrayX<S> sum_dy_xhat = ArrayX<S>::Zero(c);
        for (Index in = 0; in < n; ++in)
          for (Index ic = 0; ic < c; ++ic) {
            auto dyseg = nd.grad.segment((in * c + ic) * hw, hw);
            sum_dy[ic] += dyseg.sum();
            sum_dy_xhat[ic] +=
                (dyseg * xhat->segment((in * c + ic) * hw, hw)).sum();
          }
        if (gamma.requires_grad()) gamma.grad_ref() += sum_dy_xhat;
        if (beta.requires_grad()) beta.grad_ref() += sum_dy;
        if (x.requires_grad()) {
          auto& gx = x.grad_ref();
          const S invm = S(1) / static_cast<S>(m);
          for (Index in = 0; in < n; ++in)
            for (Index ic = 0; ic < c; ++ic) {
              auto dyseg = nd.grad.segment((in * c + ic) * hw, hw);
              auto xh = xhat->segment((in * c + ic) * hw, hw);
              gx.segment((in * c + ic) * hw, hw) +=
                  gamma.value()[ic] * inv_std_copy[ic] *
                  (dyseg - sum_dy[ic] * invm - xh * (sum_dy_xhat[ic] * invm));
            }
        }
      });
}

/// Eval-mode batch normalization against fixed statistics.
template <typename S>
Var<S> batchnorm_eval(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                      const ArrayX<S>& mean, const ArrayX<S>& var, S eps) {
  Index n, c, hw;
  detail::bn_dims<S>(x.shape(), n, c, hw);
  require(gamma.value().size() == c && mean.size() == c && var.size() == c,
          "batchnorm_eval: size mismatch");
  ArrayX<S> inv_std = (var + eps).sqrt().inverse();
  ArrayX<S> out(x.value().size());
  for (Index in = 0; in < n; ++in)
    for (Index ic = 0; ic < c; ++ic)
      out.segment((in * c + ic) * hw, hw) =
          (x.value().segment((in * c + ic) * hw, hw) - mean[ic]) * inv_std[ic] *
              gamma.value()[ic] +
          beta.value()[ic];
  ArrayX<S> mean_c = mean, inv_std_c = inv_std;
  return detail::make_node<S>(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean_c, inv_std_c, n, c,
       hw](typename Var<S>::Node& nd) mutable {
        for (Index in = 0; in < n; ++in)
          for (Index ic = 0; ic < c; ++ic) {
            auto dyseg = nd.grad.segment((in * c + ic) * hw, hw);
            if (x.requires_grad())
              x.grad_ref().segment((in * c + ic) * hw, hw) +=
                  dyseg * gamma.value()[ic] * inv_std_c[ic];
            if (gamma.requires_grad())
              gamma.grad_ref()[ic] +=
                  (dyseg * (x.value().segment((in * c + ic) * hw, hw) -
                            mean_c[ic]) *
                   inv_std_c[ic])
                      .sum();
            if (beta.requires_grad()) beta.grad_ref()[ic] += dyseg.sum();
          }
      });
}

/// Multiply by a constant mask (inverted-dropout style masks included).
template <typename S>
Var<S> mask_mul(const Var<S>& x, ArrayX<S> mask) {
  require(mask.size() == x.value().size(), "mask_mul: size mismatch");
  auto m = std::make_shared<ArrayX<S>>(std::move(mask));
  return detail::make_node<S>(x.shape(), x.value() * (*m), {x},
                              [x, m](typename Var<S>::Node& nd) mutable {
                                x.grad_ref() += nd.grad * (*m);
                              });
}

/// Softmax cross-entropy over rows of (N,K) logits; mean over the batch.
template <typename S>
Var<S> softmax_cross_entropy(const Var<S>& logits, const std::vector<int>& labels) {
  require(logits.shape().rank == 2, "softmax_cross_entropy: logits (N,K)");
  const Index n = logits.shape()[0], k = logits.shape()[1];
  require(static_cast<Index>(labels.size()) == n, "softmax_cross_entropy: labels");
  ArrayX<S> loss(1);
  auto probs = std::make_shared<ArrayX<S>>(n * k);
  S total = 0;
  for (Index i = 0; i < n; ++i) {
    auto row = logits.value().segment(i * k, k);
    const S mx = row.maxCoeff();
    ArrayX<S> e = (row - mx).exp();
    const S z = e.sum();
    probs->segment(i * k, k) = e / z;
    total += std::log(z) + mx - row[labels[static_cast<std::size_t>(i)]];
  }
  loss[0] = total / static_cast<S>(n);
  std::vector<int> lab = labels;
  return detail::make_node<S>(
      Shape::vec(1), std::move(loss), {logits},
      [logits, probs, lab, n, k](typename Var<S>::Node& nd) mutable {
        auto& g = logits.grad_ref();
        const S w = nd.grad[0] / static_cast<S>(n);
        for (Index i = 0; i < n; ++i) {
          g.segment(i * k, k) += w * probs->segment(i * k, k);
          g[i * k + lab[static_cast<std::size_t>(i)]] -= w;
        }
      });
}

}  // namespace fdgan
