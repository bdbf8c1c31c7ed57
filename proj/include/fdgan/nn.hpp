#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fdgan/autograd.hpp"

namespace fdgan::nn {

template <typename S>
struct ParamRef {
  std::string name;
  Var<S> var;
};

template <typename S>
struct BufferRef {
  std::string name;
  ArrayX<S>* data;
};

/// How batch normalization layers behave during a forward pass.
///   train            batch statistics, running averages updated
///   batch_no_update  batch statistics, running averages untouched
///   eval             running statistics, nothing updated
enum class BnMode { train, batch_no_update, eval };

template <typename S>
struct ForwardCtx {
  bool train = false;
  BnMode bn = BnMode::eval;
  Rng* rng = nullptr;  // required for dropout in train mode

  static ForwardCtx eval_ctx() { return {false, BnMode::eval, nullptr}; }
  static ForwardCtx train_ctx(Rng& rng) { return {true, BnMode::train, &rng}; }
};

template <typename S>
ForwardCtx<S> eval_ctx() {
  return ForwardCtx<S>::eval_ctx();
}
template <typename S>
ForwardCtx<S> train_ctx(Rng& rng) {
  return ForwardCtx<S>::train_ctx(rng);
}

template <typename S>
Var<S> kaiming_conv_weight(Rng& rng, Index out_c, Index in_c, Index k) {
  const S std = static_cast<S>(std::sqrt(2.0 / static_cast<double>(in_c * k * k)));
  ArrayX<S> w(out_c * in_c * k * k);
  for (Index i = 0; i < w.size(); ++i) w[i] = draw_normal<S>(rng, S(0), std);
  return Var<S>::leaf(Shape::nchw(out_c, in_c, k, k), std::move(w), true);
}

template <typename S>
Var<S> kaiming_linear_weight(Rng& rng, Index out_d, Index in_d) {
  const S std = static_cast<S>(std::sqrt(2.0 / static_cast<double>(in_d)));
  ArrayX<S> w(out_d * in_d);
  for (Index i = 0; i < w.size(); ++i) w[i] = draw_normal<S>(rng, S(0), std);
  return Var<S>::leaf(Shape::mat(out_d, in_d), std::move(w), true);
}

template <typename S>
struct Conv2d {
  Var<S> w, b;
  Index stride = 1, pad = 1;

  Conv2d() = default;
  Conv2d(Rng& rng, Index in_c, Index out_c, Index k, Index stride_, Index pad_)
      : w(kaiming_conv_weight<S>(rng, out_c, in_c, k)),
        b(Var<S>::zeros(Shape::vec(out_c), true)),
        stride(stride_),
        pad(pad_) {}

  Var<S> forward(const Var<S>& x) const { return conv2d(x, w, b, stride, pad); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

template <typename S>
struct Linear {
  Var<S> w, b;

  Linear() = default;
  Linear(Rng& rng, Index in_d, Index out_d)
      : w(kaiming_linear_weight<S>(rng, out_d, in_d)),
        b(Var<S>::zeros(Shape::vec(out_d), true)) {}

  Var<S> forward(const Var<S>& x) const { return linear(x, w, b); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

/// Works on (N,C,H,W) per channel or (N,D) per feature.
template <typename S>
struct BatchNorm {
  Var<S> gamma, beta;
  ArrayX<S> running_mean, running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);

  BatchNorm() = default;
  explicit BatchNorm(Index channels)
      : gamma(Var<S>::leaf(Shape::vec(channels),
                           ArrayX<S>::Constant(channels, S(1)), true)),
        beta(Var<S>::zeros(Shape::vec(channels), true)),
        running_mean(ArrayX<S>::Zero(channels)),
        running_var(ArrayX<S>::Constant(channels, S(1))) {}

  Var<S> forward(const Var<S>& x, BnMode mode) {
    if (mode == BnMode::eval)
      return batchnorm_eval(x, gamma, beta, running_mean, running_var, eps);
    ArrayX<S> mean, var;
    Var<S> y = batchnorm_train(x, gamma, beta, mean, var, eps);
    if (mode == BnMode::train) {
      running_mean = (S(1) - momentum) * running_mean + momentum * mean;
      running_var = (S(1) - momentum) * running_var + momentum * var;
    }
    return y;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<S>>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
  }
};

/// Inverted dropout; identity outside train mode.
template <typename S>
struct Dropout {
  S rate = S(0.5);

  Var<S> forward(const Var<S>& x, const ForwardCtx<S>& ctx) const {
    if (!ctx.train || rate <= S(0)) return x;
    require(ctx.rng != nullptr, "dropout: train mode needs an rng");
    const S keep = S(1) - rate;
    ArrayX<S> mask(x.value().size());
    for (Index i = 0; i < mask.size(); ++i)
      mask[i] = draw_uniform<S>(*ctx.rng, S(0), S(1)) < keep ? S(1) / keep : S(0);
    return mask_mul(x, std::move(mask));
  }
};

// ---------------------------------------------------------------------------
// optimizers

template <typename S>
void zero_grad(std::vector<ParamRef<S>>& params) {
  for (auto& p : params) p.var.zero_grad();
}

template <typename S>
struct SgdMomentum {
  S lr = S(0.01);
  S momentum = S(0.9);
  std::vector<ArrayX<S>> velocity;  // aligned with the param vector

  void step(std::vector<ParamRef<S>>& params) {
    if (velocity.empty()) velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].var;
      if (p.grad().size() == 0) continue;
      auto& v = velocity[i];
      if (v.size() == 0) v = ArrayX<S>::Zero(p.value().size());
      v = momentum * v + p.grad();
      p.value() -= lr * v;
    }
  }
};

template <typename S>
struct Adam {
  S lr = S(1e-3);
  S beta1 = S(0.5);  // adversarial-training convention
  S beta2 = S(0.999);
  S eps = S(1e-8);
  long t = 0;
  std::vector<ArrayX<S>> m, v;

  void step(std::vector<ParamRef<S>>& params) {
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
    }
    ++t;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), t));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].var;
      if (p.grad().size() == 0) continue;
      if (m[i].size() == 0) {
        m[i] = ArrayX<S>::Zero(p.value().size());
        v[i] = ArrayX<S>::Zero(p.value().size());
      }
      m[i] = beta1 * m[i] + (S(1) - beta1) * p.grad();
      v[i] = beta2 * v[i] + (S(1) - beta2) * p.grad().square();
      p.value() -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
    }
  }
};

}  // namespace fdgan::nn
