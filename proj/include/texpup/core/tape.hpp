#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "texpup/core/params.hpp"
#include "texpup/core/tensor.hpp"

namespace texpup {

struct Var {
  int id = -1;
};

/// Reverse-mode autodiff over Tensor-valued nodes. One tape per forward
/// evaluation; backward() accumulates gradients for every node, and
/// add_param_grads() folds the gradients of named parameters into a ParamSet.
///
/// All ops are batched (matrices), so a training step records a few dozen
/// nodes rather than one per pixel.
class Tape {
 public:
  explicit Tape(const ParamSet* params = nullptr) : params_(params) {}

  Var constant(Tensor v) { return push(std::move(v), {}, ""); }

  Var param(const std::string& name) {
    if (!params_) throw std::logic_error("tape: no ParamSet bound");
    return push(params_->at(name), {}, name);
  }

  /// Differentiable leaf that is not a named parameter.
  Var leaf(Tensor v) { return push(std::move(v), {}, "", true); }

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    require_same(a, b, "add");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      axpy(a, g, 1.0);
      axpy(b, g, 1.0);
    });
  }

  Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      axpy(a, g, 1.0);
      axpy(b, g, -1.0);
    });
  }

  Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      const Tensor& va = val(a);
      const Tensor& vb2 = val(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * vb2[i];
        gb[i] += g[i] * va[i];
      }
    });
  }

  Var scale(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    return push(std::move(out), [this, a, c](const Tensor& g, int) {
      axpy(a, g, c);
    });
  }

  Var relu(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), [this, a](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      const Tensor& va = val(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (va[i] > 0.0) ga[i] += g[i];
    });
  }

  Var sigmoid(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      Tensor& ga = grad_ref(a);
      const Tensor& y = nodes_[self].value;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  }

  Var exp_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      Tensor& ga = grad_ref(a);
      const Tensor& y = nodes_[self].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
  }

  Var sqrt_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::sqrt(std::max(v, 0.0));
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      Tensor& ga = grad_ref(a);
      const Tensor& y = nodes_[self].value;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * 0.5 / std::max(y[i], 1e-30);
    });
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.cols() != vb.rows())
      throw std::invalid_argument("matmul: inner dims " + shape_str(va) + " x " +
                                  shape_str(vb));
    Tensor out({va.rows(), vb.cols()});
    out.mat().noalias() = va.mat() * vb.mat();
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      const Tensor& va2 = val(a);
      const Tensor& vb2 = val(b);
      grad_ref(a).mat().noalias() += g.mat() * vb2.mat().transpose();
      grad_ref(b).mat().noalias() += va2.mat().transpose() * g.mat();
    });
  }

  Var transpose(Var a) {
    const Tensor& va = val(a);
    Tensor out({va.cols(), va.rows()});
    out.mat().noalias() = va.mat().transpose();
    return push(std::move(out), [this, a](const Tensor& g, int) {
      grad_ref(a).mat().noalias() += g.mat().transpose();
    });
  }

  /// a: [R x C], bias: [1 x C] (or length-C) broadcast over rows.
  Var add_bias(Var a, Var bias) {
    const Tensor& va = val(a);
    const Tensor& vb = val(bias);
    if (vb.size() != va.cols())
      throw std::invalid_argument("add_bias: width mismatch");
    Tensor out = va;
    std::size_t r = va.rows(), c = va.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += vb[j];
    return push(std::move(out), [this, a, bias](const Tensor& g, int) {
      axpy(a, g, 1.0);
      Tensor& gb = grad_ref(bias);
      std::size_t r = g.rows(), c = g.cols();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g.data[i * c + j];
    });
  }

  /// Repeat a [1 x C] row R times.
  Var broadcast_row(Var a, std::size_t r) {
    const Tensor& va = val(a);
    std::size_t c = va.size();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i)
      std::copy(va.data.begin(), va.data.end(), out.data.begin() + i * c);
    return push(std::move(out), [this, a](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      std::size_t r2 = g.rows(), c2 = g.cols();
      for (std::size_t i = 0; i < r2; ++i)
        for (std::size_t j = 0; j < c2; ++j) ga[j] += g.data[i * c2 + j];
    });
  }

  Var reshape(Var a, std::vector<std::size_t> shape) {
    Tensor out = val(a).reshaped(std::move(shape));
    return push(std::move(out), [this, a](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  Var concat_cols(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rows() != vb.rows())
      throw std::invalid_argument("concat_cols: row mismatch");
    std::size_t r = va.rows(), ca = va.cols(), cb = vb.cols();
    Tensor out({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(va.data.begin() + i * ca, ca, out.data.begin() + i * (ca + cb));
      std::copy_n(vb.data.begin() + i * cb, cb,
                  out.data.begin() + i * (ca + cb) + ca);
    }
    return push(std::move(out), [this, a, b, ca, cb](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      std::size_t r2 = g.rows();
      for (std::size_t i = 0; i < r2; ++i) {
        for (std::size_t j = 0; j < ca; ++j)
          ga.data[i * ca + j] += g.data[i * (ca + cb) + j];
        for (std::size_t j = 0; j < cb; ++j)
          gb.data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
      }
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& va = val(a);
    std::size_t r = va.rows(), c = va.cols(), w = c1 - c0;
    if (c1 > c || c0 >= c1) throw std::invalid_argument("slice_cols: range");
    Tensor out({r, w});
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(va.data.begin() + i * c + c0, w, out.data.begin() + i * w);
    return push(std::move(out), [this, a, c0, c](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      std::size_t r2 = g.rows(), w2 = g.cols();
      for (std::size_t i = 0; i < r2; ++i)
        for (std::size_t j = 0; j < w2; ++j)
          ga.data[i * c + c0 + j] += g.data[i * w2 + j];
    });
  }

  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& va = val(a);
    std::size_t c = va.cols();
    Tensor out({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= va.rows()) throw std::out_of_range("gather_rows: index");
      std::copy_n(va.data.begin() + idx[i] * c, c, out.data.begin() + i * c);
    }
    return push(std::move(out),
                [this, a, idx = std::move(idx)](const Tensor& g, int) {
                  Tensor& ga = grad_ref(a);
                  std::size_t c2 = g.cols();
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < c2; ++j)
                      ga.data[idx[i] * c2 + j] += g.data[i * c2 + j];
                });
  }

  /// Sum consecutive groups of `k` rows: [G*k x C] -> [G x C].
  Var group_sum(Var a, std::size_t k) {
    const Tensor& va = val(a);
    if (va.rows() % k != 0) throw std::invalid_argument("group_sum: rows % k");
    std::size_t g_n = va.rows() / k, c = va.cols();
    Tensor out({g_n, c});
    for (std::size_t i = 0; i < va.rows(); ++i)
      for (std::size_t j = 0; j < c; ++j)
        out.data[(i / k) * c + j] += va.data[i * c + j];
    return push(std::move(out), [this, a, k](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      std::size_t c2 = g.cols();
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < c2; ++j)
          ga.data[i * c2 + j] += g.data[(i / k) * c2 + j];
    });
  }

  /// Row sums: [R x C] -> [R x 1].
  Var row_sum(Var a) {
    const Tensor& va = val(a);
    std::size_t r = va.rows(), c = va.cols();
    Tensor out({r, 1});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i] += va.data[i * c + j];
    return push(std::move(out), [this, a](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      std::size_t c2 = ga.cols();
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < c2; ++j) ga.data[i * c2 + j] += g[i];
    });
  }

  /// Mean over rows: [R x C] -> [1 x C].
  Var mean_rows(Var a) {
    const Tensor& va = val(a);
    std::size_t r = va.rows(), c = va.cols();
    Tensor out({1, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += va.data[i * c + j];
    for (double& v : out.data) v /= static_cast<double>(r);
    return push(std::move(out), [this, a, r](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      std::size_t c2 = g.size();
      double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c2; ++j) ga.data[i * c2 + j] += g[j] * inv;
    });
  }

  /// Scale each row i of a [R x C] by w[i] ([R x 1]).
  Var scale_rows(Var a, Var w) {
    const Tensor& va = val(a);
    const Tensor& vw = val(w);
    if (vw.size() != va.rows()) throw std::invalid_argument("scale_rows");
    Tensor out = va;
    std::size_t r = va.rows(), c = va.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= vw[i];
    return push(std::move(out), [this, a, w](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      Tensor& gw = grad_ref(w);
      const Tensor& va2 = val(a);
      const Tensor& vw2 = val(w);
      std::size_t r2 = g.rows(), c2 = g.cols();
      for (std::size_t i = 0; i < r2; ++i)
        for (std::size_t j = 0; j < c2; ++j) {
          ga.data[i * c2 + j] += g.data[i * c2 + j] * vw2[i];
          gw[i] += g.data[i * c2 + j] * va2.data[i * c2 + j];
        }
    });
  }

  Var softmax_rows(Var a) {
    Tensor out = val(a);
    std::size_t r = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double m = out.data[i * c];
      for (std::size_t j = 1; j < c; ++j) m = std::max(m, out.data[i * c + j]);
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        out.data[i * c + j] = std::exp(out.data[i * c + j] - m);
        s += out.data[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] /= s;
    }
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      Tensor& ga = grad_ref(a);
      const Tensor& y = nodes_[self].value;
      std::size_t r2 = g.rows(), c2 = g.cols();
      for (std::size_t i = 0; i < r2; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c2; ++j)
          dot += g.data[i * c2 + j] * y.data[i * c2 + j];
        for (std::size_t j = 0; j < c2; ++j)
          ga.data[i * c2 + j] +=
              y.data[i * c2 + j] * (g.data[i * c2 + j] - dot);
      }
    });
  }

  // ---- reductions ----

  Var sum(Var a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s), [this, a](const Tensor& g, int) {
      Tensor& ga = grad_ref(a);
      for (double& v : ga.data) v += g[0];
    });
  }

  Var mean(Var a) {
    std::size_t n = val(a).size();
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s / static_cast<double>(n)),
                [this, a, n](const Tensor& g, int) {
                  Tensor& ga = grad_ref(a);
                  double inv = g[0] / static_cast<double>(n);
                  for (double& v : ga.data) v += inv;
                });
  }

  // ---- fused losses ----

  /// Numerically stable mean binary cross-entropy on logits.
  Var bce_logits_mean(Var logits, const Tensor& targets) {
    const Tensor& x = val(logits);
    if (x.size() != targets.size())
      throw std::invalid_argument("bce: size mismatch");
    std::size_t n = x.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = x[i], y = targets[i];
      loss += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::fabs(v)));
    }
    loss /= static_cast<double>(n);
    return push(Tensor::scalar(loss),
                [this, logits, targets, n](const Tensor& g, int) {
                  Tensor& gl = grad_ref(logits);
                  const Tensor& x2 = val(logits);
                  double inv = g[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    double s = 1.0 / (1.0 + std::exp(-x2[i]));
                    gl[i] += (s - targets[i]) * inv;
                  }
                });
  }

  // ---- convolution / normalization (activations as [H*W x C]) ----

  /// 3x3 conv, pad 1. x: [Hin*Win x Cin], w: [Cout x Cin*9], b: [Cout].
  /// Returns [Hout*Wout x Cout] with Hout = ceil(Hin/stride).
  Var conv3x3(Var x, std::size_t hin, std::size_t win, Var w, Var b,
              std::size_t stride) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    std::size_t cin = vx.cols();
    if (vx.rows() != hin * win) throw std::invalid_argument("conv3x3: shape");
    if (vw.cols() != cin * 9) throw std::invalid_argument("conv3x3: weight");
    std::size_t cout = vw.rows();
    std::size_t hout = (hin - 1) / stride + 1, wout = (win - 1) / stride + 1;

    Tensor cols({hout * wout, cin * 9});
    im2col(vx, hin, win, cin, stride, hout, wout, cols);

    Tensor out({hout * wout, cout});
    out.mat().noalias() = cols.mat() * vw.mat().transpose();
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < cout; ++j) out.data[i * cout + j] += vb[j];

    return push(
        std::move(out),
        [this, x, w, b, hin, win, cin, stride, hout, wout,
         cols = std::move(cols)](const Tensor& g, int) {
          // d_bias
          Tensor& gb = grad_ref(b);
          std::size_t cout2 = g.cols();
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < cout2; ++j)
              gb[j] += g.data[i * cout2 + j];
          // d_weight
          grad_ref(w).mat().noalias() += g.mat().transpose() * cols.mat();
          // d_input via col2im
          Tensor dcols({hout * wout, cin * 9});
          dcols.mat().noalias() = g.mat() * val(w).mat();
          Tensor& gx = grad_ref(x);
          col2im(dcols, hin, win, cin, stride, hout, wout, gx);
        });
  }

  struct BatchNormStats {
    std::vector<double> mean, var;  // per channel, biased variance
  };

  /// Batch norm over rows (spatial positions), training mode: statistics
  /// computed from x. `stats_out`, if given, receives the batch statistics
  /// so the caller can maintain running averages.
  Var batchnorm_train(Var x, Var gamma, Var beta, double eps,
                      BatchNormStats* stats_out = nullptr) {
    const Tensor& vx = val(x);
    std::size_t n = vx.rows(), c = vx.cols();
    std::vector<double> m(c, 0.0), v(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) m[j] += vx.data[i * c + j];
    for (double& q : m) q /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        double d = vx.data[i * c + j] - m[j];
        v[j] += d * d;
      }
    for (double& q : v) q /= static_cast<double>(n);
    if (stats_out) {
      stats_out->mean = m;
      stats_out->var = v;
    }

    const Tensor& vg = val(gamma);
    const Tensor& vb = val(beta);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        double xhat = (vx.data[i * c + j] - m[j]) / std::sqrt(v[j] + eps);
        out.data[i * c + j] = vg[j] * xhat + vb[j];
      }

    return push(std::move(out), [this, x, gamma, beta, eps, m = std::move(m),
                                 v = std::move(v)](const Tensor& g, int) {
      const Tensor& vx2 = val(x);
      const Tensor& vg2 = val(gamma);
      std::size_t n2 = vx2.rows(), c2 = vx2.cols();
      Tensor& gx = grad_ref(x);
      Tensor& gg = grad_ref(gamma);
      Tensor& gb = grad_ref(beta);
      double invn = 1.0 / static_cast<double>(n2);
      for (std::size_t j = 0; j < c2; ++j) {
        double istd = 1.0 / std::sqrt(v[j] + eps);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < n2; ++i) {
          double xhat = (vx2.data[i * c2 + j] - m[j]) * istd;
          double go = g.data[i * c2 + j];
          gg[j] += go * xhat;
          gb[j] += go;
          sum_dxhat += go * vg2[j];
          sum_dxhat_xhat += go * vg2[j] * xhat;
        }
        for (std::size_t i = 0; i < n2; ++i) {
          double xhat = (vx2.data[i * c2 + j] - m[j]) * istd;
          double dxhat = g.data[i * c2 + j] * vg2[j];
          gx.data[i * c2 + j] +=
              istd * (dxhat - invn * sum_dxhat - invn * xhat * sum_dxhat_xhat);
        }
      }
    });
  }

  /// Batch norm with fixed (running) statistics.
  Var batchnorm_eval(Var x, Var gamma, Var beta, const std::vector<double>& m,
                     const std::vector<double>& v, double eps) {
    const Tensor& vx = val(x);
    std::size_t n = vx.rows(), c = vx.cols();
    const Tensor& vg = val(gamma);
    const Tensor& vb = val(beta);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out.data[i * c + j] =
            vg[j] * (vx.data[i * c + j] - m[j]) / std::sqrt(v[j] + eps) + vb[j];
    return push(std::move(out),
                [this, x, gamma, beta, m, v, eps](const Tensor& g, int) {
                  const Tensor& vx2 = val(x);
                  const Tensor& vg2 = val(gamma);
                  std::size_t n2 = vx2.rows(), c2 = vx2.cols();
                  Tensor& gx = grad_ref(x);
                  Tensor& gg = grad_ref(gamma);
                  Tensor& gb = grad_ref(beta);
                  for (std::size_t j = 0; j < c2; ++j) {
                    double istd = 1.0 / std::sqrt(v[j] + eps);
                    for (std::size_t i = 0; i < n2; ++i) {
                      double go = g.data[i * c2 + j];
                      gx.data[i * c2 + j] += go * vg2[j] * istd;
                      gg[j] += go * (vx2.data[i * c2 + j] - m[j]) * istd;
                      gb[j] += go;
                    }
                  }
                });
  }

  // ---- driver ----

  void backward(Var root) {
    int r = check(root);
    if (nodes_[r].value.size() != 1)
      throw std::logic_error("tape: backward from non-scalar");
    for (auto& n : nodes_) {
      n.grad = Tensor(n.value.shape);
    }
    nodes_[r].grad[0] = 1.0;
    for (int i = r; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(nodes_[i].grad, i);
  }

  /// Accumulate gradients of named parameters into `grads` (names must exist).
  void add_param_grads(ParamSet& grads) const {
    for (const auto& n : nodes_) {
      if (n.name.empty() || n.grad.size() == 0) continue;
      if (!grads.has(n.name)) continue;  // e.g. frozen groups
      Tensor& g = grads.at(n.name);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(const Tensor&, int)> back;
    std::string name;
  };

  int check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("tape: bad var");
    return v.id;
  }

  void require_same(Var a, Var b, const char* op) {
    if (!val(a).same_shape(val(b)))
      throw std::invalid_argument(std::string(op) + ": shape " +
                                  shape_str(val(a)) + " vs " +
                                  shape_str(val(b)));
  }

  Tensor& grad_ref(Var v) { return nodes_[check(v)].grad; }

  void axpy(Var v, const Tensor& g, double c) {
    Tensor& gv = grad_ref(v);
    for (std::size_t i = 0; i < g.size(); ++i) gv[i] += c * g[i];
  }

  Var push(Tensor value, std::function<void(const Tensor&, int)> back,
           const std::string& name = "", bool /*leaf*/ = false) {
    if (!value.all_finite())
      throw std::runtime_error("tape: non-finite value in node " +
                               std::to_string(nodes_.size()) +
                               (name.empty() ? "" : " (" + name + ")"));
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(back), name});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  static void im2col(const Tensor& x, std::size_t hin, std::size_t win,
                     std::size_t cin, std::size_t stride, std::size_t hout,
                     std::size_t wout, Tensor& cols) {
    for (std::size_t oy = 0; oy < hout; ++oy)
      for (std::size_t ox = 0; ox < wout; ++ox) {
        double* dst = cols.data.data() + (oy * wout + ox) * cin * 9;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              long iy = static_cast<long>(oy * stride) + dy;
              long ix = static_cast<long>(ox * stride) + dx;
              double v = 0.0;
              if (iy >= 0 && iy < static_cast<long>(hin) && ix >= 0 &&
                  ix < static_cast<long>(win))
                v = x.data[(iy * win + ix) * cin + ci];
              dst[ci * 9 + (dy + 1) * 3 + (dx + 1)] = v;
            }
      }
  }

  static void col2im(const Tensor& dcols, std::size_t hin, std::size_t win,
                     std::size_t cin, std::size_t stride, std::size_t hout,
                     std::size_t wout, Tensor& gx) {
    for (std::size_t oy = 0; oy < hout; ++oy)
      for (std::size_t ox = 0; ox < wout; ++ox) {
        const double* src = dcols.data.data() + (oy * wout + ox) * cin * 9;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              long iy = static_cast<long>(oy * stride) + dy;
              long ix = static_cast<long>(ox * stride) + dx;
              if (iy >= 0 && iy < static_cast<long>(hin) && ix >= 0 &&
                  ix < static_cast<long>(win))
                gx.data[(iy * win + ix) * cin + ci] +=
                    src[ci * 9 + (dy + 1) * 3 + (dx + 1)];
            }
      }
  }

  const ParamSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace texpup
