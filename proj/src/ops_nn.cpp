#include <cmath>
#include <limits>

#include "ops_util.hpp"
#include "snn/ops.hpp"

namespace snn {

using detail::require_rank;
using detail::require_same_dtype;

namespace {

template <class T>
std::vector<T>* grad_slot(std::span<Buffer* const> gin, std::size_t i) {
  return gin[i] ? &std::get<std::vector<T>>(*gin[i]) : nullptr;
}

}  // namespace

// ---- convolution ----

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) throw ShapeError("kernel and stride must be >= 1");
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " + std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, Conv2dOptions opt) {
  require_rank("conv2d", x, 4, "input");
  require_rank("conv2d", w, 4, "weight");
  require_same_dtype("conv2d", x, w);
  const std::size_t n_batch = x.size(0), cin = x.size(1), h = x.size(2), wd = x.size(3);
  const std::size_t cout = w.size(0), kh = w.size(2), kw = w.size(3);
  if (w.size(1) != cin) {
    throw ShapeError("conv2d: weight " + to_string(w.shape()) + " does not match input " + to_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias) {
    require_same_dtype("conv2d", x, bias);
    if (bias.shape() != Shape{cout}) throw ShapeError("conv2d: bias shape " + to_string(bias.shape()));
  }
  const std::size_t oh = conv_output_size(h, kh, opt.stride, opt.padding);
  const std::size_t ow = conv_output_size(wd, kw, opt.stride, opt.padding);
  const std::size_t stride = opt.stride;
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);

  const std::size_t taps = cin * kh * kw;
  const std::size_t pixels = oh * ow;

  // Patch matrix of sample n: col[(ci*kh + ky)*kw + kx][oy*ow + ox], zero in the padding.
  auto im2col = [=]<class T>(const T* xp, std::vector<T>& col) {
    col.assign(taps * pixels, T(0));
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          T* row = col.data() + ((ci * kh + ky) * kw + kx) * pixels;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* in = xp + (ci * h + static_cast<std::size_t>(iy)) * wd;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
              row[oy * ow + ox] = in[ix];
            }
          }
        }
      }
    }
  };

  auto col2im = [=]<class T>(const std::vector<T>& col, T* gxp) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T* row = col.data() + ((ci * kh + ky) * kw + kx) * pixels;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            T* out = gxp + (ci * h + static_cast<std::size_t>(iy)) * wd;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
              out[ix] += row[oy * ow + ox];
            }
          }
        }
      }
    }
  };

  Buffer out = dispatch(x.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto xd = x.data<T>();
    auto wdat = w.data<T>();
    std::vector<T> o(n_batch * cout * pixels, T(0));
    std::vector<T> col;
    for (std::size_t n = 0; n < n_batch; ++n) {
      im2col(xd.data() + n * cin * h * wd, col);
      for (std::size_t co = 0; co < cout; ++co) {
        T* op = o.data() + (n * cout + co) * pixels;
        if (has_bias) {
          const T b = bias.data<T>()[co];
          for (std::size_t p = 0; p < pixels; ++p) op[p] = b;
        }
        const T* wrow = wdat.data() + co * taps;
        for (std::size_t k = 0; k < taps; ++k) {
          const T wv = wrow[k];
          const T* crow = col.data() + k * pixels;
          for (std::size_t p = 0; p < pixels; ++p) op[p] += wv * crow[p];
        }
      }
    }
    return o;
  });

  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_op_result(
      "conv2d", {n_batch, cout, oh, ow}, std::move(out), std::move(inputs),
      [=](const Buffer& gout, std::span<Buffer* const> gin) {
        dispatch(x.dtype(), [&](auto tag) {
          using T = decltype(tag);
          const auto& g = std::get<std::vector<T>>(gout);
          auto xd = x.data<T>();
          auto wdat = w.data<T>();
          auto* gx = grad_slot<T>(gin, 0);
          auto* gw = grad_slot<T>(gin, 1);
          auto* gb = has_bias ? grad_slot<T>(gin, 2) : nullptr;
          std::vector<T> col, gcol;
          for (std::size_t n = 0; n < n_batch; ++n) {
            const T* gn = g.data() + n * cout * pixels;
            if (gb) {
              for (std::size_t co = 0; co < cout; ++co) {
                T acc = 0;
                for (std::size_t p = 0; p < pixels; ++p) acc += gn[co * pixels + p];
                (*gb)[co] += acc;
              }
            }
            if (gw) {
              im2col(xd.data() + n * cin * h * wd, col);
              for (std::size_t co = 0; co < cout; ++co) {
                const T* gp = gn + co * pixels;
                T* gwrow = gw->data() + co * taps;
                for (std::size_t k = 0; k < taps; ++k) {
                  const T* crow = col.data() + k * pixels;
                  T acc = 0;
                  for (std::size_t p = 0; p < pixels; ++p) acc += gp[p] * crow[p];
                  gwrow[k] += acc;
                }
              }
            }
            if (gx) {
              gcol.assign(taps * pixels, T(0));
              for (std::size_t co = 0; co < cout; ++co) {
                const T* gp = gn + co * pixels;
                const T* wrow = wdat.data() + co * taps;
                for (std::size_t k = 0; k < taps; ++k) {
                  const T wv = wrow[k];
                  T* grow = gcol.data() + k * pixels;
                  for (std::size_t p = 0; p < pixels; ++p) grow[p] += wv * gp[p];
                }
              }
              col2im(gcol, gx->data() + n * cin * h * wd);
            }
          }
        });
      });
}

// ---- pooling ----

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4, "input");
  const std::size_t n = x.size(0), c = x.size(1), plane = x.size(2) * x.size(3);
  Buffer out = dispatch(x.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto xd = x.data<T>();
    std::vector<T> o(n * c);
    for (std::size_t i = 0; i < n * c; ++i) {
      T acc = 0;
      for (std::size_t j = 0; j < plane; ++j) acc += xd[i * plane + j];
      o[i] = acc / static_cast<T>(plane);
    }
    return o;
  });
  return make_op_result("global_avg_pool", {n, c, 1, 1}, std::move(out), {x},
                        [plane](const Buffer& gout, std::span<Buffer* const> gin) {
                          if (!gin[0]) return;
                          std::visit(
                              [&](auto& gx) {
                                using V = std::decay_t<decltype(gx)>;
                                using T = typename V::value_type;
                                const auto& g = std::get<V>(gout);
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                  const T share = g[i] / static_cast<T>(plane);
                                  for (std::size_t j = 0; j < plane; ++j) gx[i * plane + j] += share;
                                }
                              },
                              *gin[0]);
                        });
}

// ---- layer norm ----

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.dim() < 2) throw ShapeError("layer_norm: input must be at least 2-D, got " + to_string(x.shape()));
  require_same_dtype("layer_norm", x, gamma);
  require_same_dtype("layer_norm", x, beta);
  const std::size_t n = x.size(0), c = x.size(1);
  const std::size_t per_sample = x.numel() / n;
  const std::size_t inner = per_sample / c;
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layer_norm: affine params must have shape (" + std::to_string(c) + ")");
  }

  // Cached per-sample statistics for the backward rule.
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(n);

  Buffer out = dispatch(x.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto xd = x.data<T>();
    auto gd = gamma.data<T>();
    auto bd = beta.data<T>();
    std::vector<T> o(x.numel());
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = s * per_sample;
      double mu = 0;
      for (std::size_t i = 0; i < per_sample; ++i) mu += xd[base + i];
      mu /= static_cast<double>(per_sample);
      double var = 0;
      for (std::size_t i = 0; i < per_sample; ++i) {
        const double d = xd[base + i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(per_sample);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[s] = is;
      for (std::size_t i = 0; i < per_sample; ++i) {
        const double xh = (xd[base + i] - mu) * is;
        (*xhat)[base + i] = xh;
        const std::size_t ch = i / inner;
        o[base + i] = static_cast<T>(gd[ch] * xh + bd[ch]);
      }
    }
    return o;
  });

  return make_op_result(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [=](const Buffer& gout, std::span<Buffer* const> gin) {
        dispatch(x.dtype(), [&](auto tag) {
          using T = decltype(tag);
          const auto& g = std::get<std::vector<T>>(gout);
          auto gd = gamma.data<T>();
          auto* gx = grad_slot<T>(gin, 0);
          auto* gg = grad_slot<T>(gin, 1);
          auto* gbeta = grad_slot<T>(gin, 2);
          for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = s * per_sample;
            double mean_d = 0;
            double mean_dx = 0;
            for (std::size_t i = 0; i < per_sample; ++i) {
              const std::size_t ch = i / inner;
              const double dxh = static_cast<double>(g[base + i]) * gd[ch];
              mean_d += dxh;
              mean_dx += dxh * (*xhat)[base + i];
              if (gg) (*gg)[ch] += static_cast<T>(g[base + i] * (*xhat)[base + i]);
              if (gbeta) (*gbeta)[ch] += g[base + i];
            }
            mean_d /= static_cast<double>(per_sample);
            mean_dx /= static_cast<double>(per_sample);
            if (!gx) continue;
            for (std::size_t i = 0; i < per_sample; ++i) {
              const std::size_t ch = i / inner;
              const double dxh = static_cast<double>(g[base + i]) * gd[ch];
              (*gx)[base + i] += static_cast<T>((*inv_std)[s] * (dxh - mean_d - (*xhat)[base + i] * mean_dx));
            }
          }
        });
      });
}

// ---- matmul / linear ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_dtype("matmul", a, b);
  if (a.dim() < 2 || b.dim() < 2) {
    throw ShapeError("matmul: operands must be at least 2-D, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.size(a.dim() - 2), k = a.size(a.dim() - 1);
  const std::size_t kb = b.size(b.dim() - 2), nn = b.size(b.dim() - 1);
  if (k != kb) {
    throw ShapeError("matmul: inner dims differ for " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  if (!batch_a.empty() && !batch_b.empty() && batch_a != batch_b) {
    throw ShapeError("matmul: batch dims differ for " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const Shape& batch = batch_a.empty() ? batch_b : batch_a;
  const std::size_t nb = numel(batch);
  const std::size_t step_a = batch_a.empty() ? 0 : m * k;
  const std::size_t step_b = batch_b.empty() ? 0 : k * nn;
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(nn);

  Buffer out = dispatch(a.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto ad = a.data<T>();
    auto bd = b.data<T>();
    std::vector<T> o(nb * m * nn, T(0));
    for (std::size_t p = 0; p < nb; ++p) {
      const T* A = ad.data() + p * step_a;
      const T* B = bd.data() + p * step_b;
      T* C = o.data() + p * m * nn;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t q = 0; q < k; ++q) {
          const T aiq = A[i * k + q];
          for (std::size_t j = 0; j < nn; ++j) C[i * nn + j] += aiq * B[q * nn + j];
        }
      }
    }
    return o;
  });

  return make_op_result("matmul", out_shape, std::move(out), {a, b},
                        [=](const Buffer& gout, std::span<Buffer* const> gin) {
                          dispatch(a.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            const auto& g = std::get<std::vector<T>>(gout);
                            auto ad = a.data<T>();
                            auto bd = b.data<T>();
                            auto* ga = grad_slot<T>(gin, 0);
                            auto* gb = grad_slot<T>(gin, 1);
                            for (std::size_t p = 0; p < nb; ++p) {
                              const T* A = ad.data() + p * step_a;
                              const T* B = bd.data() + p * step_b;
                              const T* G = g.data() + p * m * nn;
                              // dA = G B^T, dB = A^T G
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t q = 0; q < k; ++q) {
                                  T acc = 0;
                                  for (std::size_t j = 0; j < nn; ++j) acc += G[i * nn + j] * B[q * nn + j];
                                  if (ga) (*ga)[p * step_a + i * k + q] += acc;
                                  if (gb) {
                                    const T aiq = A[i * k + q];
                                    for (std::size_t j = 0; j < nn; ++j) (*gb)[p * step_b + q * nn + j] += aiq * G[i * nn + j];
                                  }
                                }
                              }
                            }
                          });
                        });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank("linear", x, 2, "input");
  require_rank("linear", w, 2, "weight");
  require_same_dtype("linear", x, w);
  const std::size_t n = x.size(0), f = x.size(1), k = w.size(0);
  if (w.size(1) != f) {
    throw ShapeError("linear: weight " + to_string(w.shape()) + " does not match input " + to_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{k}) throw ShapeError("linear: bias shape " + to_string(bias.shape()));

  Buffer out = dispatch(x.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto xd = x.data<T>();
    auto wdat = w.data<T>();
    std::vector<T> o(n * k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        T acc = has_bias ? bias.data<T>()[j] : T(0);
        for (std::size_t q = 0; q < f; ++q) acc += wdat[j * f + q] * xd[i * f + q];
        o[i * k + j] = acc;
      }
    }
    return o;
  });

  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_op_result("linear", {n, k}, std::move(out), std::move(inputs),
                        [=](const Buffer& gout, std::span<Buffer* const> gin) {
                          dispatch(x.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            const auto& g = std::get<std::vector<T>>(gout);
                            auto xd = x.data<T>();
                            auto wdat = w.data<T>();
                            auto* gx = grad_slot<T>(gin, 0);
                            auto* gw = grad_slot<T>(gin, 1);
                            auto* gb = has_bias ? grad_slot<T>(gin, 2) : nullptr;
                            for (std::size_t i = 0; i < n; ++i) {
                              for (std::size_t j = 0; j < k; ++j) {
                                const T gij = g[i * k + j];
                                if (gb) (*gb)[j] += gij;
                                if (gij == T(0)) continue;
                                for (std::size_t q = 0; q < f; ++q) {
                                  if (gw) (*gw)[j * f + q] += gij * xd[i * f + q];
                                  if (gx) (*gx)[i * f + q] += gij * wdat[j * f + q];
                                }
                              }
                            }
                          });
                        });
}

// ---- losses ----

namespace {

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<double>& targets) {
  const std::size_t n = logits.size(0), k = logits.size(1);
  auto probs = std::make_shared<std::vector<double>>(n * k);
  double total = 0;
  dispatch(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto ld = logits.data<T>();
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(ld[i * k + j]));
      double z = 0;
      for (std::size_t j = 0; j < k; ++j) z += std::exp(ld[i * k + j] - mx);
      const double log_z = mx + std::log(z);
      for (std::size_t j = 0; j < k; ++j) {
        const double lp = ld[i * k + j] - log_z;
        (*probs)[i * k + j] = std::exp(lp);
        if (targets[i * k + j] != 0.0) total -= targets[i * k + j] * lp;
      }
    }
  });
  const double loss = total / static_cast<double>(n);
  return make_op_result("cross_entropy", {1}, make_buffer(logits.dtype(), 1, loss), {logits},
                        [=](const Buffer& gout, std::span<Buffer* const> gin) {
                          if (!gin[0]) return;
                          std::visit(
                              [&](auto& gx) {
                                using V = std::decay_t<decltype(gx)>;
                                using T = typename V::value_type;
                                const double g = std::get<V>(gout)[0];
                                for (std::size_t i = 0; i < n * k; ++i) {
                                  gx[i] += static_cast<T>(g * ((*probs)[i] - targets[i]) / static_cast<double>(n));
                                }
                              },
                              *gin[0]);
                        });
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require_rank("cross_entropy", logits, 2, "logits");
  const std::size_t n = logits.size(0), k = logits.size(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  std::vector<double> targets(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " not in [0," + std::to_string(k) + ")");
    }
    targets[i * k + labels[i]] = 1.0;
  }
  return softmax_cross_entropy(logits, targets);
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_rank("cross_entropy", logits, 2, "logits");
  if (targets.shape() != logits.shape()) {
    throw ShapeError("cross_entropy: targets " + to_string(targets.shape()) + " vs logits " + to_string(logits.shape()));
  }
  return softmax_cross_entropy(logits, targets.to_vector());
}

}  // namespace snn
