#include <cmath>

#include "snn/ops.hpp"
#include "ops_util.hpp"

namespace snn {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) + " are not broadcast-compatible");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

namespace {

using detail::broadcast_strides;
using detail::for_each_broadcast;

// f(x, y) -> out; da(g, x, y) and db(g, x, y) give the partials times g.
template <class Fwd, class Da, class Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  detail::require_same_dtype(name, a, b);
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const bool same = a.shape() == b.shape();

  Buffer out = dispatch(a.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto y = b.data<T>();
    std::vector<T> o(numel(out_shape));
    if (same) {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
    } else {
      for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = fwd(x[ia], y[ib]); });
    }
    return o;
  });

  return make_op_result(name, out_shape, std::move(out), {a, b},
                        [a, b, out_shape, sa, sb, same, da, db](const Buffer& gout, std::span<Buffer* const> gin) {
                          dispatch(a.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto x = a.data<T>();
                            auto y = b.data<T>();
                            const auto& g = std::get<std::vector<T>>(gout);
                            T* ga = gin[0] ? std::get<std::vector<T>>(*gin[0]).data() : nullptr;
                            T* gb = gin[1] ? std::get<std::vector<T>>(*gin[1]).data() : nullptr;
                            auto body = [&](std::size_t i, std::size_t ia, std::size_t ib) {
                              if (ga) ga[ia] += da(g[i], x[ia], y[ib]);
                              if (gb) gb[ib] += db(g[i], x[ia], y[ib]);
                            };
                            if (same) {
                              for (std::size_t i = 0; i < g.size(); ++i) body(i, i, i);
                            } else {
                              for_each_broadcast(out_shape, sa, sb, body);
                            }
                          });
                        });
}

template <class Fwd, class Dx>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Dx dx) {
  Buffer out = dispatch(a.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto x = a.data<T>();
    std::vector<T> o(x.size());
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i]);
    return o;
  });
  Tensor result = make_op_result(name, a.shape(), std::move(out), {a}, nullptr);
  if (!result.requires_grad()) return result;
  // The derivative may use the output value, so the rule is attached after the forward.
  std::weak_ptr<detail::TensorImpl> weak_out = result.impl();
  result.impl()->grad_fn->backward = [a, weak_out, dx](const Buffer& gout, std::span<Buffer* const> gin) {
    if (!gin[0]) return;
    auto out_impl = weak_out.lock();
    dispatch(a.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto x = a.data<T>();
      const auto& y = std::get<std::vector<T>>(out_impl->data);
      const auto& g = std::get<std::vector<T>>(gout);
      auto& gx = std::get<std::vector<T>>(*gin[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dx(g[i], x[i], y[i]);
    });
  };
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](auto x, auto y) { return x + y; }, [](auto g, auto, auto) { return g; },
      [](auto g, auto, auto) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](auto x, auto y) { return x - y; }, [](auto g, auto, auto) { return g; },
      [](auto g, auto, auto) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](auto x, auto y) { return x * y; }, [](auto g, auto, auto y) { return g * y; },
      [](auto g, auto x, auto) { return g * x; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      "add_scalar", a, [s](auto x) { return static_cast<decltype(x)>(x + s); },
      [](auto g, auto, auto) { return g; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      "mul_scalar", a, [s](auto x) { return static_cast<decltype(x)>(x * static_cast<decltype(x)>(s)); },
      [s](auto g, auto, auto) { return static_cast<decltype(g)>(g * static_cast<decltype(g)>(s)); });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](auto v) {
        using T = decltype(v);
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](auto g, auto, auto y) { return g * y * (decltype(y)(1) - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](auto v) { return v > decltype(v)(0) ? v : decltype(v)(0); },
      [](auto g, auto v, auto) { return v > decltype(v)(0) ? g : decltype(g)(0); });
}

Tensor sum(const Tensor& a) {
  Buffer out = dispatch(a.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    T acc = 0;
    for (auto v : a.data<T>()) acc += v;
    return std::vector<T>{acc};
  });
  return make_op_result("sum", {1}, std::move(out), {a}, [](const Buffer& gout, std::span<Buffer* const> gin) {
    if (!gin[0]) return;
    std::visit(
        [&](auto& gx) {
          using V = std::decay_t<decltype(gx)>;
          const auto g = std::get<V>(gout)[0];
          for (auto& v : gx) v += g;
        },
        *gin[0]);
  });
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + to_string(a.shape()) + " to " + to_string(shape));
  }
  return make_op_result("reshape", std::move(shape), a.buffer(), {a},
                        [](const Buffer& gout, std::span<Buffer* const> gin) {
                          if (!gin[0]) return;
                          std::visit(
                              [&](auto& gx) {
                                using V = std::decay_t<decltype(gx)>;
                                const auto& g = std::get<V>(gout);
                                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                              },
                              *gin[0]);
                        });
}

Tensor select_row(const Tensor& table, std::size_t index) {
  if (table.dim() != 2) throw ShapeError("select_row expects a 2-D table, got " + to_string(table.shape()));
  const std::size_t rows = table.size(0);
  const std::size_t cols = table.size(1);
  if (index >= rows) {
    throw std::out_of_range("row " + std::to_string(index) + " out of range for table " + to_string(table.shape()));
  }
  Buffer out = dispatch(table.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto d = table.data<T>();
    return std::vector<T>(d.begin() + static_cast<std::ptrdiff_t>(index * cols),
                          d.begin() + static_cast<std::ptrdiff_t>((index + 1) * cols));
  });
  return make_op_result("select_row", {cols}, std::move(out), {table},
                        [index, cols](const Buffer& gout, std::span<Buffer* const> gin) {
                          if (!gin[0]) return;
                          std::visit(
                              [&](auto& gx) {
                                using V = std::decay_t<decltype(gx)>;
                                const auto& g = std::get<V>(gout);
                                for (std::size_t c = 0; c < cols; ++c) gx[index * cols + c] += g[c];
                              },
                              *gin[0]);
                        });
}

}  // namespace snn
