#pragma once

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle onto shared, immutable storage. Operations that
// receive at least one input with requires_grad() record a backward rule on
// the result; calling backward() on a scalar walks those rules once in reverse
// topological order and accumulates gradients into the leaves.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace snn {

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

using Shape = std::vector<std::size_t>;
using Buffer = std::variant<std::vector<double>, std::vector<float>>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);
std::string_view dtype_name(DType dt);

// Calls f(double{}) or f(float{}) according to dt.
template <class F>
decltype(auto) dispatch(DType dt, F&& f) {
  if (dt == DType::f32) return f(float{});
  return f(double{});
}

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, double> || std::is_same_v<T, float>);
  return std::is_same_v<T, double> ? DType::f64 : DType::f32;
}

Buffer make_buffer(DType dt, std::size_t n, double fill = 0.0);
DType buffer_dtype(const Buffer& b);
std::size_t buffer_size(const Buffer& b);

namespace detail {
struct TensorImpl;
struct GradFn;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::f64, bool requires_grad = false);
  static Tensor ones(Shape shape, DType dt = DType::f64, bool requires_grad = false);
  static Tensor full(Shape shape, double value, DType dt = DType::f64, bool requires_grad = false);
  static Tensor from(Shape shape, const std::vector<double>& values, DType dt = DType::f64,
                     bool requires_grad = false);
  static Tensor scalar(double value, DType dt = DType::f64);
  static Tensor from_buffer(Shape shape, Buffer data, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  DType dtype() const;

  template <class T>
  std::span<const T> data() const;
  // Writable view. Only meaningful on leaves; used by initializers and the optimizer.
  template <class T>
  std::span<T> mutable_data();
  const Buffer& buffer() const;

  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  std::optional<Tensor> grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;
  Tensor to(DType dt) const;
  // Name of the op that produced this tensor ("leaf" for leaves).
  std::string_view op_name() const;

  void backward() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Backward rule for one recorded op. grads_in[i] is null when input i does not
// need a gradient; otherwise it is a zero-initialised (or partially
// accumulated) buffer of input i's shape to add into.
using BackwardFn = std::function<void(const Buffer& grad_out, std::span<Buffer* const> grads_in)>;

namespace detail {

struct GradFn {
  std::string name;
  std::vector<Tensor> inputs;
  BackwardFn backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  Buffer data;
  bool requires_grad = false;
  std::optional<Buffer> grad;
  std::shared_ptr<GradFn> grad_fn;
};

}  // namespace detail

// Builds the result of an op. The backward rule is recorded only when grad
// mode is on and some input requires a gradient.
Tensor make_op_result(std::string_view name, Shape shape, Buffer data, std::vector<Tensor> inputs,
                      BackwardFn backward);

bool grad_enabled();

// Disables graph recording for its lifetime (evaluation, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-topological list of recorded ops reachable from a scalar loss.
// A tape may be run once; afterwards every op on it is consumed and any later
// backward through those ops fails with AutogradError.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  // Op names in forward (topological) order.
  std::vector<std::string> op_names() const;
  void run();

 private:
  Tensor loss_;
  std::vector<std::shared_ptr<detail::TensorImpl>> order_;
  bool ran_ = false;
};

void backward(const Tensor& loss);

// First recorded op (in topological order) whose output contains a non-finite
// value while all of its inputs are finite. Empty when none is found.
std::optional<std::string> first_nonfinite_op(const Tensor& root);

template <class T>
std::span<const T> Tensor::data() const {
  if (!impl_) throw std::logic_error("data() on undefined tensor");
  const auto* v = std::get_if<std::vector<T>>(&impl_->data);
  if (v == nullptr) throw std::invalid_argument("tensor dtype is " + std::string(dtype_name(dtype())));
  return {v->data(), v->size()};
}

template <class T>
std::span<T> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("mutable_data() on undefined tensor");
  auto* v = std::get_if<std::vector<T>>(&impl_->data);
  if (v == nullptr) throw std::invalid_argument("tensor dtype is " + std::string(dtype_name(dtype())));
  return {v->data(), v->size()};
}

}  // namespace snn
