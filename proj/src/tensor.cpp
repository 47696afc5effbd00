#include "snn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace snn {

namespace {
thread_local bool g_grad_enabled = true;

bool all_finite(const Buffer& b) {
  return std::visit(
      [](const auto& v) {
        return std::all_of(v.begin(), v.end(), [](auto x) { return std::isfinite(x); });
      },
      b);
}

void add_into(Buffer& dst, const Buffer& src) {
  std::visit(
      [&](auto& d) {
        using V = std::decay_t<decltype(d)>;
        const auto& s = std::get<V>(src);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
      },
      dst);
}
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string_view dtype_name(DType dt) { return dt == DType::f64 ? "float64" : "float32"; }

Buffer make_buffer(DType dt, std::size_t n, double fill) {
  if (dt == DType::f32) return std::vector<float>(n, static_cast<float>(fill));
  return std::vector<double>(n, fill);
}

DType buffer_dtype(const Buffer& b) { return b.index() == 0 ? DType::f64 : DType::f32; }

std::size_t buffer_size(const Buffer& b) {
  return std::visit([](const auto& v) { return v.size(); }, b);
}

// ---- construction ----

Tensor Tensor::from_buffer(Shape shape, Buffer data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + to_string(shape));
  }
  if (snn::numel(shape) != buffer_size(data)) {
    throw ShapeError("shape " + to_string(shape) + " does not match " +
                     std::to_string(buffer_size(data)) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, DType dt, bool requires_grad) { return full(std::move(shape), 0.0, dt, requires_grad); }

Tensor Tensor::ones(Shape shape, DType dt, bool requires_grad) { return full(std::move(shape), 1.0, dt, requires_grad); }

Tensor Tensor::full(Shape shape, double value, DType dt, bool requires_grad) {
  const auto n = snn::numel(shape);
  return from_buffer(std::move(shape), make_buffer(dt, n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, const std::vector<double>& values, DType dt, bool requires_grad) {
  if (dt == DType::f64) return from_buffer(std::move(shape), values, requires_grad);
  std::vector<float> f(values.begin(), values.end());
  return from_buffer(std::move(shape), std::move(f), requires_grad);
}

Tensor Tensor::scalar(double value, DType dt) { return full({1}, value, dt); }

// ---- accessors ----

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("shape() on undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return snn::numel(shape()); }

DType Tensor::dtype() const {
  if (!impl_) throw std::logic_error("dtype() on undefined tensor");
  return buffer_dtype(impl_->data);
}

const Buffer& Tensor::buffer() const {
  if (!impl_) throw std::logic_error("buffer() on undefined tensor");
  return impl_->data;
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, buffer());
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return std::visit([](const auto& v) { return static_cast<double>(v[0]); }, buffer());
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + to_string(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range for " + to_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return std::visit([flat](const auto& v) { return static_cast<double>(v[flat]); }, buffer());
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw AutogradError("requires_grad can only be changed on leaves");
  impl_->requires_grad = on;
  if (!on) impl_->grad.reset();
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && impl_->grad_fn == nullptr; }

std::optional<Tensor> Tensor::grad() const {
  if (!impl_ || !impl_->grad) return std::nullopt;
  return Tensor::from_buffer(impl_->shape, *impl_->grad);
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.reset();
}

Tensor Tensor::detach() const { return Tensor::from_buffer(shape(), buffer()); }

Tensor Tensor::clone() const {
  auto t = Tensor::from_buffer(shape(), buffer(), is_leaf() && requires_grad());
  return t;
}

Tensor Tensor::to(DType dt) const {
  if (dt == dtype()) return detach();
  return std::visit(
      [&](const auto& v) -> Tensor {
        if (dt == DType::f64) return from_buffer(shape(), std::vector<double>(v.begin(), v.end()));
        return from_buffer(shape(), std::vector<float>(v.begin(), v.end()));
      },
      buffer());
}

std::string_view Tensor::op_name() const {
  if (!impl_ || !impl_->grad_fn) return "leaf";
  return impl_->grad_fn->name;
}

void Tensor::backward() const { snn::backward(*this); }

// ---- graph recording ----

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_op_result(std::string_view name, Shape shape, Buffer data, std::vector<Tensor> inputs,
                      BackwardFn backward_fn) {
  Tensor out = Tensor::from_buffer(std::move(shape), std::move(data));
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  for (const auto& in : inputs) {
    if (in.requires_grad() && !in.is_leaf() && in.impl()->grad_fn->consumed) {
      throw AutogradError(std::string(name) + ": input comes from a consumed tape");
    }
  }
  auto fn = std::make_shared<detail::GradFn>();
  fn->name = std::string(name);
  fn->inputs = std::move(inputs);
  fn->backward = std::move(backward_fn);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(fn);
  return out;
}

namespace {

// Iterative post-order DFS over nodes that require grad.
std::vector<std::shared_ptr<detail::TensorImpl>> topo_order(const Tensor& root) {
  std::vector<std::shared_ptr<detail::TensorImpl>> order;
  std::unordered_set<const detail::TensorImpl*> visited;
  struct Frame {
    std::shared_ptr<detail::TensorImpl> node;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({root.impl()});
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& top = stack.back();
    const auto& fn = top.node->grad_fn;
    if (fn && top.next < fn->inputs.size()) {
      const auto& child = fn->inputs[top.next++].impl();
      if (child->requires_grad && visited.insert(child.get()).second) stack.push_back({child});
      continue;
    }
    order.push_back(top.node);
    stack.pop_back();
  }
  return order;
}

}  // namespace

Tape Tape::record(const Tensor& loss) {
  if (!loss.defined()) throw AutogradError("backward on undefined tensor");
  if (loss.numel() != 1) throw AutogradError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) throw AutogradError("loss does not require grad (no recorded ops)");
  Tape tape;
  tape.loss_ = loss;
  tape.order_ = topo_order(loss);
  for (const auto& node : tape.order_) {
    if (node->grad_fn && node->grad_fn->consumed) {
      throw AutogradError("dead tape: backward already ran through op '" + node->grad_fn->name + "'");
    }
  }
  return tape;
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  for (const auto& n : order_) names.push_back(n->grad_fn ? n->grad_fn->name : "leaf");
  return names;
}

void Tape::run() {
  if (ran_) throw AutogradError("dead tape: backward already ran");
  ran_ = true;
  std::unordered_map<const detail::TensorImpl*, Buffer> grads;
  const auto& root = loss_.impl();
  grads.emplace(root.get(), make_buffer(loss_.dtype(), 1, 1.0));

  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const auto& node = *it;
    auto found = grads.find(node.get());
    if (found == grads.end()) continue;
    Buffer g = std::move(found->second);
    grads.erase(found);
    if (!node->grad_fn) {
      if (node->grad) {
        add_into(*node->grad, g);
      } else {
        node->grad = std::move(g);
      }
      continue;
    }
    auto& fn = *node->grad_fn;
    std::vector<Buffer*> slots(fn.inputs.size(), nullptr);
    for (std::size_t i = 0; i < fn.inputs.size(); ++i) {
      const auto& in = fn.inputs[i].impl();
      if (!in->requires_grad) continue;
      auto [pos, inserted] = grads.try_emplace(in.get());
      if (inserted) pos->second = make_buffer(buffer_dtype(in->data), buffer_size(in->data));
      slots[i] = &pos->second;
    }
    fn.backward(g, slots);
    fn.consumed = true;
    fn.backward = nullptr;
  }
  // Release the graph so intermediate buffers are freed.
  for (const auto& node : order_) {
    if (node->grad_fn) node->grad_fn->inputs.clear();
  }
  order_.clear();
}

void backward(const Tensor& loss) { Tape::record(loss).run(); }

std::optional<std::string> first_nonfinite_op(const Tensor& root) {
  if (!root.defined() || !root.requires_grad()) return std::nullopt;
  for (const auto& node : topo_order(root)) {
    if (!node->grad_fn || all_finite(node->data)) continue;
    const bool inputs_finite = std::all_of(node->grad_fn->inputs.begin(), node->grad_fn->inputs.end(),
                                           [](const Tensor& t) { return all_finite(t.buffer()); });
    if (inputs_finite) return node->grad_fn->name;
  }
  return std::nullopt;
}

}  // namespace snn
