#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pfkd {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> v;  // values, row-major
  std::vector<T> g;  // gradient accumulator, same extent as v once allocated
  bool requires_grad = false;

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }

  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), T(0));
  }
};

// Dense row-major tensor handle. Copies are shallow: two Tensor values may
// alias the same storage, which is what lets the tape refer back to operands.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Storage<T>>()) {
    impl_->shape = std::move(shape);
    impl_->v.assign(static_cast<std::size_t>(shape_numel(impl_->shape)), fill);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }

  static Tensor from(Shape shape, std::vector<T> values) {
    Tensor t;
    t.impl_ = std::make_shared<Storage<T>>();
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw std::invalid_argument("value count does not match shape " + shape_str(shape));
    t.impl_->shape = std::move(shape);
    t.impl_->v = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(impl_->shape.size()); }
  std::int64_t dim(std::int64_t i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return impl_->size(); }

  std::span<T> values() { return {impl_->v.data(), impl_->v.size()}; }
  std::span<const T> values() const { return {impl_->v.data(), impl_->v.size()}; }
  T* data() { return impl_->v.data(); }
  const T* data() const { return impl_->v.data(); }

  bool requires_grad() const { return impl_->requires_grad; }

  Tensor& set_requires_grad(bool flag = true) {
    impl_->requires_grad = flag;
    if (flag) impl_->ensure_grad();
    return *this;
  }

  std::span<const T> grad() const {
    impl_->ensure_grad();
    return {impl_->g.data(), impl_->g.size()};
  }

  std::span<T> grad() {
    impl_->ensure_grad();
    return {impl_->g.data(), impl_->g.size()};
  }

  void zero_grad() { impl_->zero_grad(); }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor");
    return impl_->v[0];
  }

  // Element accessors for tests and small hand-built fixtures.
  T& at(std::initializer_list<std::int64_t> idx) {
    return impl_->v[static_cast<std::size_t>(flat_index(idx))];
  }
  T at(std::initializer_list<std::int64_t> idx) const {
    return impl_->v[static_cast<std::size_t>(flat_index(idx))];
  }

  std::shared_ptr<Storage<T>> impl() const { return impl_; }

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<std::int64_t>(idx.size()) != rank())
      throw std::invalid_argument("index rank mismatch");
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (auto i : idx) {
      flat = flat * impl_->shape[k] + i;
      ++k;
    }
    return flat;
  }

  std::shared_ptr<Storage<T>> impl_;
};

// Ordered record of executed primitives. Ops are appended in execution order,
// so walking the record backwards is a valid reverse topological order: every
// consumer of a value runs (and deposits its gradient contribution) before
// the producer reads that gradient.
template <typename T>
class Tape {
 public:
  void record(std::vector<std::shared_ptr<Storage<T>>> outputs, std::function<void()> backward_step) {
    for (auto& out : outputs) {
      out->requires_grad = true;
      out->ensure_grad();
    }
    recs_.push_back(Record{std::move(outputs), std::move(backward_step)});
  }

  std::size_t num_recorded() const { return recs_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Gradients of
  // recorded intermediates are reset first; leaf gradients accumulate across
  // calls until zero_grad, so calling backward twice doubles leaf gradients.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward requires a scalar loss");
    if (recs_.empty()) throw std::invalid_argument("backward on an empty tape");
    for (auto& r : recs_)
      for (auto& out : r.outputs) out->zero_grad();
    loss.impl()->ensure_grad();
    loss.impl()->g[0] = T(1);
    for (auto it = recs_.rbegin(); it != recs_.rend(); ++it) it->backward_step();
  }

 private:
  struct Record {
    std::vector<std::shared_ptr<Storage<T>>> outputs;
    std::function<void()> backward_step;
  };
  std::vector<Record> recs_;
};

// Current tape for this thread. Ops record onto it when set; a null current
// tape means values are computed without building the backward graph.
template <typename T>
inline Tape<T>*& current_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(current_tape<T>()) { current_tape<T>() = &tape; }
  ~TapeScope() { current_tape<T>() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <typename T>
class NoGradScope {
 public:
  NoGradScope() : prev_(current_tape<T>()) { current_tape<T>() = nullptr; }
  ~NoGradScope() { current_tape<T>() = prev_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* prev_;
};

namespace detail {

// An op participates in the backward graph when a tape is active and at least
// one operand already tracks gradients.
template <typename T>
inline bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (current_tape<T>() == nullptr) return false;
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

}  // namespace detail

}  // namespace pfkd
