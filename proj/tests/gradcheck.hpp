#pragma once

// Finite-difference gradient oracle. Lives on the test side and never touches
// the tape's backward machinery: the reference derivative of every checked
// input element comes from two plain forward evaluations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pfkd/rng.hpp"
#include "pfkd/tensor.hpp"

namespace pfkd::test {

// Max relative error between tape gradients and central finite differences
// over every element of every listed input. `forward` must rebuild the graph
// from the (mutated) inputs on each call and return a scalar.
inline double gradcheck(const std::function<Tensor<double>()>& forward,
                        std::vector<Tensor<double>> inputs, double h = 1e-5) {
  Tape<double> tape;
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  {
    TapeScope<double> scope(tape);
    auto loss = forward();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> tape_grads;
  tape_grads.reserve(inputs.size());
  for (auto& in : inputs) tape_grads.emplace_back(in.grad().begin(), in.grad().end());

  double max_rel = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& x = inputs[t];
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const double orig = x.data()[i];
      x.data()[i] = orig + h;
      const double fp = forward().item();
      x.data()[i] = orig - h;
      const double fm = forward().item();
      x.data()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = tape_grads[t][static_cast<std::size_t>(i)];
      const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-3});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

inline Tensor<double> rand_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Push every element at least `margin` away from zero, keeping its sign.
// Used before checking kinked ops (prelu) so the finite difference never
// straddles the non-smooth point.
inline void keep_off_zero(Tensor<double>& t, double margin = 0.05) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    double& v = t.data()[i];
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  }
}

}  // namespace pfkd::test
