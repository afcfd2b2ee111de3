// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sentmatch {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles. Plain value type; graph participation
/// goes through Graph/Var.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {
    check_extents();
  }

  Tensor(Shape s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    check_extents();
    if (data.size() != shape_size(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  double &operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double &at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * shape[1], shape[1]};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * shape[1], shape[1]};
  }

 private:
  void check_extents() const {
    for (auto e : shape)
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
};

/// A named tensor with a persistent gradient buffer. Constant parameters
/// (frozen embedding tables) never accumulate gradient.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  bool constant = false;

  Parameter() = default;
  Parameter(std::string n, Shape shape, bool is_constant = false)
      : name(std::move(n)), value(std::move(shape)), grad(value.size(), 0.0),
        constant(is_constant) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

using ParameterList = std::vector<Parameter *>;

inline void zero_grads(const ParameterList &params) {
  for (auto *p : params) p->zero_grad();
}

/// Splitmix-style 64-bit generator wrapper giving portable draws; the
/// standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Parameter &p, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto &v : p.value.data) v = rng.uniform(-limit, limit);
}

inline void fill(Parameter &p, double v) {
  for (auto &x : p.value.data) x = v;
}

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace sentmatch
