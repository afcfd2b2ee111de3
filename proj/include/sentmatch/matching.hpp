// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sentmatch/char_cnn.hpp"

namespace sentmatch {

namespace detail {
inline void require_same_matrix(Var a, Var b, const char *op) {
  const Shape sa = a.graph->shape(a), sb = b.graph->shape(b);
  if (sa.size() != 2 || sa != sb)
    throw ShapeError(std::string(op) + ": sentence matrices differ: " + shape_str(sa) + " vs " + shape_str(sb));
}
}  // namespace detail

/// Elementwise product plane.
inline Var fp_mul(Var m1, Var m2) {
  detail::require_same_matrix(m1, m2, "fp_mul");
  return mul(m1, m2);
}

/// Elementwise distance plane |M1 - M2|.
inline Var fp_absdiff(Var m1, Var m2) {
  detail::require_same_matrix(m1, m2, "fp_absdiff");
  return abs(sub(m1, m2));
}

/// Joint-convolution plane parameters: a width-2, stride-2 temporal filter
/// bank over the interleaved rows of both sentence matrices.
struct FpConvParams {
  DenseParams conv;  // (row x 2*row)

  explicit FpConvParams(std::size_t row_dim) : conv("match.fp3", 2 * row_dim, row_dim) {}

  void init(Rng &rng) { conv.init(rng); }
  ParameterList parameters() { return {&conv.weight, &conv.bias}; }
};

/// tanh(conv(Reshape(Join(M1, M2)))). The join places row r of M1 next to
/// row r of M2, so the reshape to (2n x row) interleaves them and each
/// stride-2 window sees exactly one layer of both sentences.
inline Var fp_conv(Graph &g, FpConvParams &p, Var m1, Var m2) {
  detail::require_same_matrix(m1, m2, "fp_conv");
  const Shape s = g.shape(m1);
  Var joined = reshape(concat(1, {m1, m2}), {2 * s[0], s[1]});
  return tanh(conv1d(joined, g.param(p.conv.weight), g.param(p.conv.bias), 2, 2));
}

/// Feature tensor (3 x n x row): planes product, distance, joint conv.
inline Var assemble(Graph &g, FpConvParams &p, Var m1, Var m2) {
  const Var planes[] = {fp_mul(m1, m2), fp_absdiff(m1, m2), fp_conv(g, p, m1, m2)};
  return stack(planes);
}

}  // namespace sentmatch
