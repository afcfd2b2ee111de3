// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sentmatch/lstm.hpp"

namespace sentmatch {

/// Dependency tree over token positions 0..n-1.
struct DepTree {
  std::size_t root = 0;
  std::vector<std::vector<std::size_t>> children;

  std::size_t size() const { return children.size(); }

  /// From head indices in CoNLL convention: heads[i] is the 1-based head of
  /// token i+1, or 0 for the root.
  static DepTree from_heads(const std::vector<std::size_t> &heads) {
    const std::size_t n = heads.size();
    if (n == 0) throw std::invalid_argument("dependency tree has no nodes");
    DepTree t;
    t.children.assign(n, {});
    std::optional<std::size_t> root;
    for (std::size_t i = 0; i < n; ++i) {
      if (heads[i] == 0) {
        if (root) throw std::invalid_argument("dependency tree has multiple roots");
        root = i;
      } else if (heads[i] > n) {
        throw std::invalid_argument("head index " + std::to_string(heads[i]) + " out of range");
      } else if (heads[i] == i + 1) {
        throw std::invalid_argument("dependency tree has a self loop at token " + std::to_string(i + 1));
      } else {
        t.children[heads[i] - 1].push_back(i);
      }
    }
    if (!root) throw std::invalid_argument("dependency tree has no root (cyclic)");
    t.root = *root;
    t.validate();
    return t;
  }

  /// Parenthesized form over 1-based token indices, e.g. "(2 (1) (3))".
  static DepTree parse(std::string_view text) {
    std::vector<std::vector<std::size_t>> kids_of;  // indexed by 0-based token
    std::vector<bool> seen;
    std::size_t pos = 0;
    auto skip = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto fail = [&](const std::string &why) {
      throw std::invalid_argument("tree parse error at offset " + std::to_string(pos) + ": " + why);
    };
    // Iterative descent: a stack of open nodes.
    std::vector<std::size_t> open;
    std::optional<std::size_t> root;
    skip();
    if (pos >= text.size() || text[pos] != '(') fail("expected '('");
    while (true) {
      skip();
      if (pos >= text.size()) fail("unexpected end of input");
      if (text[pos] == '(') {
        ++pos;
        skip();
        std::size_t value = 0, digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
          value = value * 10 + static_cast<std::size_t>(text[pos] - '0');
          ++pos;
          ++digits;
        }
        if (digits == 0 || value == 0) fail("expected a positive token index");
        const std::size_t idx = value - 1;
        if (idx >= kids_of.size()) {
          kids_of.resize(idx + 1);
          seen.resize(idx + 1, false);
        }
        if (seen[idx]) fail("token " + std::to_string(value) + " appears twice (cycle)");
        seen[idx] = true;
        if (open.empty()) {
          if (root) fail("multiple roots");
          root = idx;
        } else {
          kids_of[open.back()].push_back(idx);
        }
        open.push_back(idx);
      } else if (text[pos] == ')') {
        ++pos;
        if (open.empty()) fail("unbalanced ')'");
        open.pop_back();
        if (open.empty()) {
          skip();
          if (pos != text.size()) fail("trailing input after root (multiple roots?)");
          break;
        }
      } else {
        fail(std::string("unexpected character '") + text[pos] + "'");
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw std::invalid_argument("token " + std::to_string(i + 1) + " missing from tree");
    DepTree t;
    t.root = *root;
    t.children = std::move(kids_of);
    t.validate();
    return t;
  }

  /// Chain where token k's only child is token k-1; the root is the last token.
  static DepTree chain(std::size_t n) {
    std::vector<std::size_t> heads(n);
    for (std::size_t i = 0; i < n; ++i) heads[i] = i + 1 == n ? 0 : i + 2;
    return from_heads(heads);
  }

  /// Children-before-parents order; throws when some node is unreachable
  /// from the root or reachable twice.
  std::vector<std::size_t> postorder() const {
    std::vector<std::size_t> order;
    std::vector<int> state(size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto &[node, next] = stack.back();
      if (next < children[node].size()) {
        const std::size_t c = children[node][next++];
        if (c >= size() || state[c] != 0) throw std::invalid_argument("dependency structure is not a tree");
        state[c] = 1;
        stack.push_back({c, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    if (order.size() != size()) throw std::invalid_argument("dependency tree has unreachable nodes (cycle)");
    return order;
  }

  void validate() const {
    if (root >= size()) throw std::invalid_argument("dependency tree root out of range");
    (void)postorder();
  }
};

/// Child-sum tree LSTM over a dependency tree; returns the root hidden state.
/// For node j with children C(j):
///   h~ = sum_k h_k;  i, o, u from (W x_j + U h~ + b);
///   f_jk = sigmoid(W_f x_j + U_f h_k + b_f) for each child;
///   c_j = i*u + sum_k f_jk * c_k;  h_j = o * tanh(c_j).
inline Var tree_lstm_encode(Graph &g, LstmParams &p, const std::vector<Var> &inputs, const DepTree &tree) {
  if (inputs.size() != tree.size())
    throw std::invalid_argument("tree has " + std::to_string(tree.size()) + " nodes but " +
                                std::to_string(inputs.size()) + " tokens were given");
  const std::size_t d = p.memory_dim;
  const auto F = LstmParams::forget_gate;
  Var W = g.param(p.W), U = g.param(p.U), b = g.param(p.b);
  Var U_f = slice(U, 0, F * d, (F + 1) * d);
  Var b_f = slice(b, 0, F * d, (F + 1) * d);
  std::vector<LstmState> state(tree.size());
  for (std::size_t j : tree.postorder()) {
    const auto &kids = tree.children[j];
    Var wx = matvec(W, inputs[j]);
    Var h_sum;
    if (kids.empty()) {
      h_sum = g.constant(Tensor({d}));
    } else {
      h_sum = state[kids[0]].h;
      for (std::size_t k = 1; k < kids.size(); ++k) h_sum = add(h_sum, state[kids[k]].h);
    }
    Var z = add(add(wx, matvec(U, h_sum)), b);
    Var gates = sigmoid(slice(z, 0, 0, 3 * d));
    Var i = slice(gates, 0, 0, d);
    Var o = slice(gates, 0, 2 * d, 3 * d);
    Var u = tanh(slice(z, 0, 3 * d, 4 * d));
    Var c = mul(i, u);
    if (!kids.empty()) {
      Var wx_f = slice(wx, 0, F * d, (F + 1) * d);
      Var carried;
      for (std::size_t k = 0; k < kids.size(); ++k) {
        Var f = sigmoid(add(add(wx_f, matvec(U_f, state[kids[k]].h)), b_f));
        Var term = mul(f, state[kids[k]].c);
        carried = k == 0 ? term : add(carried, term);
      }
      c = add(c, carried);
    }
    state[j] = {mul(o, tanh(c)), c};
  }
  return state[tree.root].h;
}

}  // namespace sentmatch
