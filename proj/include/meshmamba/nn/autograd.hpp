#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "meshmamba/nn/matrix.hpp"

namespace meshmamba::nn {

struct Node;

// Handle to a value on the reverse-mode tape. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const;
  Matrix& mutable_value();
  const Matrix& grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
  bool defined() const { return node_ != nullptr; }

  void zero_grad();
  // Seeds d(this)/d(this) = 1 (1x1 values only) and runs the tape backwards.
  void backward();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// gin[i] is null when input i needs no gradient; otherwise accumulate into it.
using BackwardFn = std::function<void(const Node& self, std::span<Matrix* const> gin)>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  const Matrix& input(std::size_t i) const { return inputs[i]->value; }
};

// Builds an op node; the tape edge is recorded only when grad mode is on and
// some input requires a gradient.
Var make_op(const char* name, Matrix value, std::vector<Var> inputs, BackwardFn backward);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Multiply-add counting for forward ops (one FLOP per multiply or add).
void add_flops(std::uint64_t n);
std::uint64_t flop_count();
void reset_flops();

// --- ops -----------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);   // broadcast 1 x C over rows
Var mul_row(const Var& a, const Var& row);   // broadcast 1 x C over rows
Var scale(const Var& a, double s);
Var silu(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);                      // subgradient 0 at 0
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int begin, int end);
Var reverse_rows(const Var& a);
Var gather_rows(const Var& a, std::vector<int> index);
// One output row per segment: mean / max of the listed rows. Max routes the
// gradient to the first row attaining the maximum.
Var segment_mean(const Var& a, std::vector<std::vector<int>> segments);
Var segment_max(const Var& a, std::vector<std::vector<int>> segments);
Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& a);
// (x - mean) / (std + eps) per row, population std.
Var standardize_rows(const Var& a, double eps);
Var softmax_rows(const Var& a);
// mean |pred - target| over all entries, as a 1x1 value.
Var l1_loss(const Var& pred, const Matrix& target);
// sum(a .* weights), as a 1x1 value.
Var weighted_sum(const Var& a, const Matrix& weights);

}  // namespace meshmamba::nn
