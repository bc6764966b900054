#include "meshmamba/nn/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "meshmamba/error.hpp"

namespace meshmamba::nn {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_flops{0};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, what);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

void accumulate(Matrix* g, const Matrix& delta) {
  for (std::size_t i = 0; i < g->data.size(); ++i) g->data[i] += delta.data[i];
}

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Matrix& Var::value() const { return node_->value; }
Matrix& Var::mutable_value() { return node_->value; }
const Matrix& Var::grad() const { return node_->grad; }
bool Var::has_grad() const { return !node_->grad.data.empty(); }
bool Var::requires_grad() const { return node_->requires_grad; }

void Var::zero_grad() {
  node_->grad = Matrix(node_->value.rows, node_->value.cols, 0.0);
}

void Var::backward() {
  require(node_ && node_->value.size() == 1, "backward() needs a scalar (1x1) value");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad = Matrix(1, 1, 1.0);
  std::vector<Matrix*> gin;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward || n->grad.data.empty()) continue;
    gin.assign(n->inputs.size(), nullptr);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      Node* in = n->inputs[i].get();
      if (!in->requires_grad) continue;
      if (in->grad.data.empty()) in->grad = Matrix(in->value.rows, in->value.cols, 0.0);
      gin[i] = &in->grad;
    }
    n->backward(*n, gin);
  }
  // Drop interior edges so the tape can be freed.
  for (Node* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->inputs.clear();
    }
  }
}

Var make_op(const char* name, Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = name;
  bool needs = false;
  if (t_grad_enabled) {
    for (const Var& v : inputs) needs = needs || v.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Var& v : inputs) node->inputs.push_back(v.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void add_flops(std::uint64_t n) { g_flops.fetch_add(n, std::memory_order_relaxed); }
std::uint64_t flop_count() { return g_flops.load(); }
void reset_flops() { g_flops.store(0); }

Var matmul(const Var& a, const Var& b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  require(A.cols == B.rows, "matmul shape mismatch: " + std::to_string(A.rows) + "x" + std::to_string(A.cols) +
                                " * " + std::to_string(B.rows) + "x" + std::to_string(B.cols));
  Matrix out(A.rows, B.cols);
  out.eigen().noalias() = A.eigen() * B.eigen();
  add_flops(2ULL * A.rows * A.cols * B.cols);
  return make_op("matmul", std::move(out), {a, b}, [](const Node& self, std::span<Matrix* const> gin) {
    const auto G = self.grad.eigen();
    if (gin[0]) gin[0]->eigen().noalias() += G * self.input(1).eigen().transpose();
    if (gin[1]) gin[1]->eigen().noalias() += self.input(0).eigen().transpose() * G;
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "add shape mismatch");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  add_flops(out.size());
  return make_op("add", std::move(out), {a, b}, [](const Node& self, std::span<Matrix* const> gin) {
    for (Matrix* g : gin) {
      if (g) accumulate(g, self.grad);
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  const Matrix& A = a.value();
  require(row.rows() == 1 && row.cols() == A.cols, "add_row expects a 1 x cols row");
  Matrix out = A;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out(r, c) += row.value().data[c];
  }
  add_flops(out.size());
  return make_op("add_row", std::move(out), {a, row}, [](const Node& self, std::span<Matrix* const> gin) {
    if (gin[0]) accumulate(gin[0], self.grad);
    if (gin[1]) {
      for (int r = 0; r < self.grad.rows; ++r) {
        for (int c = 0; c < self.grad.cols; ++c) gin[1]->data[c] += self.grad(r, c);
      }
    }
  });
}

Var mul_row(const Var& a, const Var& row) {
  const Matrix& A = a.value();
  require(row.rows() == 1 && row.cols() == A.cols, "mul_row expects a 1 x cols row");
  Matrix out = A;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out(r, c) *= row.value().data[c];
  }
  add_flops(out.size());
  return make_op("mul_row", std::move(out), {a, row}, [](const Node& self, std::span<Matrix* const> gin) {
    const Matrix& x = self.input(0);
    const Matrix& g = self.input(1);
    for (int r = 0; r < self.grad.rows; ++r) {
      for (int c = 0; c < self.grad.cols; ++c) {
        if (gin[0]) (*gin[0])(r, c) += self.grad(r, c) * g.data[c];
        if (gin[1]) gin[1]->data[c] += self.grad(r, c) * x(r, c);
      }
    }
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  add_flops(out.size());
  return make_op("scale", std::move(out), {a}, [s](const Node& self, std::span<Matrix* const> gin) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) gin[0]->data[i] += s * self.grad.data[i];
  });
}

Var silu(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = v * sigmoid(v);
  add_flops(4 * out.size());
  return make_op("silu", std::move(out), {a}, [](const Node& self, std::span<Matrix* const> gin) {
    const Matrix& x = self.input(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = sigmoid(x.data[i]);
      gin[0]->data[i] += self.grad.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
    }
  });
}

Var softplus(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = softplus_scalar(v);
  add_flops(3 * out.size());
  return make_op("softplus", std::move(out), {a}, [](const Node& self, std::span<Matrix* const> gin) {
    const Matrix& x = self.input(0);
    for (std::size_t i = 0; i < x.size(); ++i) gin[0]->data[i] += self.grad.data[i] * sigmoid(x.data[i]);
  });
}

Var relu(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  add_flops(out.size());
  return make_op("relu", std::move(out), {a}, [](const Node& self, std::span<Matrix* const> gin) {
    const Matrix& x = self.input(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.data[i] > 0.0) gin[0]->data[i] += self.grad.data[i];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  int offset = 0;
  for (const Var& p : parts) {
    for (int r = 0; r < rows; ++r) std::copy_n(p.value().row(r), p.cols(), out.row(r) + offset);
    offset += p.cols();
  }
  return make_op("concat_cols", std::move(out), parts, [](const Node& self, std::span<Matrix* const> gin) {
    int off = 0;
    for (std::size_t i = 0; i < gin.size(); ++i) {
      const int w = self.input(i).cols;
      if (gin[i]) {
        for (int r = 0; r < self.grad.rows; ++r) {
          for (int c = 0; c < w; ++c) (*gin[i])(r, c) += self.grad(r, off + c);
        }
      }
      off += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows needs at least one part");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + offset);
    offset += p.value().size();
  }
  return make_op("concat_rows", std::move(out), parts, [](const Node& self, std::span<Matrix* const> gin) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < gin.size(); ++i) {
      const std::size_t n = self.input(i).size();
      if (gin[i]) {
        for (std::size_t k = 0; k < n; ++k) gin[i]->data[k] += self.grad.data[off + k];
      }
      off += n;
    }
  });
}

Var slice_rows(const Var& a, int begin, int end) {
  require(0 <= begin && begin <= end && end <= a.rows(), "slice_rows range out of bounds");
  const int cols = a.cols();
  Matrix out(end - begin, cols);
  std::copy(a.value().row(begin), a.value().row(begin) + static_cast<std::size_t>(end - begin) * cols,
            out.data.begin());
  return make_op("slice_rows", std::move(out), {a}, [begin](const Node& self, std::span<Matrix* const> gin) {
    double* dst = gin[0]->row(begin);
    for (std::size_t k = 0; k < self.grad.size(); ++k) dst[k] += self.grad.data[k];
  });
}

Var reverse_rows(const Var& a) {
  const Matrix& A = a.value();
  Matrix out(A.rows, A.cols);
  for (int r = 0; r < A.rows; ++r) std::copy_n(A.row(A.rows - 1 - r), A.cols, out.row(r));
  return make_op("reverse_rows", std::move(out), {a}, [](const Node& self, std::span<Matrix* const> gin) {
    const int n = self.grad.rows;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < self.grad.cols; ++c) (*gin[0])(n - 1 - r, c) += self.grad(r, c);
    }
  });
}

Var gather_rows(const Var& a, std::vector<int> index) {
  const Matrix& A = a.value();
  Matrix out(static_cast<int>(index.size()), A.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < A.rows, "gather_rows index out of range");
    std::copy_n(A.row(index[i]), A.cols, out.row(static_cast<int>(i)));
  }
  return make_op("gather_rows", std::move(out), {a},
                 [index = std::move(index)](const Node& self, std::span<Matrix* const> gin) {
                   for (std::size_t i = 0; i < index.size(); ++i) {
                     double* dst = gin[0]->row(index[i]);
                     const double* src = self.grad.row(static_cast<int>(i));
                     for (int c = 0; c < self.grad.cols; ++c) dst[c] += src[c];
                   }
                 });
}

Var segment_mean(const Var& a, std::vector<std::vector<int>> segments) {
  const Matrix& A = a.value();
  Matrix out(static_cast<int>(segments.size()), A.cols);
  std::size_t work = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    require(!segments[s].empty(), "segment_mean with an empty segment");
    double* dst = out.row(static_cast<int>(s));
    for (int r : segments[s]) {
      for (int c = 0; c < A.cols; ++c) dst[c] += A(r, c);
    }
    const double inv = 1.0 / static_cast<double>(segments[s].size());
    for (int c = 0; c < A.cols; ++c) dst[c] *= inv;
    work += (segments[s].size() + 1) * A.cols;
  }
  add_flops(work);
  return make_op("segment_mean", std::move(out), {a},
                 [segments = std::move(segments)](const Node& self, std::span<Matrix* const> gin) {
                   for (std::size_t s = 0; s < segments.size(); ++s) {
                     const double inv = 1.0 / static_cast<double>(segments[s].size());
                     const double* g = self.grad.row(static_cast<int>(s));
                     for (int r : segments[s]) {
                       double* dst = gin[0]->row(r);
                       for (int c = 0; c < self.grad.cols; ++c) dst[c] += g[c] * inv;
                     }
                   }
                 });
}

Var segment_max(const Var& a, std::vector<std::vector<int>> segments) {
  const Matrix& A = a.value();
  const int cols = A.cols;
  Matrix out(static_cast<int>(segments.size()), cols);
  std::vector<int> argmax(segments.size() * cols);
  std::size_t work = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    require(!segments[s].empty(), "segment_max with an empty segment");
    for (int c = 0; c < cols; ++c) {
      int best = segments[s][0];
      for (int r : segments[s]) {
        if (A(r, c) > A(best, c)) best = r;
      }
      out(static_cast<int>(s), c) = A(best, c);
      argmax[s * cols + c] = best;
    }
    work += segments[s].size() * cols;
  }
  add_flops(work);
  return make_op("segment_max", std::move(out), {a},
                 [argmax = std::move(argmax)](const Node& self, std::span<Matrix* const> gin) {
                   const int cols = self.grad.cols;
                   for (int s = 0; s < self.grad.rows; ++s) {
                     for (int c = 0; c < cols; ++c) {
                       (*gin[0])(argmax[static_cast<std::size_t>(s) * cols + c], c) += self.grad(s, c);
                     }
                   }
                 });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& a) {
  const Matrix& A = a.value();
  require(s->cols == A.rows, "spmm shape mismatch");
  Matrix out(s->rows, A.cols);
  for (int r = 0; r < s->rows; ++r) {
    double* dst = out.row(r);
    for (int k = s->row_ptr[r]; k < s->row_ptr[r + 1]; ++k) {
      const double w = s->values[k];
      const double* src = A.row(s->col_index[k]);
      for (int c = 0; c < A.cols; ++c) dst[c] += w * src[c];
    }
  }
  add_flops(2ULL * s->nonzeros() * A.cols);
  return make_op("spmm", std::move(out), {a}, [s](const Node& self, std::span<Matrix* const> gin) {
    const int cols = self.grad.cols;
    for (int r = 0; r < s->rows; ++r) {
      const double* g = self.grad.row(r);
      for (int k = s->row_ptr[r]; k < s->row_ptr[r + 1]; ++k) {
        const double w = s->values[k];
        double* dst = gin[0]->row(s->col_index[k]);
        for (int c = 0; c < cols; ++c) dst[c] += w * g[c];
      }
    }
  });
}

Var standardize_rows(const Var& a, double eps) {
  const Matrix& A = a.value();
  const int n = A.cols;
  Matrix out(A.rows, n);
  std::vector<double> sigma(A.rows);
  for (int r = 0; r < A.rows; ++r) {
    const double* x = A.row(r);
    double mean = 0.0;
    for (int c = 0; c < n; ++c) mean += x[c];
    mean /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) var += (x[c] - mean) * (x[c] - mean);
    sigma[r] = std::sqrt(var / n);
    const double inv = 1.0 / (sigma[r] + eps);
    for (int c = 0; c < n; ++c) out(r, c) = (x[c] - mean) * inv;
  }
  add_flops(5ULL * A.size());
  return make_op("standardize_rows", std::move(out), {a},
                 [sigma = std::move(sigma), eps](const Node& self, std::span<Matrix* const> gin) {
                   const Matrix& y = self.value;
                   const int n = y.cols;
                   for (int r = 0; r < y.rows; ++r) {
                     // y = (x - mu) * k with k = 1 / (sigma + eps).
                     const double k = 1.0 / (sigma[r] + eps);
                     const double* g = self.grad.row(r);
                     const double* yr = y.row(r);
                     double g_mean = 0.0;
                     double gy = 0.0;
                     for (int c = 0; c < n; ++c) {
                       g_mean += g[c];
                       gy += g[c] * yr[c];
                     }
                     g_mean /= n;
                     // d sigma / d x_c = y_c / (n k sigma), which folds to y_c * gy / (n sigma).
                     const double coupling = sigma[r] > 0.0 ? gy / (n * sigma[r]) : 0.0;
                     double* dst = gin[0]->row(r);
                     for (int c = 0; c < n; ++c) dst[c] += k * (g[c] - g_mean) - coupling * yr[c];
                   }
                 });
}

Var softmax_rows(const Var& a) {
  const Matrix& A = a.value();
  Matrix out(A.rows, A.cols);
  for (int r = 0; r < A.rows; ++r) {
    const double* x = A.row(r);
    const double m = *std::max_element(x, x + A.cols);
    double sum = 0.0;
    for (int c = 0; c < A.cols; ++c) sum += out(r, c) = std::exp(x[c] - m);
    for (int c = 0; c < A.cols; ++c) out(r, c) /= sum;
  }
  add_flops(4ULL * A.size());
  return make_op("softmax_rows", std::move(out), {a}, [](const Node& self, std::span<Matrix* const> gin) {
    const Matrix& y = self.value;
    for (int r = 0; r < y.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += self.grad(r, c) * y(r, c);
      for (int c = 0; c < y.cols; ++c) (*gin[0])(r, c) += y(r, c) * (self.grad(r, c) - dot);
    }
  });
}

Var l1_loss(const Var& pred, const Matrix& target) {
  require(pred.value().same_shape(target), "l1_loss shape mismatch");
  const std::size_t n = target.size();
  require(n > 0, "l1_loss on empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(pred.value().data[i] - target.data[i]);
  add_flops(3 * n);
  return make_op("l1_loss", Matrix(1, 1, sum / static_cast<double>(n)), {pred},
                 [target](const Node& self, std::span<Matrix* const> gin) {
                   const Matrix& p = self.input(0);
                   const double scale = self.grad.data[0] / static_cast<double>(p.size());
                   for (std::size_t i = 0; i < p.size(); ++i) {
                     const double d = p.data[i] - target.data[i];
                     gin[0]->data[i] += d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
                   }
                 });
}

Var weighted_sum(const Var& a, const Matrix& weights) {
  require(a.value().same_shape(weights), "weighted_sum shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) sum += a.value().data[i] * weights.data[i];
  add_flops(2 * weights.size());
  return make_op("weighted_sum", Matrix(1, 1, sum), {a}, [weights](const Node& self, std::span<Matrix* const> gin) {
    for (std::size_t i = 0; i < weights.size(); ++i) gin[0]->data[i] += self.grad.data[0] * weights.data[i];
  });
}

}  // namespace meshmamba::nn
