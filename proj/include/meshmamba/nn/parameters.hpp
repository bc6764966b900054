#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "meshmamba/nn/autograd.hpp"

namespace meshmamba::nn {

struct Parameter {
  std::string name;
  Var var;
};

// Ordered, named leaf variables that require gradients.
class ParameterSet {
 public:
  Var add(std::string name, Matrix init);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  const Parameter* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Adaptive moments with decoupled weight decay:
// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(ParameterSet& params, double lr);
  long steps() const { return steps_; }

 private:
  AdamWConfig config_;
  long steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace meshmamba::nn
