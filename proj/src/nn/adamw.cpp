#include <cmath>

#include "meshmamba/error.hpp"
#include "meshmamba/nn/parameters.hpp"

namespace meshmamba::nn {

Var ParameterSet::add(std::string name, Matrix init) {
  if (find(name)) throw Error(ErrorKind::Config, "duplicate parameter " + name);
  Var v(std::move(init), true);
  params_.push_back({std::move(name), v});
  return v;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.var.zero_grad();
}

void AdamW::step(ParameterSet& params, double lr) {
  auto& all = params.all();
  if (m_.size() != all.size()) {
    m_.clear();
    v_.clear();
    for (const Parameter& p : all) {
      m_.emplace_back(p.var.rows(), p.var.cols());
      v_.emplace_back(p.var.rows(), p.var.cols());
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    Matrix& theta = all[i].var.mutable_value();
    const bool has_grad = all[i].var.has_grad();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double g = has_grad ? all[i].var.grad().data[k] : 0.0;
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::Numeric, "non-finite gradient in parameter " + all[i].name);
      }
      double& m = m_[i].data[k];
      double& v = v_[i].data[k];
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      v = config_.beta2 * v + (1.0 - config_.beta2) * g * g;
      const double update = (m / c1) / (std::sqrt(v / c2) + config_.eps);
      theta.data[k] -= lr * (update + config_.weight_decay * theta.data[k]);
    }
  }
}

}  // namespace meshmamba::nn
