#include "meshmamba/ssm.hpp"

#include <algorithm>
#include <cmath>

#include "meshmamba/error.hpp"
#include "meshmamba/graph_conv.hpp"

namespace meshmamba {

namespace {

constexpr int kChannelBlock = 8;

void check_sizes(const ScanShape& s, std::size_t x, std::size_t delta, std::size_t a, std::size_t b,
                 std::size_t c, std::size_t y) {
  const std::size_t ld = static_cast<std::size_t>(s.length) * s.channels;
  const std::size_t ln = static_cast<std::size_t>(s.length) * s.state;
  if (x != ld || delta != ld || a != static_cast<std::size_t>(s.channels) * s.state || b != ln || c != ln ||
      y != ld) {
    throw Error(ErrorKind::Config, "selective scan buffer sizes do not match the shape");
  }
}

}  // namespace

void scan_discretized(const ScanShape& shape, std::span<const double> abar, std::span<const double> bx,
                      std::span<const double> c, std::span<double> y) {
  const int L = shape.length, D = shape.channels, N = shape.state;
  std::vector<double> h(static_cast<std::size_t>(D) * N, 0.0);
  for (int t = 0; t < L; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * D * N;
    for (int d = 0; d < D; ++d) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const std::size_t k = static_cast<std::size_t>(d) * N + n;
        h[k] = abar[base + k] * h[k] + bx[base + k];
        acc += c[static_cast<std::size_t>(t) * N + n] * h[k];
      }
      y[static_cast<std::size_t>(t) * D + d] = acc;
    }
  }
}

void selective_scan_kernel(const ScanShape& shape, std::span<const double> x, std::span<const double> delta,
                           std::span<const double> a, std::span<const double> b, std::span<const double> c,
                           std::span<double> y, std::span<double> states) {
  check_sizes(shape, x.size(), delta.size(), a.size(), b.size(), c.size(), y.size());
  const int L = shape.length, D = shape.channels, N = shape.state;
  std::vector<double> h(static_cast<std::size_t>(kChannelBlock) * N);
  for (int d0 = 0; d0 < D; d0 += kChannelBlock) {
    const int d1 = std::min(D, d0 + kChannelBlock);
    std::fill(h.begin(), h.end(), 0.0);
    for (int t = 0; t < L; ++t) {
      const double* bt = b.data() + static_cast<std::size_t>(t) * N;
      const double* ct = c.data() + static_cast<std::size_t>(t) * N;
      for (int d = d0; d < d1; ++d) {
        const double dt = delta[static_cast<std::size_t>(t) * D + d];
        const double xt = x[static_cast<std::size_t>(t) * D + d];
        const double* ad = a.data() + static_cast<std::size_t>(d) * N;
        double* hd = h.data() + static_cast<std::size_t>(d - d0) * N;
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
          const double abar = std::exp(dt * ad[n]);
          const double bbar = (abar - 1.0) / ad[n] * bt[n];
          hd[n] = abar * hd[n] + bbar * xt;
          acc += ct[n] * hd[n];
        }
        y[static_cast<std::size_t>(t) * D + d] = acc;
        if (!states.empty()) {
          std::copy_n(hd, N, states.data() + (static_cast<std::size_t>(t) * D + d) * N);
        }
      }
    }
  }
}

nn::Var selective_scan(const nn::Var& x, const nn::Var& delta, const nn::Var& a_log, const nn::Var& b,
                       const nn::Var& c) {
  const ScanShape shape{x.rows(), x.cols(), a_log.cols()};
  if (a_log.rows() != shape.channels || delta.rows() != shape.length || delta.cols() != shape.channels ||
      b.rows() != shape.length || c.rows() != shape.length || b.cols() != shape.state || c.cols() != shape.state) {
    throw Error(ErrorKind::Config, "selective scan operand shapes do not agree");
  }
  const int L = shape.length, D = shape.channels, N = shape.state;
  std::vector<double> a(static_cast<std::size_t>(D) * N);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = -std::exp(a_log.value().data[k]);
  nn::Matrix y(L, D);
  const bool keep = nn::grad_enabled();
  std::vector<double> states(keep ? static_cast<std::size_t>(L) * D * N : 0);
  selective_scan_kernel(shape, x.value().data, delta.value().data, a, b.value().data, c.value().data, y.data,
                        states);
  for (int t = 0; t < L; ++t) {
    for (int d = 0; d < D; ++d) {
      if (!std::isfinite(y(t, d))) {
        throw Error(ErrorKind::Numeric, "non-finite selective scan output at step " + std::to_string(t));
      }
    }
  }
  nn::add_flops(10ULL * L * D * N);

  return nn::make_op(
      "selective_scan", std::move(y), {x, delta, a_log, b, c},
      [shape, a = std::move(a), states = std::move(states)](const nn::Node& self,
                                                             std::span<nn::Matrix* const> gin) {
        const int L = shape.length, D = shape.channels, N = shape.state;
        const nn::Matrix& X = self.input(0);
        const nn::Matrix& Dt = self.input(1);
        const nn::Matrix& B = self.input(3);
        const nn::Matrix& C = self.input(4);
        const nn::Matrix& G = self.grad;
        nn::Matrix dx(L, D), ddelta(L, D), db(L, N), dc(L, N);
        std::vector<double> da(static_cast<std::size_t>(D) * N, 0.0);
        std::vector<double> carry(static_cast<std::size_t>(D) * N, 0.0);
        for (int t = L - 1; t >= 0; --t) {
          for (int d = 0; d < D; ++d) {
            const double gy = G(t, d);
            const double dt = Dt(t, d);
            const double xt = X(t, d);
            const double* h = states.data() + (static_cast<std::size_t>(t) * D + d) * N;
            const double* hprev = t > 0 ? states.data() + (static_cast<std::size_t>(t - 1) * D + d) * N : nullptr;
            for (int n = 0; n < N; ++n) {
              const std::size_t k = static_cast<std::size_t>(d) * N + n;
              const double an = a[k];
              const double dh = carry[k] + gy * C(t, n);
              dc(t, n) += gy * h[n];
              const double abar = std::exp(dt * an);
              const double g = (abar - 1.0) / an;
              const double hp = hprev ? hprev[n] : 0.0;
              const double d_abar = dh * hp;
              const double d_bbar = dh * xt;
              dx(t, d) += dh * g * B(t, n);
              db(t, n) += d_bbar * g;
              const double dg = d_bbar * B(t, n);
              ddelta(t, d) += d_abar * abar * an + dg * abar;
              da[k] += d_abar * abar * dt + dg * (dt * abar * an - (abar - 1.0)) / (an * an);
              carry[k] = dh * abar;
            }
          }
        }
        auto acc = [](nn::Matrix* dst, const nn::Matrix& src) {
          if (!dst) return;
          for (std::size_t i = 0; i < src.size(); ++i) dst->data[i] += src.data[i];
        };
        acc(gin[0], dx);
        acc(gin[1], ddelta);
        if (gin[2]) {
          // A = -exp(a_log), so dA/da_log = A.
          for (std::size_t k = 0; k < da.size(); ++k) gin[2]->data[k] += da[k] * a[k];
        }
        acc(gin[3], db);
        acc(gin[4], dc);
      });
}

SsmParams SsmParams::create(nn::ParameterSet& params, const std::string& prefix, const SsmConfig& config,
                            Rng& rng) {
  const int D = config.token_dim;
  const int N = config.state_dim;
  if (D < 1 || N < 1) throw Error(ErrorKind::Config, "SSM dimensions must be positive");
  SsmParams p;
  nn::Matrix w_delta = glorot(D, D, rng);
  for (double& v : w_delta.data) v *= 0.1;
  p.w_delta = params.add(prefix + ".w_delta", w_delta);
  // Step sizes start log-uniform in [1e-3, 1e-1]; bias = softplus^-1(dt).
  nn::Matrix b_delta(1, D);
  for (double& v : b_delta.data) {
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    v = dt + std::log(-std::expm1(-dt));
  }
  p.b_delta = params.add(prefix + ".b_delta", b_delta);
  nn::Matrix a_log(D, N);
  for (int d = 0; d < D; ++d) {
    for (int n = 0; n < N; ++n) a_log(d, n) = std::log(static_cast<double>(n + 1));
  }
  p.a_log = params.add(prefix + ".a_log", a_log);
  p.w_b = params.add(prefix + ".w_b", glorot(D, N, rng));
  p.w_c = params.add(prefix + ".w_c", glorot(D, N, rng));
  p.w_out = params.add(prefix + ".w_out", glorot(D, D, rng));
  return p;
}

nn::Var ssm_forward(const SsmParams& params, const nn::Var& u) {
  const nn::Var delta = nn::softplus(nn::add_row(nn::matmul(u, params.w_delta), params.b_delta));
  const nn::Var b = nn::matmul(u, params.w_b);
  const nn::Var c = nn::matmul(u, params.w_c);
  return nn::matmul(selective_scan(u, delta, params.a_log, b, c), params.w_out);
}

nn::Var ssm_reverse(const SsmParams& params, const nn::Var& u) {
  return nn::reverse_rows(ssm_forward(params, nn::reverse_rows(u)));
}

nn::Var feature_diffuse_aggregate(const nn::Var& tokens, const DiffusionParams& params, Rng* jitter_rng) {
  const int l = params.pseudo_neighbors;
  if (l < 0) throw Error(ErrorKind::Config, "pseudo-neighbor count must be nonnegative");
  if (params.w_reproject.rows() != tokens.cols()) {
    throw Error(ErrorKind::Config, "diffusion re-projection does not match the token width");
  }
  nn::Var sum = nn::softmax_rows(tokens);
  if (l > 0) {
    const nn::Var normalized = nn::standardize_rows(tokens, kNormEps);
    if (params.jitter > 0.0 && jitter_rng) {
      for (int k = 0; k < l; ++k) {
        nn::Matrix noise(tokens.rows(), tokens.cols());
        for (double& v : noise.data) v = params.jitter * jitter_rng->normal();
        sum = nn::add(sum, nn::softmax_rows(nn::add(normalized, nn::Var(std::move(noise)))));
      }
    } else {
      sum = nn::add(sum, nn::scale(nn::softmax_rows(normalized), static_cast<double>(l)));
    }
  }
  const nn::Var mean = nn::scale(sum, 1.0 / static_cast<double>(l + 1));
  return nn::add_row(nn::matmul(mean, params.w_reproject), params.b_reproject);
}

MambaBlockParams MambaBlockParams::create(nn::ParameterSet& params, const std::string& prefix,
                                          const MambaBlockConfig& config, Rng& rng) {
  MambaBlockParams block;
  block.config = config;
  const int D = config.ssm.token_dim;
  block.norm_gain = params.add(prefix + ".norm.gain", nn::Matrix(1, D, 1.0));
  block.norm_bias = params.add(prefix + ".norm.bias", nn::Matrix(1, D, 0.0));
  block.diffusion.pseudo_neighbors = config.pseudo_neighbors;
  block.diffusion.jitter = config.jitter;
  if (config.use_diffusion) {
    block.diffusion.w_reproject = params.add(prefix + ".diffusion.w", glorot(D, D, rng));
    block.diffusion.b_reproject = params.add(prefix + ".diffusion.b", nn::Matrix(1, D));
  }
  if (config.use_forward) block.forward = SsmParams::create(params, prefix + ".ssm_fwd", config.ssm, rng);
  if (config.use_backward) block.backward = SsmParams::create(params, prefix + ".ssm_bwd", config.ssm, rng);
  return block;
}

nn::Var pre_transform(const nn::Var& z, const MambaBlockParams& block, Rng* jitter_rng) {
  const nn::Var n =
      nn::add_row(nn::mul_row(nn::standardize_rows(z, kNormEps), block.norm_gain), block.norm_bias);
  if (!block.config.use_diffusion) return n;
  return nn::add(n, feature_diffuse_aggregate(n, block.diffusion, jitter_rng));
}

nn::Var mamba_block(const nn::Var& z, const MambaBlockParams& block, Rng* jitter_rng) {
  const nn::Var u = pre_transform(z, block, jitter_rng);
  nn::Var out = u;
  if (block.config.use_forward) out = nn::add(out, ssm_forward(block.forward, u));
  if (block.config.use_backward) out = nn::add(out, ssm_reverse(block.backward, u));
  return out;
}

nn::Var stack_forward(const nn::Var& z0, const std::vector<MambaBlockParams>& blocks, Rng* jitter_rng) {
  if (blocks.empty()) throw Error(ErrorKind::Config, "at least one Mamba block is required");
  nn::Var z = z0;
  for (const MambaBlockParams& block : blocks) z = mamba_block(z, block, jitter_rng);
  return z;
}

}  // namespace meshmamba
