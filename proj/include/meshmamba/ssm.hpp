#pragma once

#include <span>
#include <string>
#include <vector>

#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

struct ScanShape {
  int length = 0;    // tokens
  int channels = 0;  // D
  int state = 0;     // N, per channel (diagonal A)
};

// Discretized recurrence with explicit per-step transition and input terms:
//   h_t[d,n] = abar_t[d,n] * h_{t-1}[d,n] + bx_t[d,n],  h_0 = 0
//   y_t[d]   = sum_n c_t[n] * h_t[d,n]
// abar and bx are (L, D, N) row-major, c is (L, N), y is (L, D).
void scan_discretized(const ScanShape& shape, std::span<const double> abar, std::span<const double> bx,
                      std::span<const double> c, std::span<double> y);

// Selective scan with zero-order-hold discretization of a diagonal A < 0:
//   abar = exp(delta * A),  bbar = (abar - 1) / A * B_t,  bx = bbar * x_t[d].
// x, delta are (L, D); a is (D, N); b, c are (L, N). Channels are processed
// in blocks so each block's state stays resident across the sequence.
// `states`, when non-empty, receives h_t as (L, D, N).
void selective_scan_kernel(const ScanShape& shape, std::span<const double> x, std::span<const double> delta,
                           std::span<const double> a, std::span<const double> b, std::span<const double> c,
                           std::span<double> y, std::span<double> states = {});

// Tape op over selective_scan_kernel; A = -exp(a_log). Throws
// ErrorKind::Numeric naming the step when a value turns non-finite.
nn::Var selective_scan(const nn::Var& x, const nn::Var& delta, const nn::Var& a_log, const nn::Var& b,
                       const nn::Var& c);

struct SsmConfig {
  int token_dim = 192;
  int state_dim = 16;
};

// Input-dependent projections of one scan direction:
//   delta(x) = softplus(x W_delta + b_delta),  B(x) = x W_B,  C(x) = x W_C,
// followed by the output projection W_out.
struct SsmParams {
  nn::Var w_delta;  // D x D
  nn::Var b_delta;  // 1 x D
  nn::Var a_log;    // D x N
  nn::Var w_b;      // D x N
  nn::Var w_c;      // D x N
  nn::Var w_out;    // D x D

  static SsmParams create(nn::ParameterSet& params, const std::string& prefix, const SsmConfig& config, Rng& rng);
};

nn::Var ssm_forward(const SsmParams& params, const nn::Var& u);
// reverse(ssm_forward(params, reverse(u)))
nn::Var ssm_reverse(const SsmParams& params, const nn::Var& u);

struct DiffusionParams {
  int pseudo_neighbors = 2;  // l
  double jitter = 0.0;       // Gaussian noise on the pseudo-neighbors; 0 = shared copies
  nn::Var w_reproject;       // D x D
  nn::Var b_reproject;       // 1 x D
};

// Per token: l copies normalized by (x - mean) / (std + eps), softmax over the
// components of the token and of every copy, average of the l + 1 results,
// then the linear re-projection.
nn::Var feature_diffuse_aggregate(const nn::Var& tokens, const DiffusionParams& params, Rng* jitter_rng = nullptr);

inline constexpr double kNormEps = 1e-5;

struct MambaBlockConfig {
  SsmConfig ssm;
  int pseudo_neighbors = 2;
  double jitter = 0.0;
  bool use_diffusion = true;
  bool use_forward = true;
  bool use_backward = true;
};

struct MambaBlockParams {
  MambaBlockConfig config;
  SsmParams forward;
  SsmParams backward;
  DiffusionParams diffusion;
  nn::Var norm_gain;  // 1 x D
  nn::Var norm_bias;  // 1 x D

  static MambaBlockParams create(nn::ParameterSet& params, const std::string& prefix,
                                 const MambaBlockConfig& config, Rng& rng);
};

// f(z) = n + DA(n), n = gain * standardize(z) + bias; DA dropped when
// diffusion is disabled.
nn::Var pre_transform(const nn::Var& z, const MambaBlockParams& block, Rng* jitter_rng = nullptr);

// z_t = SSM+(u) + SSM-(u) + u with u = f(z_{t-1}).
nn::Var mamba_block(const nn::Var& z, const MambaBlockParams& block, Rng* jitter_rng = nullptr);

nn::Var stack_forward(const nn::Var& z0, const std::vector<MambaBlockParams>& blocks, Rng* jitter_rng = nullptr);

}  // namespace meshmamba
