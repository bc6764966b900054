#include "meshmamba/flops.hpp"

#include "meshmamba/error.hpp"

namespace meshmamba {

std::vector<FlopPoint> measure_flops(std::shared_ptr<const TriMesh> mesh, const ModelConfig& base,
                                     const std::vector<int>& patches, const std::vector<int>& lengths) {
  std::vector<FlopPoint> out;
  for (int L : patches) {
    for (int M : lengths) {
      ModelConfig config = base;
      config.patches = L;
      config.patch_length = M;
      const MeshInputs inputs = prepare_inputs(mesh, config, config.seed);
      const MeshMambaModel model(config);
      nn::NoGradGuard guard;
      nn::reset_flops();
      model.forward(inputs);
      out.push_back({L, M, nn::flop_count()});
    }
  }
  return out;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::Config, "a line fit needs at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::Config, "a line fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    sse += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace meshmamba
