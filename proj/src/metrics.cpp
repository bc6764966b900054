#include "meshmamba/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "meshmamba/error.hpp"

namespace meshmamba {

namespace {

void check_lengths(const SaliencyMap& a, const SaliencyMap& b) {
  if (a.face_count() != b.face_count()) {
    throw Error(ErrorKind::LengthMismatch, "saliency maps have " + std::to_string(a.face_count()) + " and " +
                                               std::to_string(b.face_count()) + " faces");
  }
  if (a.face_count() == 0) throw Error(ErrorKind::LengthMismatch, "saliency maps are empty");
}

SaliencyMap as_distribution(const SaliencyMap& m, const char* which) {
  const double total = m.total();
  if (std::abs(total - 1.0) > 1e-9) {
    warn(std::string(which) + " does not sum to 1 (" + std::to_string(total) + "); normalizing");
    return m.normalized();
  }
  return m;
}

}  // namespace

double cc(const SaliencyMap& a, const SaliencyMap& b) {
  check_lengths(a, b);
  const std::size_t n = a.face_count();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.values[i];
    mb += b.values[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.values[i] - ma, db = b.values[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error(ErrorKind::ConstantMap, "constant map");
  return sab / std::sqrt(saa * sbb);
}

double sim(const SaliencyMap& p, const SaliencyMap& q) {
  check_lengths(p, q);
  const SaliencyMap pn = as_distribution(p, "first map");
  const SaliencyMap qn = as_distribution(q, "second map");
  double s = 0.0;
  for (std::size_t i = 0; i < pn.face_count(); ++i) s += std::min(pn.values[i], qn.values[i]);
  return s;
}

double kld(const SaliencyMap& p, const SaliencyMap& q) {
  check_lengths(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.face_count(); ++i) {
    const double pi = p.values[i];
    if (pi <= 0.0) continue;
    s += pi * std::log(pi / (q.values[i] + kKldEps));
  }
  return s;
}

double se(const SaliencyMap& pred, const SaliencyMap& gt) {
  check_lengths(pred, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.face_count(); ++i) {
    const double d = pred.values[i] - gt.values[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.face_count());
}

MetricRow evaluate(const SaliencyMap& pred, const SaliencyMap& gt) {
  check_lengths(pred, gt);
  MetricRow row;
  try {
    row.cc = cc(pred, gt);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConstantMap) throw;
    warn("CC undefined for a constant map");
    row.cc = std::numeric_limits<double>::quiet_NaN();
  }
  const SaliencyMap p = gt.normalized();
  const SaliencyMap q = pred.normalized();
  row.sim = sim(q, p);
  row.kld = kld(p, q);
  row.se = se(pred.max_normalized(), gt.max_normalized());
  return row;
}

}  // namespace meshmamba
