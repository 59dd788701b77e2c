#include "surfreg/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace surfreg {

namespace {
constexpr double kBiasGuard = 1e-8;
constexpr double kCoincident = 1e-15;

double sgn_plus(double x) { return x < 0.0 ? -1.0 : 1.0; }

double bias_denominator_value(const std::vector<Vec3>& specular, BiasDenominator mode) {
  if (mode == BiasDenominator::per_channel_max) {
    Vec3 cmax = Vec3::Zero();
    for (const Vec3& c : specular) cmax = cmax.cwiseMax(c);
    return cmax.norm();
  }
  double m = 0.0;
  for (const Vec3& c : specular) m = std::max(m, c.norm());
  return m;
}
}  // namespace

std::pair<Vec3, std::vector<Vec3>> build_directional_batch(const SurfaceCandidate& cand,
                                                           const SampleSphere& sphere) {
  std::vector<Vec3> dirs;
  dirs.reserve(sphere.directions.size());
  for (const Vec3& ds : sphere.directions)
    dirs.push_back(sgn_plus(ds.dot(cand.n_star)) * ds);
  return {cand.x_star, std::move(dirs)};
}

std::pair<std::vector<Vec3>, std::vector<Vec3>> build_spatial_batch(
    const SurfaceCandidate& cand, const SampleSphere& sphere) {
  const double scale = cand.sigma_r_star * kSqrt2Ln2;
  std::vector<Vec3> points;
  points.reserve(sphere.directions.size());
  for (int j = 0; j < sphere.size(); ++j) points.push_back(cand.x_star + scale * sphere.ball_point(j));
  return {std::move(points), sphere.directions};
}

RegBatch make_reg_batch(const SurfaceCandidate& cand, const SampleSphere& sphere) {
  RegBatch batch;
  auto [points, dirs] = build_spatial_batch(cand, sphere);
  batch.spatial_points = std::move(points);
  batch.spatial_dirs = std::move(dirs);
  auto [x_phi, d_phi] = build_directional_batch(cand, sphere);
  batch.directional_point = x_phi;
  batch.directional_dirs = std::move(d_phi);
  const std::size_t n = batch.spatial_points.size();
  batch.spatial_tau.assign(n, 0.0);
  batch.spatial_normals.assign(n, Vec3::Zero());
  batch.spatial_normal_ok.assign(n, 0);
  batch.directional_specular.assign(batch.directional_dirs.size(), Vec3::Zero());
  return batch;
}

void populate_reg_batch(RegBatch& batch, const RadianceField& field) {
  for (std::size_t j = 0; j < batch.spatial_points.size(); ++j) {
    FieldQuery q;
    q.position = batch.spatial_points[j];
    q.direction = batch.spatial_dirs[j];
    const FieldOutput out = field.query(q);
    batch.spatial_tau[j] = out.tau;
    batch.spatial_normals[j] = out.normal;
    batch.spatial_normal_ok[j] = out.degenerate_normal ? 0 : 1;
  }
  for (std::size_t j = 0; j < batch.directional_dirs.size(); ++j) {
    FieldQuery q;
    q.position = batch.directional_point;
    q.direction = batch.directional_dirs[j];
    batch.directional_specular[j] = field.query(q).specular;
  }
}

double loss_density(const SurfaceCandidate& cand, const RegBatch& batch, double lambda_d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < batch.spatial_points.size(); ++j) {
    const Vec3 offset = batch.spatial_points[j] - cand.x_star;
    const double dist = offset.norm();
    if (dist < kCoincident) continue;  // coincident sample carries no off-surface evidence
    const double opacity = 1.0 - std::exp(-batch.spatial_tau[j]);
    acc += opacity * std::abs(offset.dot(cand.n_star) / dist);
  }
  return lambda_d * cand.w_star * acc;
}

double loss_normal(const SurfaceCandidate& cand, const RegBatch& batch, double lambda_n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < batch.spatial_points.size(); ++j) {
    if (!batch.spatial_normal_ok[j]) continue;
    const double opacity = 1.0 - std::exp(-batch.spatial_tau[j]);
    acc += opacity * 0.5 * (1.0 - batch.spatial_normals[j].dot(cand.n_star));
  }
  return lambda_n * cand.w_star * acc;
}

double loss_specular_bias(const SurfaceCandidate& cand, const std::vector<Vec3>& specular,
                          double lambda_b, BiasDenominator mode) {
  const double denom = bias_denominator_value(specular, mode);
  if (denom < kBiasGuard) return 0.0;
  double acc = 0.0;
  for (const Vec3& c : specular) acc += c.squaredNorm();
  return lambda_b * cand.w_star * acc / (denom * denom);
}

std::vector<std::vector<int>> knn_by_angle(const std::vector<Vec3>& dirs, int k) {
  const int n = static_cast<int>(dirs.size());
  if (n <= k) throw std::invalid_argument("knn_by_angle: need more samples than neighbours");
  std::vector<std::vector<int>> knn(n);
  std::vector<std::pair<double, int>> order;
  order.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    order.clear();
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      order.emplace_back(dirs[j].dot(dirs[i]), i);
    }
    // Largest dot product = smallest angle; ties resolved toward lower index.
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    knn[j].reserve(k);
    for (int m = 0; m < k; ++m) knn[j].push_back(order[m].second);
  }
  return knn;
}

double loss_sphere_tv(const std::vector<Vec3>& directional_dirs,
                      const std::vector<Vec3>& specular, int k, const SurfaceCandidate& cand,
                      double lambda_s) {
  const auto knn = knn_by_angle(directional_dirs, k);
  double acc = 0.0;
  for (std::size_t j = 0; j < directional_dirs.size(); ++j) {
    for (int i : knn[j]) {
      const double weight = 0.5 * (directional_dirs[j].dot(directional_dirs[i]) + 1.0);
      acc += weight * (specular[j] - specular[i]).cwiseAbs().sum();
    }
  }
  return lambda_s * cand.w_star * acc;
}

RegLossValues total_regularization(const SurfaceCandidate& cand, const RegBatch& batch,
                                   const RegConfig& config) {
  RegLossValues values;
  values.density = loss_density(cand, batch, config.weights.lambda_d);
  values.normal = loss_normal(cand, batch, config.weights.lambda_n);
  values.bias = loss_specular_bias(cand, batch.directional_specular, config.weights.lambda_b,
                                   config.bias_denominator);
  values.tv = loss_sphere_tv(batch.directional_dirs, batch.directional_specular, config.stv_k,
                             cand, config.weights.lambda_s);
  return values;
}

RegAdjoints reg_backward(const SurfaceCandidate& cand, const RegBatch& batch,
                         const RegConfig& config, double seed) {
  const std::size_t n = batch.spatial_points.size();
  RegAdjoints adj;
  adj.tau_bar.assign(n, 0.0);
  adj.normal_bar.assign(n, Vec3::Zero());
  adj.specular_bar.assign(batch.directional_specular.size(), Vec3::Zero());

  const LossWeights& lw = config.weights;
  const double w = cand.w_star;

  // density flatness
  double acc_d = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Vec3 offset = batch.spatial_points[j] - cand.x_star;
    const double dist = offset.norm();
    if (dist < kCoincident) continue;
    const Vec3 u = offset / dist;
    const double proj = u.dot(cand.n_star);
    const double opacity = 1.0 - std::exp(-batch.spatial_tau[j]);
    acc_d += opacity * std::abs(proj);
    adj.tau_bar[j] += seed * lw.lambda_d * w * std::exp(-batch.spatial_tau[j]) * std::abs(proj);
    if (proj != 0.0)
      adj.n_star_bar += seed * lw.lambda_d * w * opacity * (proj > 0.0 ? u : Vec3(-u));
  }
  adj.w_star_bar += seed * lw.lambda_d * acc_d;

  // normal consistency
  double acc_n = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!batch.spatial_normal_ok[j]) continue;
    const double opacity = 1.0 - std::exp(-batch.spatial_tau[j]);
    const double half_gap = 0.5 * (1.0 - batch.spatial_normals[j].dot(cand.n_star));
    acc_n += opacity * half_gap;
    adj.tau_bar[j] += seed * lw.lambda_n * w * std::exp(-batch.spatial_tau[j]) * half_gap;
    adj.normal_bar[j] += seed * lw.lambda_n * w * opacity * (-0.5) * cand.n_star;
    adj.n_star_bar += seed * lw.lambda_n * w * opacity * (-0.5) * batch.spatial_normals[j];
  }
  adj.w_star_bar += seed * lw.lambda_n * acc_n;

  // specular bias (denominator is stop-gradient)
  const double denom =
      bias_denominator_value(batch.directional_specular, config.bias_denominator);
  if (denom >= kBiasGuard) {
    const double inv2 = 1.0 / (denom * denom);
    double acc_b = 0.0;
    for (std::size_t j = 0; j < batch.directional_specular.size(); ++j) {
      acc_b += batch.directional_specular[j].squaredNorm();
      adj.specular_bar[j] += seed * lw.lambda_b * w * 2.0 * inv2 * batch.directional_specular[j];
    }
    adj.w_star_bar += seed * lw.lambda_b * acc_b * inv2;
  }

  // sphere total variation
  const auto knn = knn_by_angle(batch.directional_dirs, config.stv_k);
  double acc_s = 0.0;
  for (std::size_t j = 0; j < batch.directional_dirs.size(); ++j) {
    for (int i : knn[j]) {
      const double weight =
          0.5 * (batch.directional_dirs[j].dot(batch.directional_dirs[i]) + 1.0);
      const Vec3 gap = batch.directional_specular[j] - batch.directional_specular[i];
      acc_s += weight * gap.cwiseAbs().sum();
      for (int ch = 0; ch < 3; ++ch) {
        if (gap[ch] == 0.0) continue;
        const double sg = seed * lw.lambda_s * w * weight * (gap[ch] > 0.0 ? 1.0 : -1.0);
        adj.specular_bar[j][ch] += sg;
        adj.specular_bar[static_cast<std::size_t>(i)][ch] -= sg;
      }
    }
  }
  adj.w_star_bar += seed * lw.lambda_s * acc_s;
  return adj;
}

}  // namespace surfreg
