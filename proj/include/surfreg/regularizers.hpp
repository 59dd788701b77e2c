#pragma once

#include <utility>
#include <vector>

#include "surfreg/renderer.hpp"
#include "surfreg/sphere_sampler.hpp"

namespace surfreg {

inline constexpr double kSqrt2Ln2 = 1.1774100225154746910;

struct LossWeights {
  double lambda_d = 0.1;
  double lambda_n = 0.1;
  double lambda_b = 0.03;
  double lambda_s = 0.001;
};

/// How the specular-bias denominator reduces the batch: Euclidean norm of
/// the per-channel maximum (default), or the maximum per-sample norm.
enum class BiasDenominator { per_channel_max, max_sample_norm };

struct RegConfig {
  LossWeights weights;
  int stv_k = 3;
  BiasDenominator bias_denominator = BiasDenominator::per_channel_max;
};

/// Paired regularization batches at a surface candidate: ball points around
/// it (density/normal supervision) and outward hemisphere directions at it
/// (specular supervision).
struct RegBatch {
  // spatial batch
  std::vector<Vec3> spatial_points;   // x_m
  std::vector<Vec3> spatial_dirs;     // d_m = d_s
  std::vector<double> spatial_tau;
  std::vector<Vec3> spatial_normals;  // zero when degenerate
  std::vector<char> spatial_normal_ok;
  // directional batch
  Vec3 directional_point = Vec3::Zero();  // x_phi = x_star
  std::vector<Vec3> directional_dirs;     // d_phi
  std::vector<Vec3> directional_specular;

  int size() const { return static_cast<int>(spatial_points.size()); }
};

/// Directional batch: samples the candidate point through the sphere
/// directions flipped into the hemisphere of the surface normal,
/// d_phi = sgn(d_s . n_star) d_s with sgn(0) := +1.
std::pair<Vec3, std::vector<Vec3>> build_directional_batch(const SurfaceCandidate& cand,
                                                           const SampleSphere& sphere);

/// Spatial batch: ball points scaled to the candidate's radial half width,
/// x_m = x_star + sigma_r_star * sqrt(2 ln 2) * p; directions are the raw
/// sphere directions (sample color is irrelevant off the surface).
std::pair<std::vector<Vec3>, std::vector<Vec3>> build_spatial_batch(
    const SurfaceCandidate& cand, const SampleSphere& sphere);

/// Builds both batches (geometry only; field outputs unfilled).
RegBatch make_reg_batch(const SurfaceCandidate& cand, const SampleSphere& sphere);

/// Fills the batch's field outputs through the generic field interface.
void populate_reg_batch(RegBatch& batch, const RadianceField& field);

/// Density flatness: opacity times unit-offset alignment with the normal,
/// lambda_d * w_star * sum_j (1 - e^-tau_j) |unit(x_m_j - x_star) . n_star|.
/// Samples coincident with x_star contribute zero.
double loss_density(const SurfaceCandidate& cand, const RegBatch& batch, double lambda_d);

/// Normal consistency: lambda_n * w_star * sum_j (1 - e^-tau_j)
/// (1 - n_j . n_star) / 2. Degenerate sample normals contribute zero.
double loss_normal(const SurfaceCandidate& cand, const RegBatch& batch, double lambda_n);

/// Specular bias: lambda_b * w_star * sum_j |c_s_j / denom|^2 where denom is
/// a stop-gradient batch maximum. Zero (guarded) when the maximum is below
/// 1e-8.
double loss_specular_bias(const SurfaceCandidate& cand, const std::vector<Vec3>& specular,
                          double lambda_b,
                          BiasDenominator mode = BiasDenominator::per_channel_max);

/// Sphere total variation over the k nearest directions by angle (directed
/// edges, ties by index, self excluded):
/// lambda_s * w_star * sum_j sum_k 0.5 (d_j . d_k + 1) |c_j - c_k|_1.
/// Throws std::invalid_argument when the batch has at most k samples.
double loss_sphere_tv(const std::vector<Vec3>& directional_dirs,
                      const std::vector<Vec3>& specular, int k, const SurfaceCandidate& cand,
                      double lambda_s);

struct RegLossValues {
  double density = 0.0;
  double normal = 0.0;
  double bias = 0.0;
  double tv = 0.0;
  double total() const { return density + normal + bias + tv; }
};

RegLossValues total_regularization(const SurfaceCandidate& cand, const RegBatch& batch,
                                   const RegConfig& config);

/// k nearest neighbours of each direction by angular distance over the full
/// set; ties broken toward smaller index, self excluded.
std::vector<std::vector<int>> knn_by_angle(const std::vector<Vec3>& dirs, int k);

/// Adjoints of the summed regularization losses with respect to the batch's
/// field outputs and the candidate. The denominator of the bias loss is a
/// constant during differentiation; direction flips and neighbour choices
/// are piecewise constant and carry no gradient.
struct RegAdjoints {
  std::vector<double> tau_bar;
  std::vector<Vec3> normal_bar;
  std::vector<Vec3> specular_bar;
  double w_star_bar = 0.0;
  Vec3 n_star_bar = Vec3::Zero();
};

RegAdjoints reg_backward(const SurfaceCandidate& cand, const RegBatch& batch,
                         const RegConfig& config, double seed = 1.0);

}  // namespace surfreg
