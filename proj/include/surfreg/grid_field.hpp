#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "surfreg/field.hpp"

namespace surfreg {

inline constexpr int kEncDim = 9;        // quadratic direction encoding
inline constexpr int kMaxFeatureDim = 16;
inline constexpr int kMaxHiddenDim = 32;

struct GridDims {
  int density_res = 64;
  int color_res = 32;
  int feature_dim = 8;
  int hidden_dim = 16;
};

/// Trilinear interpolation stencil of one grid cell: corner indices are
/// base + offsets[c]; dw is the weight gradient in world units.
struct Stencil {
  std::size_t base = 0;
  std::array<std::size_t, 8> offsets{};
  std::array<double, 8> w{};
  std::array<Vec3, 8> dw{};
};

struct DensityCache {
  Stencil st;
  double g = 0.0;           // raw trilinear value
  double sig = 0.0;         // softplus'(g)
  double tau = 0.0;
  Vec3 grad_tau = Vec3::Zero();
  double grad_norm = 0.0;
  Vec3 normal = Vec3::Zero();
  bool degenerate = true;
  bool has_normal = false;
};

struct FeatureCache {
  Stencil st;
  std::array<double, kMaxFeatureDim> f{};
};

struct MlpCache {
  std::array<double, kEncDim> enc{};
  std::array<double, kMaxHiddenDim> h{};  // post-tanh
  Vec3 cs = Vec3::Zero();                 // post-sigmoid
};

struct AppearanceCache {
  Stencil st;   // color grid stencil (shared by diffuse/tint/features)
  Vec3 cd = Vec3::Zero();
  Vec3 s = Vec3::Zero();
  FeatureCache fc;
  MlpCache mlp;
};

/// Trainable field: a dense density grid with softplus activation, dense
/// diffuse/tint/feature grids with sigmoid-bounded colors, and a two-layer
/// tanh view head mapping (features, direction encoding) to specular color.
/// Normals are the normalized negative analytic gradient of the density
/// trilinear interpolant. All parameters live in one flat vector so the
/// optimizer, finite-difference probes and checkpoints stay trivial.
class GridField : public RadianceField {
 public:
  GridField(const Aabb& bounds, const GridDims& dims);

  void init_random(std::uint64_t seed);

  // RadianceField
  FieldOutput query(const FieldQuery& q) const override;
  Aabb bounds() const override { return bounds_; }

  // Lean forward paths used by the training loop. Caches carry everything
  // the matching vjp needs.
  double density(const Vec3& x, DensityCache* cache = nullptr) const;
  void density_normal(const Vec3& x, DensityCache& cache) const;
  void appearance(const Vec3& x, const Vec3& d, AppearanceCache& cache) const;
  void features_at(const Vec3& x, FeatureCache& cache) const;
  Vec3 specular_from_features(const FeatureCache& fc, const Vec3& d, MlpCache& cache) const;

  // Reverse-mode accumulation into a flat gradient buffer (same layout as
  // params()). d_feature accumulates the feature adjoint so a directional
  // batch can distribute it to the grid once via vjp_features.
  void vjp_density(const DensityCache& c, double tau_bar, std::vector<double>& grad) const;
  void vjp_density_normal(const DensityCache& c, double tau_bar, const Vec3& n_bar,
                          std::vector<double>& grad) const;
  void vjp_appearance(const AppearanceCache& c, const Vec3& cd_bar, const Vec3& s_bar,
                      const Vec3& cs_bar, std::vector<double>& grad) const;
  void vjp_specular_mlp(const FeatureCache& fc, const MlpCache& mc, const Vec3& cs_bar,
                        std::vector<double>& grad, double* f_bar) const;
  void vjp_features(const FeatureCache& fc, const double* f_bar,
                    std::vector<double>& grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const GridDims& dims() const { return dims_; }

  std::size_t density_offset() const { return 0; }
  std::size_t diffuse_offset() const { return diffuse_off_; }
  std::size_t tint_offset() const { return tint_off_; }
  std::size_t feature_offset() const { return feature_off_; }
  std::size_t mlp_offset() const { return w1_off_; }
  std::size_t density_count() const { return diffuse_off_; }
  std::size_t diffuse_count() const { return tint_off_ - diffuse_off_; }

  void save(const std::string& path) const;
  static GridField load(const std::string& path);

 private:
  Stencil make_stencil(int res, const Vec3& x) const;

  Aabb bounds_;
  GridDims dims_;
  std::vector<double> params_;
  std::size_t diffuse_off_ = 0, tint_off_ = 0, feature_off_ = 0;
  std::size_t w1_off_ = 0, b1_off_ = 0, w2_off_ = 0, b2_off_ = 0;
};

void encode_direction(const Vec3& d, double* enc);

double softplus(double x);
double logistic(double x);

}  // namespace surfreg
