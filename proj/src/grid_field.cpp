#include "surfreg/grid_field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace surfreg {

namespace {
constexpr double kDegenerateGradNorm = 1e-9;
constexpr char kMagic[8] = {'S', 'R', 'F', 'C', 'K', 'P', 'T', '1'};

std::size_t cube(int r) {
  return static_cast<std::size_t>(r) * r * r;
}
}  // namespace

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void encode_direction(const Vec3& d, double* enc) {
  enc[0] = 1.0;
  enc[1] = d.x();
  enc[2] = d.y();
  enc[3] = d.z();
  enc[4] = d.x() * d.y();
  enc[5] = d.y() * d.z();
  enc[6] = d.z() * d.x();
  enc[7] = d.x() * d.x() - d.y() * d.y();
  enc[8] = 3.0 * d.z() * d.z() - 1.0;
}

GridField::GridField(const Aabb& bounds, const GridDims& dims) : bounds_(bounds), dims_(dims) {
  if (dims.density_res < 2 || dims.color_res < 2)
    throw std::invalid_argument("GridField: grid resolutions must be >= 2");
  if (dims.feature_dim < 1 || dims.feature_dim > kMaxFeatureDim)
    throw std::invalid_argument("GridField: feature_dim out of range");
  if (dims.hidden_dim < 1 || dims.hidden_dim > kMaxHiddenDim)
    throw std::invalid_argument("GridField: hidden_dim out of range");

  const std::size_t nd = cube(dims.density_res);
  const std::size_t nc = cube(dims.color_res);
  const int in_dim = dims.feature_dim + kEncDim;
  diffuse_off_ = nd;
  tint_off_ = diffuse_off_ + 3 * nc;
  feature_off_ = tint_off_ + 3 * nc;
  w1_off_ = feature_off_ + static_cast<std::size_t>(dims.feature_dim) * nc;
  b1_off_ = w1_off_ + static_cast<std::size_t>(dims.hidden_dim) * in_dim;
  w2_off_ = b1_off_ + dims.hidden_dim;
  b2_off_ = w2_off_ + 3 * static_cast<std::size_t>(dims.hidden_dim);
  params_.assign(b2_off_ + 3, 0.0);
}

void GridField::init_random(std::uint64_t seed) {
  Rng rng(mix_key(seed, 0x5eedf1e1d));
  const std::size_t nd = density_count();
  for (std::size_t i = 0; i < nd; ++i) params_[i] = -2.0 + 0.05 * rng.next_normal();
  for (std::size_t i = diffuse_off_; i < feature_off_; ++i) params_[i] = 0.02 * rng.next_normal();
  for (std::size_t i = feature_off_; i < w1_off_; ++i) params_[i] = 0.1 * rng.next_normal();
  const int in_dim = dims_.feature_dim + kEncDim;
  const double s1 = std::sqrt(1.0 / in_dim);
  for (std::size_t i = w1_off_; i < b1_off_; ++i) params_[i] = s1 * rng.next_normal();
  for (std::size_t i = b1_off_; i < w2_off_; ++i) params_[i] = 0.0;
  const double s2 = std::sqrt(1.0 / dims_.hidden_dim);
  for (std::size_t i = w2_off_; i < b2_off_; ++i) params_[i] = s2 * rng.next_normal();
  for (std::size_t i = b2_off_; i < params_.size(); ++i) params_[i] = 0.0;
}

Stencil GridField::make_stencil(int res, const Vec3& x) const {
  const Vec3 ext = bounds_.extent();
  Stencil st;
  int ci[3];
  double f[3], scale[3];
  for (int a = 0; a < 3; ++a) {
    const double span = ext[a];
    scale[a] = (res - 1) / span;
    double u = (x[a] - bounds_.lo[a]) * scale[a];
    u = std::min(std::max(u, 0.0), static_cast<double>(res - 1));
    int c = static_cast<int>(u);
    if (c > res - 2) c = res - 2;
    ci[a] = c;
    f[a] = u - c;
  }
  const std::size_t sx = 1, sy = static_cast<std::size_t>(res),
                    sz = static_cast<std::size_t>(res) * res;
  st.base = ci[2] * sz + ci[1] * sy + ci[0] * sx;
  const double wx[2] = {1.0 - f[0], f[0]};
  const double wy[2] = {1.0 - f[1], f[1]};
  const double wz[2] = {1.0 - f[2], f[2]};
  const double dx[2] = {-scale[0], scale[0]};
  const double dy[2] = {-scale[1], scale[1]};
  const double dz[2] = {-scale[2], scale[2]};
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
    st.offsets[c] = bx * sx + by * sy + bz * sz;
    st.w[c] = wx[bx] * wy[by] * wz[bz];
    st.dw[c] = Vec3(dx[bx] * wy[by] * wz[bz], wx[bx] * dy[by] * wz[bz], wx[bx] * wy[by] * dz[bz]);
  }
  return st;
}

double GridField::density(const Vec3& x, DensityCache* cache) const {
  const Stencil st = make_stencil(dims_.density_res, x);
  double g = 0.0;
  const double* d = params_.data();
  for (int c = 0; c < 8; ++c) g += st.w[c] * d[st.base + st.offsets[c]];
  const double tau = softplus(g);
  if (cache) {
    cache->st = st;
    cache->g = g;
    cache->sig = logistic(g);
    cache->tau = tau;
    cache->has_normal = false;
  }
  return tau;
}

void GridField::density_normal(const Vec3& x, DensityCache& cache) const {
  density(x, &cache);
  Vec3 grad_g = Vec3::Zero();
  const double* d = params_.data();
  for (int c = 0; c < 8; ++c) grad_g += cache.st.dw[c] * d[cache.st.base + cache.st.offsets[c]];
  cache.grad_tau = cache.sig * grad_g;
  cache.grad_norm = cache.grad_tau.norm();
  cache.has_normal = true;
  if (cache.grad_norm <= kDegenerateGradNorm) {
    cache.degenerate = true;
    cache.normal = Vec3::Zero();
  } else {
    cache.degenerate = false;
    cache.normal = -cache.grad_tau / cache.grad_norm;
  }
}

void GridField::features_at(const Vec3& x, FeatureCache& cache) const {
  cache.st = make_stencil(dims_.color_res, x);
  const int F = dims_.feature_dim;
  const double* base = params_.data() + feature_off_;
  for (int k = 0; k < F; ++k) cache.f[k] = 0.0;
  for (int c = 0; c < 8; ++c) {
    const double w = cache.st.w[c];
    const double* v = base + (cache.st.base + cache.st.offsets[c]) * F;
    for (int k = 0; k < F; ++k) cache.f[k] += w * v[k];
  }
}

Vec3 GridField::specular_from_features(const FeatureCache& fc, const Vec3& d,
                                       MlpCache& cache) const {
  const int F = dims_.feature_dim;
  const int H = dims_.hidden_dim;
  const int in_dim = F + kEncDim;
  encode_direction(d, cache.enc.data());
  const double* w1 = params_.data() + w1_off_;
  const double* b1 = params_.data() + b1_off_;
  const double* w2 = params_.data() + w2_off_;
  const double* b2 = params_.data() + b2_off_;
  for (int h = 0; h < H; ++h) {
    const double* row = w1 + static_cast<std::size_t>(h) * in_dim;
    double acc = b1[h];
    for (int k = 0; k < F; ++k) acc += row[k] * fc.f[k];
    for (int k = 0; k < kEncDim; ++k) acc += row[F + k] * cache.enc[k];
    cache.h[h] = std::tanh(acc);
  }
  for (int o = 0; o < 3; ++o) {
    const double* row = w2 + static_cast<std::size_t>(o) * H;
    double acc = b2[o];
    for (int h = 0; h < H; ++h) acc += row[h] * cache.h[h];
    cache.cs[o] = logistic(acc);
  }
  return cache.cs;
}

void GridField::appearance(const Vec3& x, const Vec3& d, AppearanceCache& cache) const {
  cache.st = make_stencil(dims_.color_res, x);
  const double* diff = params_.data() + diffuse_off_;
  const double* tint = params_.data() + tint_off_;
  double pd[3] = {0.0, 0.0, 0.0};
  double pt[3] = {0.0, 0.0, 0.0};
  for (int c = 0; c < 8; ++c) {
    const double w = cache.st.w[c];
    const std::size_t vi = (cache.st.base + cache.st.offsets[c]) * 3;
    for (int ch = 0; ch < 3; ++ch) {
      pd[ch] += w * diff[vi + ch];
      pt[ch] += w * tint[vi + ch];
    }
  }
  for (int ch = 0; ch < 3; ++ch) {
    cache.cd[ch] = logistic(pd[ch]);
    cache.s[ch] = logistic(pt[ch]);
  }
  cache.fc.st = cache.st;
  const int F = dims_.feature_dim;
  const double* feat = params_.data() + feature_off_;
  for (int k = 0; k < F; ++k) cache.fc.f[k] = 0.0;
  for (int c = 0; c < 8; ++c) {
    const double w = cache.st.w[c];
    const double* v = feat + (cache.st.base + cache.st.offsets[c]) * F;
    for (int k = 0; k < F; ++k) cache.fc.f[k] += w * v[k];
  }
  specular_from_features(cache.fc, d, cache.mlp);
}

FieldOutput GridField::query(const FieldQuery& q) const {
  FieldOutput out;
  DensityCache dc;
  density_normal(q.position, dc);
  out.tau = dc.tau;
  out.normal = dc.normal;
  out.degenerate_normal = dc.degenerate;
  AppearanceCache ac;
  appearance(q.position, q.direction, ac);
  out.diffuse = ac.cd;
  out.tint = ac.s;
  out.specular = ac.mlp.cs;
  return out;
}

void GridField::vjp_density(const DensityCache& c, double tau_bar,
                            std::vector<double>& grad) const {
  const double gbar = tau_bar * c.sig;
  double* g = grad.data();
  for (int k = 0; k < 8; ++k) g[c.st.base + c.st.offsets[k]] += gbar * c.st.w[k];
}

void GridField::vjp_density_normal(const DensityCache& c, double tau_bar, const Vec3& n_bar,
                                   std::vector<double>& grad) const {
  double gbar = tau_bar * c.sig;
  Vec3 hbar = Vec3::Zero();
  if (c.has_normal && !c.degenerate) {
    // normal = -G/|G| with G = sig(g) * grad_g
    const Vec3 ghat = c.grad_tau / c.grad_norm;
    const Vec3 gradtau_bar = (-n_bar + ghat * ghat.dot(n_bar)) / c.grad_norm;
    // grad_tau = sig(g) * grad_g; sig' = sig * (1 - sig)
    const Vec3 grad_g = c.grad_tau / c.sig;
    gbar += c.sig * (1.0 - c.sig) * grad_g.dot(gradtau_bar);
    hbar = c.sig * gradtau_bar;
  }
  double* g = grad.data();
  for (int k = 0; k < 8; ++k) {
    const std::size_t idx = c.st.base + c.st.offsets[k];
    g[idx] += gbar * c.st.w[k] + hbar.dot(c.st.dw[k]);
  }
}

void GridField::vjp_specular_mlp(const FeatureCache& fc, const MlpCache& mc, const Vec3& cs_bar,
                                 std::vector<double>& grad, double* f_bar) const {
  const int F = dims_.feature_dim;
  const int H = dims_.hidden_dim;
  const int in_dim = F + kEncDim;
  const double* w1 = params_.data() + w1_off_;
  const double* w2 = params_.data() + w2_off_;
  double* gw1 = grad.data() + w1_off_;
  double* gb1 = grad.data() + b1_off_;
  double* gw2 = grad.data() + w2_off_;
  double* gb2 = grad.data() + b2_off_;

  double hbar[kMaxHiddenDim] = {0.0};
  for (int o = 0; o < 3; ++o) {
    const double pre_bar = cs_bar[o] * mc.cs[o] * (1.0 - mc.cs[o]);
    if (pre_bar == 0.0) continue;
    gb2[o] += pre_bar;
    const double* row = w2 + static_cast<std::size_t>(o) * H;
    double* grow = gw2 + static_cast<std::size_t>(o) * H;
    for (int h = 0; h < H; ++h) {
      grow[h] += pre_bar * mc.h[h];
      hbar[h] += pre_bar * row[h];
    }
  }
  for (int h = 0; h < H; ++h) {
    const double pre_bar = hbar[h] * (1.0 - mc.h[h] * mc.h[h]);
    if (pre_bar == 0.0) continue;
    gb1[h] += pre_bar;
    const double* row = w1 + static_cast<std::size_t>(h) * in_dim;
    double* grow = gw1 + static_cast<std::size_t>(h) * in_dim;
    for (int k = 0; k < F; ++k) {
      grow[k] += pre_bar * fc.f[k];
      if (f_bar) f_bar[k] += pre_bar * row[k];
    }
    for (int k = 0; k < kEncDim; ++k) grow[F + k] += pre_bar * mc.enc[k];
  }
}

void GridField::vjp_features(const FeatureCache& fc, const double* f_bar,
                             std::vector<double>& grad) const {
  const int F = dims_.feature_dim;
  double* gf = grad.data() + feature_off_;
  for (int c = 0; c < 8; ++c) {
    const double w = fc.st.w[c];
    double* v = gf + (fc.st.base + fc.st.offsets[c]) * F;
    for (int k = 0; k < F; ++k) v[k] += w * f_bar[k];
  }
}

void GridField::vjp_appearance(const AppearanceCache& c, const Vec3& cd_bar, const Vec3& s_bar,
                               const Vec3& cs_bar, std::vector<double>& grad) const {
  double* gd = grad.data() + diffuse_off_;
  double* gt = grad.data() + tint_off_;
  double pd_bar[3], pt_bar[3];
  for (int ch = 0; ch < 3; ++ch) {
    pd_bar[ch] = cd_bar[ch] * c.cd[ch] * (1.0 - c.cd[ch]);
    pt_bar[ch] = s_bar[ch] * c.s[ch] * (1.0 - c.s[ch]);
  }
  for (int k = 0; k < 8; ++k) {
    const double w = c.st.w[k];
    const std::size_t vi = (c.st.base + c.st.offsets[k]) * 3;
    for (int ch = 0; ch < 3; ++ch) {
      gd[vi + ch] += w * pd_bar[ch];
      gt[vi + ch] += w * pt_bar[ch];
    }
  }
  if (cs_bar != Vec3::Zero()) {
    double f_bar[kMaxFeatureDim] = {0.0};
    vjp_specular_mlp(c.fc, c.mlp, cs_bar, grad, f_bar);
    vjp_features(c.fc, f_bar, grad);
  }
}

void GridField::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  const std::uint32_t version = 1;
  const std::uint32_t meta[5] = {version, static_cast<std::uint32_t>(dims_.density_res),
                                 static_cast<std::uint32_t>(dims_.color_res),
                                 static_cast<std::uint32_t>(dims_.feature_dim),
                                 static_cast<std::uint32_t>(dims_.hidden_dim)};
  out.write(reinterpret_cast<const char*>(meta), sizeof(meta));
  double box[6] = {bounds_.lo.x(), bounds_.lo.y(), bounds_.lo.z(),
                   bounds_.hi.x(), bounds_.hi.y(), bounds_.hi.z()};
  out.write(reinterpret_cast<const char*>(box), sizeof(box));
  const std::uint64_t count = params_.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
}

GridField GridField::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("not a field checkpoint: " + path);
  std::uint32_t meta[5];
  in.read(reinterpret_cast<char*>(meta), sizeof(meta));
  if (meta[0] != 1) throw ConfigError("unsupported checkpoint version");
  double box[6];
  in.read(reinterpret_cast<char*>(box), sizeof(box));
  GridDims dims;
  dims.density_res = static_cast<int>(meta[1]);
  dims.color_res = static_cast<int>(meta[2]);
  dims.feature_dim = static_cast<int>(meta[3]);
  dims.hidden_dim = static_cast<int>(meta[4]);
  Aabb bounds{Vec3(box[0], box[1], box[2]), Vec3(box[3], box[4], box[5])};
  GridField field(bounds, dims);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != field.params_.size()) throw ConfigError("checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(field.params_.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint: " + path);
  return field;
}

}  // namespace surfreg
