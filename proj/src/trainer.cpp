#include "surfreg/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace surfreg {

namespace {
constexpr std::uint64_t kBatchSalt = 0xb47c5e1ec7ull;
constexpr std::uint64_t kJitterSalt = 0x1177e12a5ull;
constexpr std::uint64_t kAttemptSalt = 0xa77e3977ull;
}  // namespace

void CurriculumSchedule::validate() const {
  if (initial_period < 1 || !is_power_of_two(static_cast<std::uint64_t>(initial_period)))
    throw ConfigError("schedule.initial_period must be a power of two >= 1");
  if (final_period < 1 || !is_power_of_two(static_cast<std::uint64_t>(final_period)))
    throw ConfigError("schedule.final_period must be a power of two >= 1");
  if (final_period > initial_period)
    throw ConfigError("schedule.final_period must not exceed schedule.initial_period");
  if (total_iterations < 1) throw ConfigError("schedule.total_iterations must be positive");
}

int CurriculumSchedule::stages() const {
  return integer_log2(static_cast<std::uint64_t>(initial_period / final_period)) + 1;
}

int CurriculumSchedule::stage_of(int iteration) const {
  const std::int64_t s =
      static_cast<std::int64_t>(iteration) * stages() / total_iterations;
  return static_cast<int>(std::min<std::int64_t>(s, stages() - 1));
}

int CurriculumSchedule::period_of_stage(int stage) const { return initial_period >> stage; }

int CurriculumSchedule::period_at(int iteration) const {
  return period_of_stage(stage_of(iteration));
}

bool is_reg_step(const CurriculumSchedule& schedule, int iteration) {
  return iteration % schedule.period_at(iteration) == 0;
}

std::int64_t expected_reg_steps(const CurriculumSchedule& schedule) {
  const int s_count = schedule.stages();
  const std::int64_t total = schedule.total_iterations;
  auto stage_begin = [&](int s) -> std::int64_t {
    // first iteration whose balanced-partition stage is s
    return (static_cast<std::int64_t>(s) * total + s_count - 1) / s_count;
  };
  auto floor_div = [](std::int64_t x, std::int64_t p) -> std::int64_t {
    return x >= 0 ? x / p : -1;  // only x >= -1 occurs
  };
  std::int64_t count = 0;
  for (int s = 0; s < s_count; ++s) {
    const std::int64_t a = stage_begin(s);
    const std::int64_t b = s + 1 < s_count ? stage_begin(s + 1) : total;
    const std::int64_t p = schedule.period_of_stage(s);
    if (b > a) count += floor_div(b - 1, p) - floor_div(a - 1, p);
  }
  return count;
}

void TrainConfig::validate() const {
  schedule.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (lr_schedule != "cosine" && lr_schedule != "fixed")
    throw ConfigError("train.lr_schedule must be cosine or fixed");
  if (n_reg_samples < 2 || !is_power_of_two(static_cast<std::uint64_t>(n_reg_samples)))
    throw ConfigError("train.n_reg_samples must be a power of two >= 2");
  if (reg_fraction < 0.0 || reg_fraction > 1.0)
    throw ConfigError("train.reg_fraction must lie in [0, 1]");
  if (render_samples < 1) throw ConfigError("render.n_samples must be positive");
  if (!(t_near > 0.0) || t_far <= t_near) throw ConfigError("render t range invalid");
  if (reg.stv_k < 1 || reg.stv_k >= n_reg_samples)
    throw ConfigError("loss.stv_k must be in [1, n_reg_samples)");
  if (scene.n_train_views < 1 || scene.n_eval_views < 0 || scene.image_size < 2)
    throw ConfigError("scene view configuration invalid");
}

std::vector<TrainRay> dataset_rays(const Dataset& data) {
  std::vector<TrainRay> rays;
  for (std::size_t v = 0; v < data.cameras.size(); ++v) {
    const Camera& cam = data.cameras[v];
    for (int py = 0; py < cam.height; ++py) {
      for (int px = 0; px < cam.width; ++px) {
        TrainRay tr;
        tr.ray = cam.pixel_ray(px, py);
        tr.target = data.views[v].image.at(px, py);
        rays.push_back(tr);
      }
    }
  }
  return rays;
}

int worker_count() {
  if (const char* env = std::getenv("SURFREG_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min(n, 256);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

AdamOptimizer::AdamOptimizer(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad,
                         double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
  }
}

Trainer::Trainer(GridField& field, std::vector<TrainRay> rays, const TrainConfig& config)
    : field_(field),
      rays_(std::move(rays)),
      cfg_(config),
      base_sphere_(make_sample_sphere({config.n_reg_samples, config.seed})),
      adam_(field.param_count()) {
  cfg_.validate();
  if (rays_.empty()) throw ConfigError("trainer needs a non-empty ray set");
}

double Trainer::learning_rate_at(int iteration) const {
  if (cfg_.lr_schedule == "fixed") return cfg_.learning_rate;
  const double lr_min = 0.01 * cfg_.learning_rate;
  const double phase = M_PI * static_cast<double>(iteration) /
                       static_cast<double>(cfg_.schedule.total_iterations);
  return lr_min + 0.5 * (cfg_.learning_rate - lr_min) * (1.0 + std::cos(phase));
}

Trainer::BatchOutcome Trainer::run_batch(int iteration, std::vector<double>* grad) {
  const int batch = cfg_.batch_size;
  const int n_intervals = cfg_.render_samples;
  const bool reg_step = cfg_.reg_enabled && is_reg_step(cfg_.schedule, iteration);

  // Batch composition and the regularization attempt mask are decided up
  // front so the per-ray normalization (1/M) is known before backward.
  std::vector<std::size_t> ids(batch);
  Rng batch_rng = keyed_rng(mix_key(cfg_.seed, kBatchSalt), iteration, 0);
  for (int b = 0; b < batch; ++b) ids[b] = batch_rng.next_below(rays_.size());
  std::vector<char> attempt(batch, 0);
  int attempted = 0;
  if (reg_step) {
    for (int b = 0; b < batch; ++b) {
      bool on = cfg_.reg_fraction >= 1.0;
      if (!on && cfg_.reg_fraction > 0.0) {
        Rng r = keyed_rng(mix_key(cfg_.seed, kAttemptSalt), iteration, b);
        on = r.next_double() < cfg_.reg_fraction;
      }
      attempt[b] = on ? 1 : 0;
      attempted += on ? 1 : 0;
    }
  }
  const double photo_scale = 2.0 / (3.0 * batch);
  const double reg_scale = attempted > 0 ? 1.0 / attempted : 0.0;

  const int n_threads = std::max(1, std::min(worker_count(), batch));
  struct ThreadAcc {
    double photo_sq = 0.0;
    RegLossValues reg{};
    int built = 0;
    std::vector<double> grad;
  };
  std::vector<ThreadAcc> acc(n_threads);

  auto work = [&](int tid) {
    ThreadAcc& a = acc[tid];
    if (grad) a.grad.assign(field_.param_count(), 0.0);
    std::vector<double> taus(n_intervals), weights(n_intervals);
    std::vector<double> w_bar(n_intervals), tau_bar(n_intervals);
    std::vector<Vec3> positions(n_intervals);
    std::vector<DensityCache> dcs(n_intervals);
    std::vector<AppearanceCache> acs(n_intervals);
    std::vector<DensityCache> sdc(base_sphere_.size());
    std::vector<MlpCache> mcs(base_sphere_.size());

    const int lo = static_cast<int>(static_cast<std::int64_t>(tid) * batch / n_threads);
    const int hi = static_cast<int>(static_cast<std::int64_t>(tid + 1) * batch / n_threads);
    for (int slot = lo; slot < hi; ++slot) {
      const std::size_t ray_id = ids[slot];
      const TrainRay& tr = rays_[ray_id];
      Rng jitter = keyed_rng(mix_key(cfg_.seed, kJitterSalt), iteration, ray_id);
      const std::vector<double> t =
          stratified_endpoints(cfg_.t_near, cfg_.t_far, n_intervals, &jitter);

      // forward: sample + composite
      Vec3 color = Vec3::Zero();
      double transmittance = 1.0;
      for (int i = 0; i < n_intervals; ++i) {
        const FrustumMoments m = frustum_moments(t[i], t[i + 1], tr.ray.radius_rate);
        positions[i] = tr.ray.origin + m.t_mu * tr.ray.direction;
        field_.density(positions[i], &dcs[i]);
        field_.appearance(positions[i], tr.ray.direction, acs[i]);
        taus[i] = dcs[i].tau;
        const double delta = t[i + 1] - t[i];
        const double e = std::exp(-taus[i] * delta);
        weights[i] = transmittance * (1.0 - e);
        transmittance *= e;
        const Vec3 raw = acs[i].cd + acs[i].s.cwiseProduct(acs[i].mlp.cs);
        color += weights[i] * raw.cwiseMax(0.0).cwiseMin(1.0);
      }
      const Vec3 diff = color - tr.target;
      a.photo_sq += diff.squaredNorm();

      if (grad) std::fill(w_bar.begin(), w_bar.end(), 0.0);

      // scheduled surface regularization
      if (reg_step && attempt[slot]) {
        const auto idx = select_surface_index(weights);
        if (idx) {
          const std::size_t i_star = *idx;
          const FrustumMoments m =
              frustum_moments(t[i_star], t[i_star + 1], tr.ray.radius_rate);
          DensityCache star_dc;
          const Vec3 x_star = tr.ray.origin + m.t_mu * tr.ray.direction;
          field_.density_normal(x_star, star_dc);
          if (!star_dc.degenerate) {
            SurfaceCandidate cand;
            cand.interval_index = i_star;
            cand.x_star = x_star;
            cand.n_star = star_dc.normal;
            cand.w_star = weights[i_star];
            cand.sigma_r_star = std::sqrt(std::max(0.0, m.sigma_r2));
            const ConicalGaussian g = lift_gaussian(tr.ray, m);
            cand.cov_star = g.cov3;

            const Mat3 rot = rotation_for(cfg_.seed, iteration, ray_id);
            const SampleSphere sphere = rotated(base_sphere_, rot);
            RegBatch rb = make_reg_batch(cand, sphere);
            ++a.built;
            for (int j = 0; j < sphere.size(); ++j) {
              field_.density_normal(rb.spatial_points[j], sdc[j]);
              rb.spatial_tau[j] = sdc[j].tau;
              rb.spatial_normals[j] = sdc[j].normal;
              rb.spatial_normal_ok[j] = sdc[j].degenerate ? 0 : 1;
            }
            FeatureCache fc;
            field_.features_at(cand.x_star, fc);
            for (int j = 0; j < sphere.size(); ++j)
              rb.directional_specular[j] =
                  field_.specular_from_features(fc, rb.directional_dirs[j], mcs[j]);

            const RegLossValues vals = total_regularization(cand, rb, cfg_.reg);
            a.reg.density += vals.density;
            a.reg.normal += vals.normal;
            a.reg.bias += vals.bias;
            a.reg.tv += vals.tv;

            if (grad) {
              const RegAdjoints adj = reg_backward(cand, rb, cfg_.reg, reg_scale);
              for (int j = 0; j < sphere.size(); ++j)
                field_.vjp_density_normal(sdc[j], adj.tau_bar[j], adj.normal_bar[j], a.grad);
              double f_bar[kMaxFeatureDim] = {0.0};
              for (int j = 0; j < sphere.size(); ++j)
                field_.vjp_specular_mlp(fc, mcs[j], adj.specular_bar[j], a.grad, f_bar);
              field_.vjp_features(fc, f_bar, a.grad);
              field_.vjp_density_normal(star_dc, 0.0, adj.n_star_bar, a.grad);
              w_bar[i_star] += adj.w_star_bar;
            }
          }
        }
      }

      if (grad) {
        const Vec3 color_bar = photo_scale * diff;
        for (int i = 0; i < n_intervals; ++i) {
          const Vec3 raw = acs[i].cd + acs[i].s.cwiseProduct(acs[i].mlp.cs);
          const Vec3 clamped = raw.cwiseMax(0.0).cwiseMin(1.0);
          w_bar[i] += color_bar.dot(clamped);
          Vec3 raw_bar = weights[i] * color_bar;
          for (int ch = 0; ch < 3; ++ch)
            if (raw[ch] <= 0.0 || raw[ch] >= 1.0) raw_bar[ch] = 0.0;  // clamp saturated
          const Vec3 cd_bar = raw_bar;
          const Vec3 s_bar = raw_bar.cwiseProduct(acs[i].mlp.cs);
          const Vec3 cs_bar = raw_bar.cwiseProduct(acs[i].s);
          field_.vjp_appearance(acs[i], cd_bar, s_bar, cs_bar, a.grad);
        }
        composite_weight_vjp(t, taus, weights, w_bar, tau_bar);
        for (int i = 0; i < n_intervals; ++i) field_.vjp_density(dcs[i], tau_bar[i], a.grad);
      }
    }
  };

  if (n_threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int tid = 0; tid < n_threads; ++tid) pool.emplace_back(work, tid);
    for (auto& th : pool) th.join();
  }

  BatchOutcome outcome;
  for (int tid = 0; tid < n_threads; ++tid) {
    outcome.photometric += acc[tid].photo_sq;
    outcome.reg.density += acc[tid].reg.density;
    outcome.reg.normal += acc[tid].reg.normal;
    outcome.reg.bias += acc[tid].reg.bias;
    outcome.reg.tv += acc[tid].reg.tv;
    outcome.reg_batches += acc[tid].built;
  }
  outcome.photometric /= 3.0 * batch;
  if (attempted > 0) {
    outcome.reg.density *= reg_scale;
    outcome.reg.normal *= reg_scale;
    outcome.reg.bias *= reg_scale;
    outcome.reg.tv *= reg_scale;
  }
  if (grad) {
    grad->assign(field_.param_count(), 0.0);
    for (int tid = 0; tid < n_threads; ++tid)
      for (std::size_t i = 0; i < grad->size(); ++i) (*grad)[i] += acc[tid].grad[i];
  }
  reg_batches_total_ += outcome.reg_batches;
  return outcome;
}

StepStats Trainer::step(int iteration) {
  std::vector<double> grad;
  const BatchOutcome outcome = run_batch(iteration, &grad);

  const double total = outcome.photometric + outcome.reg.total();
  if (!std::isfinite(total)) {
    std::ostringstream oss;
    oss << "non-finite training loss at iteration " << iteration
        << ": photometric=" << outcome.photometric << " L_d=" << outcome.reg.density
        << " L_n=" << outcome.reg.normal << " L_b=" << outcome.reg.bias
        << " L_s=" << outcome.reg.tv << "; ray ids:";
    Rng batch_rng = keyed_rng(mix_key(cfg_.seed, kBatchSalt), iteration, 0);
    for (int b = 0; b < std::min(8, cfg_.batch_size); ++b)
      oss << ' ' << batch_rng.next_below(rays_.size());
    throw NumericError(oss.str());
  }

  const double lr = learning_rate_at(iteration);
  adam_.step(field_.params(), grad, lr);

  StepStats stats;
  stats.iteration = iteration;
  stats.photometric = outcome.photometric;
  stats.loss_d = outcome.reg.density;
  stats.loss_n = outcome.reg.normal;
  stats.loss_b = outcome.reg.bias;
  stats.loss_s = outcome.reg.tv;
  stats.reg_step = cfg_.reg_enabled && is_reg_step(cfg_.schedule, iteration);
  stats.reg_batches_built = outcome.reg_batches;
  stats.learning_rate = lr;
  return stats;
}

double Trainer::loss_only(int iteration) {
  const BatchOutcome outcome = run_batch(iteration, nullptr);
  return outcome.photometric + outcome.reg.total();
}

std::pair<double, std::vector<double>> Trainer::loss_and_grad(int iteration) {
  std::vector<double> grad;
  const BatchOutcome outcome = run_batch(iteration, &grad);
  return {outcome.photometric + outcome.reg.total(), std::move(grad)};
}

TrainRunResult run_training(GridField& field, const Dataset& data, const TrainConfig& config,
                            const std::string& out_dir) {
  Trainer trainer(field, dataset_rays(data), config);
  TrainRunResult result;
  result.log.reserve(config.schedule.total_iterations);

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/train_log.csv");
    if (!log) throw ConfigError("cannot write train log in " + out_dir);
    log << "iter,photometric,L_d,L_n,L_b,L_s,is_reg_step\n";
    log.precision(17);
  }

  for (int i = 0; i < config.schedule.total_iterations; ++i) {
    const StepStats stats = trainer.step(i);
    if (log.is_open()) {
      log << stats.iteration << ',' << stats.photometric << ',' << stats.loss_d << ','
          << stats.loss_n << ',' << stats.loss_b << ',' << stats.loss_s << ','
          << (stats.reg_step ? 1 : 0) << '\n';
    }
    if (!out_dir.empty() && config.checkpoint_every > 0 &&
        (i + 1) % config.checkpoint_every == 0 &&
        i + 1 < config.schedule.total_iterations) {
      char name[48];
      std::snprintf(name, sizeof(name), "/checkpoint_%06d.srf", i + 1);
      field.save(out_dir + name);
    }
    result.log.push_back(stats);
  }
  if (!out_dir.empty()) field.save(out_dir + "/checkpoint_final.srf");
  return result;
}

TrainConfig make_finetune_config(TrainConfig base, int steps, double learning_rate,
                                 bool disable_bias) {
  base.schedule.initial_period = base.schedule.final_period;
  base.schedule.total_iterations = steps;
  base.learning_rate = learning_rate;
  base.lr_schedule = "fixed";
  base.reg_enabled = true;
  if (disable_bias) base.reg.weights.lambda_b = 0.0;
  return base;
}

std::vector<ViewMaps> render_eval_views(const RadianceField& field, const Dataset& eval_data,
                                        const TrainConfig& config) {
  std::vector<ViewMaps> rendered;
  rendered.reserve(eval_data.cameras.size());
  for (const Camera& cam : eval_data.cameras)
    rendered.push_back(
        render_view(field, cam, config.render_samples, config.t_near, config.t_far));
  return rendered;
}

Metrics evaluate_field(const RadianceField& field, const Dataset& eval_data,
                       const TrainConfig& config) {
  return compute_metrics(render_eval_views(field, eval_data, config), eval_data.views);
}

}  // namespace surfreg
