#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "surfreg/analytic_scene.hpp"
#include "surfreg/grid_field.hpp"
#include "surfreg/regularizers.hpp"
#include "surfreg/renderer.hpp"

namespace surfreg {

/// Staircase regularization schedule: training is split into
/// log2(initial/final)+1 equal stages; stage s regularizes every
/// initial/2^s iterations.
struct CurriculumSchedule {
  int initial_period = 512;
  int final_period = 4;
  int total_iterations = 25000;

  void validate() const;
  int stages() const;
  int stage_of(int iteration) const;
  int period_of_stage(int stage) const;
  int period_at(int iteration) const;
};

bool is_reg_step(const CurriculumSchedule& schedule, int iteration);

/// Closed-form count of regularized iterations (multiples of the stage
/// period inside each stage range).
std::int64_t expected_reg_steps(const CurriculumSchedule& schedule);

struct SceneConfig {
  SceneKind kind = SceneKind::plane;
  int n_train_views = 20;
  int n_eval_views = 5;
  int image_size = 48;
};

struct TrainConfig {
  GridDims dims{};
  SceneConfig scene{};
  int batch_size = 1024;
  double learning_rate = 5e-3;
  std::string lr_schedule = "cosine";  // cosine | fixed
  std::uint64_t seed = 1;
  int n_reg_samples = 32;
  double reg_fraction = 1.0;
  RegConfig reg{};
  CurriculumSchedule schedule{64, 4, 2000};
  int render_samples = 64;
  double t_near = 0.6;
  double t_far = 4.2;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  bool reg_enabled = true;

  void validate() const;
};

struct StepStats {
  int iteration = 0;
  double photometric = 0.0;
  double loss_d = 0.0;
  double loss_n = 0.0;
  double loss_b = 0.0;
  double loss_s = 0.0;
  bool reg_step = false;
  int reg_batches_built = 0;
  double learning_rate = 0.0;
};

struct TrainRay {
  Ray ray;
  Vec3 target = Vec3::Zero();
};

std::vector<TrainRay> dataset_rays(const Dataset& data);

/// Number of parallel workers: SURFREG_THREADS if set, else the hardware
/// concurrency.
int worker_count();

/// Adam over the flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr);

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Desk-scale training loop: photometric loss every step plus the four
/// surface losses on scheduled steps. All randomness is counter-based on
/// (seed, iteration, ray), so runs replay exactly; gradient accumulation
/// uses a fixed per-thread partition reduced in thread order, so results
/// are reproducible for a fixed seed and worker count.
class Trainer {
 public:
  Trainer(GridField& field, std::vector<TrainRay> rays, const TrainConfig& config);

  StepStats step(int iteration);

  /// Total training loss of the step (photometric plus scheduled
  /// regularization) without touching parameters; the finite-difference
  /// oracle probes this.
  double loss_only(int iteration);

  /// Total training loss and its gradient, no parameter update.
  std::pair<double, std::vector<double>> loss_and_grad(int iteration);

  double learning_rate_at(int iteration) const;
  std::int64_t total_reg_batches() const { return reg_batches_total_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  struct BatchOutcome {
    double photometric = 0.0;
    RegLossValues reg{};
    int reg_batches = 0;
  };

  BatchOutcome run_batch(int iteration, std::vector<double>* grad);

  GridField& field_;
  std::vector<TrainRay> rays_;
  TrainConfig cfg_;
  SampleSphere base_sphere_;
  AdamOptimizer adam_;
  std::int64_t reg_batches_total_ = 0;
};

struct TrainRunResult {
  std::vector<StepStats> log;
};

/// Runs the configured number of iterations, writing train_log.csv and
/// checkpoints when out_dir is non-empty.
TrainRunResult run_training(GridField& field, const Dataset& data, const TrainConfig& config,
                            const std::string& out_dir);

/// Finetuning: continues from an existing field at a fixed learning rate
/// with regularization at the final period only. `steps` replaces the
/// schedule's total; disable_bias zeroes the specular-bias weight (for
/// fields without a diffuse split).
TrainConfig make_finetune_config(TrainConfig base, int steps, double learning_rate,
                                 bool disable_bias = false);

/// Renders the evaluation views and reduces metrics against ground truth.
Metrics evaluate_field(const RadianceField& field, const Dataset& eval_data,
                       const TrainConfig& config);

std::vector<ViewMaps> render_eval_views(const RadianceField& field, const Dataset& eval_data,
                                        const TrainConfig& config);

}  // namespace surfreg
