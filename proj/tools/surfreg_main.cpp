#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "surfreg/config.hpp"
#include "surfreg/experiment.hpp"
#include "surfreg/grid_field.hpp"
#include "surfreg/image_io.hpp"
#include "surfreg/regularizers.hpp"
#include "surfreg/renderer.hpp"
#include "surfreg/sphere_sampler.hpp"
#include "surfreg/trainer.hpp"

namespace {

using namespace surfreg;

struct SampleArgs {
  int n = 32;
  std::optional<std::uint64_t> rotate_seed;
  std::string out;
};

void cmd_sample(const SampleArgs& args) {
  SampleSphere sphere = make_sample_sphere({args.n, 0});
  if (args.rotate_seed) sphere = rotated(sphere, rotation_for(*args.rotate_seed, 0, 0));
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    if (!file) throw ConfigError("cannot write " + args.out);
    os = &file;
  }
  os->precision(17);
  *os << "i,dir_x,dir_y,dir_z,radius,ball_x,ball_y,ball_z\n";
  for (int i = 0; i < sphere.size(); ++i) {
    const Vec3& d = sphere.directions[i];
    const Vec3 b = sphere.ball_point(i);
    *os << i << ',' << d.x() << ',' << d.y() << ',' << d.z() << ',' << sphere.radii[i] << ','
        << b.x() << ',' << b.y() << ',' << b.z() << '\n';
  }
}

struct RenderArgs {
  std::string checkpoint;
  std::string cameras;
  std::string out;
  std::string truth;
  int width = 48, height = 48, samples = 64;
  double t_near = 0.6, t_far = 4.2;
};

void cmd_render(const RenderArgs& args) {
  const GridField field = GridField::load(args.checkpoint);
  const std::vector<Camera> cameras = read_cameras_csv(args.cameras, args.width, args.height);
  std::filesystem::create_directories(args.out);

  Dataset truth;
  const bool have_truth = !args.truth.empty();
  if (have_truth) truth = read_dataset(args.truth, args.width, args.height);

  std::ofstream metrics_csv;
  if (have_truth) {
    metrics_csv.open(args.out + "/metrics.csv");
    metrics_csv << "view_id,psnr_db,normal_mae_deg,disparity_rmse\n";
    metrics_csv.precision(17);
    std::cout << "foreground mask: accumulated weight >= " << kForegroundWeight << "\n";
  }

  for (const Camera& cam : cameras) {
    const ViewMaps maps = render_view(field, cam, args.samples, args.t_near, args.t_far);
    char stem[48];
    std::snprintf(stem, sizeof(stem), "/render_%03d", cam.view_id);
    write_ppm(args.out + stem + std::string(".ppm"), maps.image);
    write_float_map(args.out + stem + std::string("_depth.f32"), scalars_to_float(maps.depth));
    write_float_map(args.out + stem + std::string("_disparity.f32"),
                    scalars_to_float(maps.disparity));
    write_float_map(args.out + stem + std::string("_normal.f32"),
                    vectors_to_float(maps.normal));
    if (have_truth) {
      const GroundTruthView* gt = nullptr;
      for (std::size_t i = 0; i < truth.cameras.size(); ++i)
        if (truth.cameras[i].view_id == cam.view_id) gt = &truth.views[i];
      if (!gt) throw ConfigError("truth dataset has no view " + std::to_string(cam.view_id));
      const Metrics m = compute_metrics({maps}, {*gt});
      metrics_csv << cam.view_id << ',' << m.psnr_db << ',' << m.normal_mae_deg << ','
                  << m.disparity_rmse << '\n';
    }
  }
}

struct TrainArgs {
  std::string config;
  std::string scene_override;
  std::string finetune;
  std::string out;
  bool no_reg = false;
};

void cmd_train(const TrainArgs& args) {
  TrainConfig cfg = train_config_from_kv(KeyValueConfig::parse_file(args.config));
  if (!args.scene_override.empty()) {
    if (args.scene_override == "plane")
      cfg.scene.kind = SceneKind::plane;
    else if (args.scene_override == "sphere")
      cfg.scene.kind = SceneKind::sphere;
    else
      throw ConfigError("--scene must be plane or sphere");
  }
  if (args.no_reg) cfg.reg_enabled = false;

  const AnalyticScene scene = AnalyticScene::make_default(cfg.scene.kind);
  const int size = cfg.scene.image_size;
  const Dataset train_data = make_dataset(scene, 0, cfg.scene.n_train_views, size, size);

  std::unique_ptr<GridField> field;
  if (!args.finetune.empty()) {
    field = std::make_unique<GridField>(GridField::load(args.finetune));
    cfg = make_finetune_config(cfg, cfg.schedule.total_iterations, cfg.learning_rate,
                               cfg.reg.weights.lambda_b == 0.0);
  } else {
    field = std::make_unique<GridField>(scene.bounds, cfg.dims);
    field->init_random(cfg.seed);
  }

  run_training(*field, train_data, cfg, args.out);

  if (cfg.scene.n_eval_views > 0) {
    const Dataset eval_data =
        make_dataset(scene, cfg.scene.n_train_views, cfg.scene.n_eval_views, size, size);
    const Metrics m = evaluate_field(*field, eval_data, cfg);
    std::cout << "eval: psnr_db=" << m.psnr_db << " normal_mae_deg=" << m.normal_mae_deg
              << " disparity_rmse=" << m.disparity_rmse << "\n";
  }
}

struct EvalArgs {
  std::string config;
  std::string out;
  bool ablate = false;
};

void cmd_eval(const EvalArgs& args) {
  ExperimentSpec spec;
  spec.config = train_config_from_kv(KeyValueConfig::parse_file(args.config));
  spec.out_dir = args.out;
  spec.ablate = args.ablate;
  const Report report = run_experiment(spec);
  std::cout << "control:   psnr_db=" << report.control.metrics.psnr_db
            << " normal_mae_deg=" << report.control.metrics.normal_mae_deg
            << " disparity_rmse=" << report.control.metrics.disparity_rmse << "\n";
  std::cout << "treatment: psnr_db=" << report.treatment.metrics.psnr_db
            << " normal_mae_deg=" << report.treatment.metrics.normal_mae_deg
            << " disparity_rmse=" << report.treatment.metrics.disparity_rmse << "\n";
  std::cout << "delta:     psnr_db=" << report.delta.psnr_db
            << " normal_mae_deg=" << report.delta.normal_mae_deg
            << " disparity_rmse=" << report.delta.disparity_rmse << "\n";
}

struct LossesArgs {
  std::string checkpoint;
  std::string cameras;
  int view = 0;
  int stride = 1;
  int width = 48, height = 48, samples = 64;
  double t_near = 0.6, t_far = 4.2;
  std::uint64_t seed = 0;
  int n = 32;
  int k = 3;
  std::string out;
  std::string dump_batch;
};

void cmd_losses(const LossesArgs& args) {
  const GridField field = GridField::load(args.checkpoint);
  const std::vector<Camera> cameras = read_cameras_csv(args.cameras, args.width, args.height);
  const Camera* cam = nullptr;
  for (const Camera& c : cameras)
    if (c.view_id == args.view) cam = &c;
  if (!cam) throw ConfigError("camera csv has no view " + std::to_string(args.view));

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    if (!file) throw ConfigError("cannot write " + args.out);
    os = &file;
  }
  os->precision(17);
  *os << "ray_id,L_d,L_n,L_b,L_s,w_star\n";

  std::ofstream dump;
  if (!args.dump_batch.empty()) {
    dump.open(args.dump_batch);
    if (!dump) throw ConfigError("cannot write " + args.dump_batch);
    dump << "ray_id,j,kind,x,y,z,dx,dy,dz,tau,nx,ny,nz,cs_r,cs_g,cs_b\n";
    dump.precision(17);
  }

  RegConfig reg;
  reg.stv_k = args.k;
  const SampleSphere base = make_sample_sphere({args.n, args.seed});
  const std::vector<double> endpoints =
      stratified_endpoints(args.t_near, args.t_far, args.samples, nullptr);

  for (int py = 0; py < cam->height; py += args.stride) {
    for (int px = 0; px < cam->width; px += args.stride) {
      const int ray_id = py * cam->width + px;
      const Ray ray = cam->pixel_ray(px, py);
      const RaySamples samples = sample_ray(field, ray, endpoints, true);
      const RenderResult res = render_ray(samples);
      const auto cand = select_surface(samples, res);
      RegLossValues vals;
      double w_star = 0.0;
      if (cand) {
        w_star = cand->w_star;
        const SampleSphere sphere =
            rotated(base, rotation_for(args.seed, 0, static_cast<std::uint64_t>(ray_id)));
        RegBatch batch = make_reg_batch(*cand, sphere);
        populate_reg_batch(batch, field);
        vals = total_regularization(*cand, batch, reg);
        if (dump.is_open()) {
          for (int j = 0; j < batch.size(); ++j) {
            const Vec3& p = batch.spatial_points[j];
            const Vec3& d = batch.spatial_dirs[j];
            const Vec3& nn = batch.spatial_normals[j];
            dump << ray_id << ',' << j << ",spatial," << p.x() << ',' << p.y() << ',' << p.z()
                 << ',' << d.x() << ',' << d.y() << ',' << d.z() << ',' << batch.spatial_tau[j]
                 << ',' << nn.x() << ',' << nn.y() << ',' << nn.z() << ",0,0,0\n";
          }
          for (std::size_t j = 0; j < batch.directional_dirs.size(); ++j) {
            const Vec3& p = batch.directional_point;
            const Vec3& d = batch.directional_dirs[j];
            const Vec3& c = batch.directional_specular[j];
            dump << ray_id << ',' << j << ",directional," << p.x() << ',' << p.y() << ','
                 << p.z() << ',' << d.x() << ',' << d.y() << ',' << d.z() << ",0,0,0,0,"
                 << c.x() << ',' << c.y() << ',' << c.z() << '\n';
          }
        }
      }
      *os << ray_id << ',' << vals.density << ',' << vals.normal << ',' << vals.bias << ','
          << vals.tv << ',' << w_star << '\n';
    }
  }
}

struct ScheduleArgs {
  int initial = 512;
  int final_period = 4;
  int total = 25000;
};

void cmd_schedule(const ScheduleArgs& args) {
  CurriculumSchedule schedule{args.initial, args.final_period, args.total};
  schedule_preview(schedule, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surface-light-field regularization toolkit"};
  app.require_subcommand(1);

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "emit the deterministic sphere lattice as CSV");
  sample->add_option("--n", sample_args.n, "sample count (power of two)");
  std::uint64_t rotate_seed = 0;
  auto* rot_opt = sample->add_option("--rotate-seed", rotate_seed, "apply a seeded rotation");
  sample->add_option("--out", sample_args.out, "output file (default stdout)");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "render a field checkpoint along a camera rig");
  render->add_option("--checkpoint", render_args.checkpoint)->required();
  render->add_option("--cameras", render_args.cameras)->required();
  render->add_option("--out", render_args.out)->required();
  render->add_option("--truth", render_args.truth, "ground-truth dataset dir for metrics.csv");
  render->add_option("--width", render_args.width);
  render->add_option("--height", render_args.height);
  render->add_option("--samples", render_args.samples);
  render->add_option("--t-near", render_args.t_near);
  render->add_option("--t-far", render_args.t_far);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the grid field on a synthetic scene");
  train->add_option("--config", train_args.config)->required();
  train->add_option("--scene", train_args.scene_override, "plane|sphere override");
  train->add_flag("--no-reg", train_args.no_reg, "disable surface regularization");
  train->add_option("--finetune", train_args.finetune, "continue from a checkpoint");
  train->add_option("--out", train_args.out)->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "paired regularized-vs-control experiment");
  eval->add_option("--config", eval_args.config)->required();
  eval->add_option("--out", eval_args.out)->required();
  eval->add_flag("--ablate", eval_args.ablate, "add the drop-one-loss grid");

  LossesArgs losses_args;
  auto* losses = app.add_subcommand("losses", "per-ray surface losses for a checkpoint");
  losses->add_option("--checkpoint", losses_args.checkpoint)->required();
  losses->add_option("--cameras", losses_args.cameras)->required();
  losses->add_option("--view", losses_args.view);
  losses->add_option("--stride", losses_args.stride);
  losses->add_option("--width", losses_args.width);
  losses->add_option("--height", losses_args.height);
  losses->add_option("--samples", losses_args.samples);
  losses->add_option("--t-near", losses_args.t_near);
  losses->add_option("--t-far", losses_args.t_far);
  losses->add_option("--seed", losses_args.seed);
  losses->add_option("--n", losses_args.n, "regularization sample count");
  losses->add_option("--k", losses_args.k, "total-variation neighbour count");
  losses->add_option("--out", losses_args.out, "output file (default stdout)");
  losses->add_option("--dump-batch", losses_args.dump_batch, "write the full batches as CSV");

  ScheduleArgs schedule_args;
  auto* schedule = app.add_subcommand("schedule", "preview the regularization staircase");
  schedule->add_option("--initial", schedule_args.initial);
  schedule->add_option("--final", schedule_args.final_period);
  schedule->add_option("--total", schedule_args.total);

  try {
    app.parse(argc, argv);
    if (sample->parsed()) {
      if (rot_opt->count() > 0) sample_args.rotate_seed = rotate_seed;
      cmd_sample(sample_args);
    } else if (render->parsed()) {
      cmd_render(render_args);
    } else if (train->parsed()) {
      cmd_train(train_args);
    } else if (eval->parsed()) {
      cmd_eval(eval_args);
    } else if (losses->parsed()) {
      cmd_losses(losses_args);
    } else if (schedule->parsed()) {
      cmd_schedule(schedule_args);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const surfreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const surfreg::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
