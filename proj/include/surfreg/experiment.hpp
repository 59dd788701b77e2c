#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "surfreg/config.hpp"
#include "surfreg/trainer.hpp"

namespace surfreg {

/// A paired run: the treatment trains with surface regularization, the
/// control with it disabled; everything else (seed, data, schedule length)
/// is shared.
struct ExperimentSpec {
  TrainConfig config;
  std::string out_dir;
  bool ablate = false;
};

struct RunMetrics {
  std::string name;
  Metrics metrics;
};

struct Report {
  RunMetrics control;
  RunMetrics treatment;
  Metrics delta;  // treatment - control
  std::vector<RunMetrics> ablation;
};

/// Runs control and treatment with shared seeds, evaluates on held-out
/// views, and writes report.csv plus per-view comparison strips
/// (rendered | diffuse | specular | depth). Rows completed before a failure
/// are flushed. With `ablate`, four extra runs drop one loss each.
Report run_experiment(const ExperimentSpec& spec);

/// Prints stage boundaries, periods, per-stage and cumulative regularized
/// step counts, and the extra-cost estimate assuming a regularized step
/// costs twice a plain one.
void schedule_preview(const CurriculumSchedule& schedule, std::ostream& out);

}  // namespace surfreg
