#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "adagrpo/environment.hpp"
#include "adagrpo/trainer.hpp"

namespace adagrpo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  EnvironmentSpec env = default_environment();
  CurriculumSchedule schedule = default_schedule();
  TrainerConfig trainer;
  SftConfig sft;
  int eval_tasks = 5000;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

// Plain-text configuration, INI style ('#' or ';' comments):
//
//   [experiment]   seed, output_dir, eval_tasks
//   [environment]  answers, cue_noise
//   [family NAME]  signal_sym, signal_vis, noise_std        (repeatable)
//   [phase NAME]   mixture = FAM:w, FAM:w ...; difficulty;  (repeatable,
//                  iterations                                 file order)
//   [trainer]      variant, n, clip_eps, kl_coef, temperature, lr, momentum,
//                  iterations, inner_epochs, curriculum, center_mode_advantage,
//                  format_weight, reference, probe_every, probe_tasks_per_family
//   [sft]          enabled, demos_per_family, grd_share, steps, lr, momentum
//
// Any family or phase section replaces the built-in families or schedule as
// a whole. Overrides use "section.key=value", e.g. "trainer.lr=0.1",
// "family SYM-EASY.signal_sym=1.5" or
// "phase binary.iterations=100"; the latter two edit the built-in sections
// when the file declares none of that kind.

ExperimentConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Full INI rendering; parse_config(render_config(c)) reproduces c.
std::string render_config(const ExperimentConfig& config);

}  // namespace adagrpo
