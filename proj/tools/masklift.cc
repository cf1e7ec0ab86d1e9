// masklift: command-line driver for the synthetic instance-lifting pipeline.
//
// Exit status: 0 ok, 2 config error, 3 data/format error, 4 invariant
// violation or internal error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "masklift/config.h"
#include "masklift/error.h"
#include "masklift/pipeline.h"

namespace {

int exit_code(masklift::ErrorCode code) {
  using masklift::ErrorCode;
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kBadParams:
      return 2;
    case ErrorCode::kInvariantViolation:
      return 4;
    default:
      return 3;
  }
}

struct CommonFlags {
  std::string config;
  std::string out;
  int threads = -1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "pipeline config file")->required();
  cmd->add_option("--out", f.out, "output directory (overrides run.out)");
  cmd->add_option("--threads", f.threads, "worker threads (overrides run.threads)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", f.seed, "master seed (overrides run.seed)");
}

masklift::PipelineConfig resolve(const CommonFlags& f) {
  masklift::PipelineConfig cfg = masklift::load_pipeline_config(f.config);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.threads >= 0) cfg.threads = f.threads;
  if (f.seed) cfg.seed = f.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masklift: view-consistent instance labels from inconsistent 2D masks"};
  app.require_subcommand(1);
  app.footer("Config keys (section.key = default):\n" + masklift::config_reference());

  CommonFlags flags;
  std::string checkpoint, cameras;

  auto* synth = app.add_subcommand("synth", "render the scene, corrupt masks, write matches");
  add_common(synth, flags);
  auto* run = app.add_subcommand("run", "full pipeline: correspondence to final renders");
  add_common(run, flags);
  auto* loc = app.add_subcommand("loc", "localize fast-frontend regions in novel views");
  add_common(loc, flags);
  loc->add_option("--checkpoint", checkpoint, "field checkpoint (default OUT/field.lf)");
  loc->add_option("--cameras", cameras, "camera file of the novel views")->required();
  auto* eval = app.add_subcommand("eval", "recompute metrics from images on disk");
  add_common(eval, flags);
  auto* render = app.add_subcommand("render", "render a checkpoint to label images");
  add_common(render, flags);
  render->add_option("--checkpoint", checkpoint, "field checkpoint (default OUT/field.lf)");
  render->add_option("--cameras", cameras, "camera file (default OUT/cameras.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const masklift::PipelineConfig cfg = resolve(flags);
    const std::string out = cfg.out_dir;
    if (checkpoint.empty()) checkpoint = out + "/field.lf";
    if (*synth) {
      masklift::cmd_synth(cfg);
    } else if (*run) {
      const auto r = masklift::cmd_run(cfg);
      std::cout << "pq=" << r.final_report.pq << " pseudolabel_pq=" << r.pseudolabel_report.pq
                << " labels=" << r.instance_map.assignment.label_count() << '\n';
    } else if (*loc) {
      masklift::cmd_loc(cfg, checkpoint, cameras);
    } else if (*eval) {
      masklift::cmd_eval(cfg);
    } else if (*render) {
      masklift::cmd_render(cfg, checkpoint, cameras.empty() ? out + "/cameras.txt" : cameras);
    }
  } catch (const masklift::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
