#include "masklift/pipeline.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "masklift/io.h"
#include "test_util.h"

namespace masklift {
namespace {

namespace fs = std::filesystem;

// Two spheres, short orbit, small field: the whole run takes a few seconds.
PipelineConfig small_config(const std::string& out) {
  PipelineConfig c = parse_pipeline_config(
      "[run]\nseed = 1\n"
      "[scene]\nprimitive = sphere 1 -0.6 0 0 0.45\nprimitive = sphere 2 0.6 0 0 0.45\n"
      "[camera]\nwidth = 48\nheight = 48\n"
      "[trajectory]\nframes = 8\nradius = 3.0\nheight = 1.0\n"
      "[matching]\nkeypoints = 3000\n"
      "[field]\nlevels = 8 16 32\n"
      "[train]\niterations = 150\nrays = 256\n"
      "[render]\nsamples = 32\n"
      "[refine]\nviews = 4\n");
  c.out_dir = out;
  c.validate();
  return c;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

TEST(Pipeline, SynthManifestIsDeterministic) {
  const auto a = small_config(testing::scratch_dir("pipe_synth_a"));
  const auto b = small_config(testing::scratch_dir("pipe_synth_b"));
  cmd_synth(a);
  cmd_synth(b);
  const std::string manifest = slurp(a.out_dir + "/manifest.txt");
  EXPECT_EQ(manifest, slurp(b.out_dir + "/manifest.txt"));
  EXPECT_NE(manifest.find("matches.txt"), std::string::npos);
  EXPECT_NE(manifest.find("masks/"), std::string::npos);

  // Artifacts round-trip.
  const SceneData fresh = synthesize(a);
  const SceneData back = load_synth(a);
  ASSERT_EQ(back.frames.size(), fresh.frames.size());
  for (std::size_t i = 0; i < fresh.frames.size(); ++i) {
    EXPECT_EQ(back.frames[i].instance_image, fresh.frames[i].instance_image);
    EXPECT_EQ(back.masks[i], fresh.masks[i]);
  }
}

TEST(Pipeline, UnwritableOutputIsIoError) {
  const std::string dir = testing::scratch_dir("pipe_unwritable");
  std::ofstream(dir + "/blocker") << "x";
  const auto cfg = small_config(dir + "/blocker/out");
  EXPECT_EQ(testing::code_of([&] { cmd_synth(cfg); }), ErrorCode::kIoError);
}

class PipelineRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new PipelineConfig(small_config(testing::scratch_dir("pipe_run")));
    result_ = new RunResult(cmd_run(*cfg_));
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete result_;
  }
  static PipelineConfig* cfg_;
  static RunResult* result_;
};
PipelineConfig* PipelineRun::cfg_ = nullptr;
RunResult* PipelineRun::result_ = nullptr;

TEST_F(PipelineRun, ReportsAndTimings) {
  EXPECT_EQ(result_->pseudolabel_report.pq, 1.0);
  EXPECT_EQ(result_->final_report.total_reference, 2u);
  const std::string timings = slurp(cfg_->out_dir + "/timings.txt");
  for (const char* stage : {"correspondence", "instance_map", "lift-train", "merge", "render"}) {
    EXPECT_NE(timings.find(stage), std::string::npos) << stage;
  }
  EXPECT_NE(slurp(cfg_->out_dir + "/metrics.txt").find("pq="), std::string::npos);
  const LabelField saved = load_field(cfg_->out_dir + "/field.lf");
  EXPECT_EQ(saved, result_->field);
}

TEST_F(PipelineRun, SecondRunIsByteIdentical) {
  const auto again = small_config(testing::scratch_dir("pipe_run_again"));
  cmd_run(again);
  EXPECT_EQ(slurp(cfg_->out_dir + "/run_manifest.txt"), slurp(again.out_dir + "/run_manifest.txt"));
}

TEST_F(PipelineRun, EvalReproducesMetrics) {
  const std::string before = slurp(cfg_->out_dir + "/metrics.txt");
  cmd_eval(*cfg_);
  EXPECT_EQ(slurp(cfg_->out_dir + "/metrics.txt"), before);
}

TEST_F(PipelineRun, CorruptCheckpointOnResume) {
  auto cfg = small_config(testing::scratch_dir("pipe_resume"));
  for (const auto& e : fs::directory_iterator(cfg_->out_dir)) {
    if (e.is_regular_file()) fs::copy_file(e.path(), fs::path(cfg.out_dir) / e.path().filename());
  }
  cmd_synth(cfg);
  std::ofstream(cfg.out_dir + "/field.lf", std::ios::binary) << "XXXXjunk";
  cfg.resume = true;
  EXPECT_EQ(testing::code_of([&] { cmd_run(cfg); }), ErrorCode::kFormatError);
}

TEST_F(PipelineRun, LocEmptyCamerasIsNoOp) {
  auto cfg = *cfg_;
  cfg.out_dir = testing::scratch_dir("pipe_loc_empty");
  std::ofstream(cfg.out_dir + "/none.txt") << "";
  cmd_loc(cfg, cfg_->out_dir + "/field.lf", cfg.out_dir + "/none.txt");
  EXPECT_EQ(slurp(cfg.out_dir + "/loc_report.txt"), "views=0\n");
}

TEST_F(PipelineRun, LocWrongImageSize) {
  auto cfg = *cfg_;
  cfg.out_dir = testing::scratch_dir("pipe_loc_size");
  write_cameras_file(cfg.out_dir + "/cams.txt", {testing::orbit_camera(10, 32)});
  EXPECT_EQ(testing::code_of([&] {
              cmd_loc(cfg, cfg_->out_dir + "/field.lf", cfg.out_dir + "/cams.txt");
            }),
            ErrorCode::kShapeMismatch);
}

TEST_F(PipelineRun, LocDenoisesRenderedLabels) {
  auto cfg = *cfg_;
  cfg.out_dir = testing::scratch_dir("pipe_loc");
  fs::copy_file(cfg_->out_dir + "/merge_map.txt", cfg.out_dir + "/merge_map.txt");
  cmd_loc(cfg, cfg_->out_dir + "/field.lf", cfg_->out_dir + "/cameras.txt");
  const std::string report = slurp(cfg.out_dir + "/loc_report.txt");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(report, m, std::regex("\nmiou_loc=([0-9.]+) .*\nmiou_render=([0-9.]+)")));
  EXPECT_GE(std::stod(m[1]), std::stod(m[2]));
  EXPECT_TRUE(fs::exists(cfg.out_dir + "/loc/frame_0007.pgm"));
}

}  // namespace
}  // namespace masklift
