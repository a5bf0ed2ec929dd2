// stinet: space-time video super-resolution tool.
//
// Subcommands: train, infer, eval, ablate, plot. See README.md.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "stinet/ablate.hpp"
#include "stinet/flow.hpp"
#include "stinet/plotpng.hpp"
#include "stinet/train.hpp"

namespace fs = std::filesystem;
using namespace stinet;

namespace {

Config load_or_default(const std::string& path) {
  if (path.empty()) return Config{};
  return load_config(path);
}

int cmd_train(const std::string& config_path, int64_t seed, const std::string& out_dir) {
  Config cfg = load_or_default(config_path);
  if (seed >= 0) cfg.train.seed = uint64_t(seed);
  fs::create_directories(out_dir);
  TrainEngine<float> engine(cfg);
  engine.run();
  engine.save(out_dir + "/checkpoint.bin");
  auto rep = engine.train_report();
  auto eval = engine.evaluate();
  rep["eval"] = eval.to_json();
  std::ofstream(out_dir + "/report.json") << rep.dump(2) << "\n";
  std::cout << "checkpoint: " << out_dir << "/checkpoint.bin\n"
            << "mean psnr: " << eval.mean_psnr << " dB, mean ssim: " << eval.mean_ssim << "\n";
  return engine.diverged() ? 2 : 0;
}

int cmd_infer(const std::string& ckpt, const std::string& in_dir, int64_t n_interp,
              const std::string& out_dir) {
  auto lm = load_model<float>(ckpt);
  VideoClip clip = load_clip_dir(in_dir);
  auto frames = infer_clip(lm.model, lm.flownet, clip, n_interp);
  fs::create_directories(out_dir);
  char name[32];
  for (size_t t = 0; t < frames.size(); ++t) {
    std::snprintf(name, sizeof(name), "%06zu.png", t);
    write_png(out_dir + "/" + std::string(name), frames[t]);
  }
  std::cout << "wrote " << frames.size() << " frames (" << clip.T() << " + (" << clip.T()
            << "-1)*" << n_interp << ") to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& report_path,
             bool rgb, bool force, const std::string& config_path) {
  Config expected;
  const Config* expected_ptr = nullptr;
  if (!config_path.empty()) {
    expected = load_config(config_path);
    expected_ptr = &expected;
  }
  auto lm = load_model<float>(ckpt, expected_ptr);
  if (lm.fingerprint_mismatch) {
    std::cerr << "warning: checkpoint fingerprint does not match --config (different ablation "
                 "flags?)\n";
    if (!force) {
      std::cerr << "refusing to evaluate; pass --force to override\n";
      return 3;
    }
  }
  std::vector<VideoClip> clips;
  if (fs::is_directory(data)) {
    clips = load_dataset(data);
  } else {
    Config dcfg = load_config(data);
    clips = build_synthetic_dataset(dcfg.data, dcfg.data.eval_clips,
                                    dcfg.data.seed + 1000003).clips;
  }
  MetricOptions opt;
  opt.rgb = rgb || lm.cfg.eval.rgb;
  opt.psnr_cap = lm.cfg.eval.psnr_cap;
  auto rep = evaluate_clips(lm.model, lm.flownet, clips, lm.cfg.data.scale, opt, lm.fingerprint);
  std::ofstream(report_path) << rep.to_json().dump(2) << "\n";
  std::cout << "mean psnr: " << rep.mean_psnr << " dB, mean ssim: " << rep.mean_ssim << " ("
            << clips.size() << " clips) -> " << report_path << "\n";
  return 0;
}

int cmd_ablate(const std::string& matrix_path, const std::string& out_dir) {
  auto [base, variants] = load_ablation_matrix(matrix_path);
  auto results = run_ablation_suite<float>(base, variants, out_dir);
  int failures = 0;
  for (const auto& r : results)
    if (!r.ok) ++failures;
  std::cout << "ablation table: " << out_dir << "/table.txt (" << results.size() - failures
            << "/" << results.size() << " variants ok)\n";
  return failures == 0 ? 0 : 4;
}

int cmd_plot(const std::string& report_path, const std::string& out_png) {
  std::ifstream in(report_path);
  STINET_CHECK(in.good(), "plot: cannot open ", report_path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.contains("loss_curves")) {
    std::vector<plot::Series> series;
    const float colors[][3] = {{0.85f, 0.2f, 0.2f}, {0.2f, 0.45f, 0.8f}, {0.2f, 0.65f, 0.3f},
                               {0.75f, 0.55f, 0.1f}, {0.55f, 0.3f, 0.7f}, {0.3f, 0.3f, 0.3f}};
    size_t ci = 0;
    for (const auto& [name, values] : j.at("loss_curves").items()) {
      plot::Series s;
      s.name = name;
      s.values = values.get<std::vector<double>>();
      s.r = colors[ci % 6][0];
      s.g = colors[ci % 6][1];
      s.b = colors[ci % 6][2];
      ++ci;
      series.push_back(std::move(s));
    }
    plot::line_chart(series, out_png);
  } else if (j.is_array()) {  // ablation table
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& row : j)
      if (row.value("ok", false))
        bars.push_back({row.at("name").get<std::string>(),
                        row.at("eval").at("mean_psnr").get<double>()});
    plot::bar_chart(bars, out_png);
  } else {
    fail("plot: unrecognized report format in ", report_path);
  }
  std::cout << "wrote " << out_png << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stinet: space-time video super-resolution (4x upscale + frame interpolation)"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/train";
  int64_t seed = -1;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "config JSON (defaults when omitted)");
  train->add_option("--seed", seed, "override train.seed");
  train->add_option("--out", out_dir, "output directory");

  std::string ckpt, in_dir, infer_out = "runs/infer";
  int64_t n_interp = 1;
  auto* infer = app.add_subcommand("infer", "interpolate + upscale an LR clip directory");
  infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
  infer->add_option("--in", in_dir, "input clip directory (numbered PNG frames)")->required();
  infer->add_option("--n-interp", n_interp, "intermediate frames per gap (1, 3 or 5 typical)")
      ->check(CLI::PositiveNumber);
  infer->add_option("--out", infer_out, "output clip directory");

  std::string data, report_path = "report.json", eval_config;
  bool rgb = false, force = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (PSNR/SSIM)");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--data", data, "dataset directory (manifest.json) or config JSON")
      ->required();
  eval->add_option("--report", report_path, "output report JSON");
  eval->add_option("--config", eval_config, "config to fingerprint-check against");
  eval->add_flag("--rgb", rgb, "metrics over RGB instead of luma");
  eval->add_flag("--force", force, "proceed despite fingerprint mismatch");

  std::string matrix_path, ablate_out = "runs/ablate";
  auto* ablate = app.add_subcommand("ablate", "train/evaluate a matrix of config variants");
  ablate->add_option("--matrix", matrix_path, "matrix JSON file")->required();
  ablate->add_option("--out", ablate_out, "output directory");

  std::string plot_report, plot_out = "plot.png";
  auto* plotc = app.add_subcommand("plot", "render a report as a PNG chart");
  plotc->add_option("--report", plot_report, "train report or ablation table JSON")->required();
  plotc->add_option("--out", plot_out, "output PNG");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path, seed, out_dir);
    if (app.got_subcommand(infer)) return cmd_infer(ckpt, in_dir, n_interp, infer_out);
    if (app.got_subcommand(eval))
      return cmd_eval(ckpt, data, report_path, rgb, force, eval_config);
    if (app.got_subcommand(ablate)) return cmd_ablate(matrix_path, ablate_out);
    if (app.got_subcommand(plotc)) return cmd_plot(plot_report, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
