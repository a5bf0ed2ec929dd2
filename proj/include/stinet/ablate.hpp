#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stinet/plotpng.hpp"
#include "stinet/train.hpp"

namespace stinet {

struct AblateVariant {
  std::string name;
  nlohmann::json overrides;  // dotted config path -> value
};

struct AblateResult {
  std::string name;
  bool ok = false;
  std::string error;
  EvalReport eval;
  double train_seconds = 0;
};

inline Config apply_variant(const Config& base, const AblateVariant& v) {
  nlohmann::json j = config_to_json(base);
  for (const auto& [path, value] : v.overrides.items()) apply_override(j, path, value);
  return config_from_json(j);
}

// Trains and evaluates every variant under identical seeds. Per-variant
// failures are recorded and the suite continues.
template <typename S = float>
std::vector<AblateResult> run_ablation_suite(const Config& base,
                                             const std::vector<AblateVariant>& variants,
                                             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<AblateResult> results;
  for (const auto& v : variants) {
    AblateResult r;
    r.name = v.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Config cfg = apply_variant(base, v);
      TrainEngine<S> engine(cfg);
      engine.run();
      r.eval = engine.evaluate();
      engine.save(out_dir + "/" + v.name + ".ckpt");
      std::ofstream(out_dir + "/" + v.name + "_report.json")
          << engine.train_report().dump(2) << "\n";
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "[ablate] %s: %s (%.1fs)\n", r.name.c_str(),
                 r.ok ? "ok" : r.error.c_str(), r.train_seconds);
    results.push_back(std::move(r));
  }

  // comparison table (json + text) and a PSNR bar chart
  nlohmann::json table = nlohmann::json::array();
  std::ostringstream txt;
  txt << std::left << std::setw(24) << "variant" << std::setw(12) << "psnr" << std::setw(12)
      << "ssim" << std::setw(12) << "seconds" << "status\n";
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& r : results) {
    nlohmann::json row;
    row["name"] = r.name;
    row["ok"] = r.ok;
    row["train_seconds"] = r.train_seconds;
    if (r.ok) {
      row["eval"] = r.eval.to_json();
      bars.push_back({r.name, r.eval.mean_psnr});
      txt << std::left << std::setw(24) << r.name << std::setw(12) << r.eval.mean_psnr
          << std::setw(12) << r.eval.mean_ssim << std::setw(12) << r.train_seconds << "ok\n";
    } else {
      row["error"] = r.error;
      txt << std::left << std::setw(24) << r.name << std::setw(12) << "-" << std::setw(12) << "-"
          << std::setw(12) << r.train_seconds << ("FAILED: " + r.error) << "\n";
    }
    table.push_back(row);
  }
  std::ofstream(out_dir + "/table.json") << table.dump(2) << "\n";
  std::ofstream(out_dir + "/table.txt") << txt.str();
  if (!bars.empty()) plot::bar_chart(bars, out_dir + "/psnr.png");
  return results;
}

inline std::pair<Config, std::vector<AblateVariant>> load_ablation_matrix(
    const std::string& path) {
  std::ifstream in(path);
  STINET_CHECK(in.good(), "ablate: cannot open matrix file ", path);
  nlohmann::json j = nlohmann::json::parse(in);
  Config base = config_from_json(j.value("base", nlohmann::json::object()));
  std::vector<AblateVariant> variants;
  for (const auto& v : j.at("variants")) {
    AblateVariant var;
    var.name = v.at("name").get<std::string>();
    var.overrides = v.value("overrides", nlohmann::json::object());
    variants.push_back(std::move(var));
  }
  return {base, variants};
}

}  // namespace stinet
