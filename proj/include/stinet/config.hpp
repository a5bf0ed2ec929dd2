#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stinet/losses.hpp"
#include "stinet/model.hpp"

namespace stinet {

struct DataConfig {
  // data.synthetic.*
  int64_t T = 7, H = 256, W = 256, num_clips = 8;
  int num_objects = 3;
  double max_speed = 3.0;
  uint64_t seed = 1234;
  int64_t eval_clips = 2;
  // data.*
  int64_t crop_lr = 32;
  int64_t scale = 4;
  bool augment = true;
  std::string path;  // when set, load clips from this dataset directory
};

struct TrainConfig {
  double lr0 = 1e-4;
  double decay_factor = 4;
  int64_t decay_every = 2000;
  int64_t total_iters = 5000;
  int64_t batch_size = 4;
  uint64_t seed = 0;
  int threads = 2;
  int64_t flow_pretrain_iters = 400;
  double flow_lr = 1e-3;
  int64_t log_every = 50;
  // interpolation tasks sampled during training: given-frame strides over
  // the T-frame clips; stride g trains n_interp = g-1
  std::vector<int64_t> task_strides = {2};

  void validate() const {
    STINET_CHECK(lr0 > 0, "train: lr0 must be > 0");
    STINET_CHECK(decay_factor > 1, "train: decay_factor must be > 1");
    STINET_CHECK(total_iters >= 0 && batch_size >= 1, "train: bad iteration/batch settings");
  }
};

struct LossConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
};

struct EvalConfig {
  bool rgb = false;
  double psnr_cap = 100;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  LossConfig loss;
  MclConfig mcl;
  TrainConfig train;
  EvalConfig eval;
};

namespace detail {

template <typename T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline OffsetsMode parse_offsets(const std::string& s) {
  if (s == "both") return OffsetsMode::Both;
  if (s == "lr_only") return OffsetsMode::LrOnly;
  if (s == "hr_only") return OffsetsMode::HrOnly;
  fail("config: model.stlr.offsets must be both|lr_only|hr_only, got ", s);
}
inline std::string offsets_name(OffsetsMode m) {
  switch (m) {
    case OffsetsMode::LrOnly: return "lr_only";
    case OffsetsMode::HrOnly: return "hr_only";
    default: return "both";
  }
}
inline AbsMode parse_abs(const std::string& s) {
  if (s == "on") return AbsMode::On;
  if (s == "off") return AbsMode::Off;
  if (s == "adjacent") return AbsMode::Adjacent;
  fail("config: mcl.abs must be on|off|adjacent, got ", s);
}
inline std::string abs_name(AbsMode m) {
  switch (m) {
    case AbsMode::Off: return "off";
    case AbsMode::Adjacent: return "adjacent";
    default: return "on";
  }
}
inline RelMode parse_rel(const std::string& s) {
  if (s == "on") return RelMode::On;
  if (s == "off") return RelMode::Off;
  if (s == "strong") return RelMode::Strong;
  fail("config: mcl.rel must be on|off|strong, got ", s);
}
inline std::string rel_name(RelMode m) {
  switch (m) {
    case RelMode::Off: return "off";
    case RelMode::Strong: return "strong";
    default: return "on";
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json j;
  j["data"]["synthetic"] = {{"T", c.data.T},
                            {"H", c.data.H},
                            {"W", c.data.W},
                            {"num_clips", c.data.num_clips},
                            {"num_objects", c.data.num_objects},
                            {"max_speed", c.data.max_speed},
                            {"seed", c.data.seed},
                            {"eval_clips", c.data.eval_clips}};
  j["data"]["crop_lr"] = c.data.crop_lr;
  j["data"]["scale"] = c.data.scale;
  j["data"]["augment"] = c.data.augment;
  j["data"]["path"] = c.data.path;
  j["model"]["channels"] = c.model.channels;
  j["model"]["use_hr"] = c.model.use_hr;
  j["model"]["use_lr"] = c.model.use_lr;
  j["model"]["stfi"] = {{"shared", c.model.stfi_shared},
                        {"num_shared_blocks", c.model.stfi_blocks}};
  j["model"]["stlr"] = {{"enabled", c.model.stlr_enabled},
                        {"inet", c.model.stlr_inet},
                        {"offsets", detail::offsets_name(c.model.stlr_offsets)}};
  j["model"]["stgr"] = {{"enabled", c.model.stgr_enabled},
                        {"layers", c.model.stgr_layers},
                        {"edge", {{"EF", c.model.edge_ef}, {"EP", c.model.edge_ep},
                                  {"ET", c.model.edge_et}}}};
  j["model"]["flow"] = {{"use", c.model.flow_use},
                        {"adaption", c.model.flow_adaption},
                        {"channels", c.model.flow_channels}};
  j["loss"] = {{"lambda1", c.loss.lambda1}, {"lambda2", c.loss.lambda2}};
  j["mcl"] = {{"abs", detail::abs_name(c.mcl.abs)},
              {"abs_norm", c.mcl.abs_norm == AbsNorm::L1 ? "l1" : "l2"},
              {"rel", detail::rel_name(c.mcl.rel)}};
  j["train"] = {{"lr0", c.train.lr0},
                {"decay_factor", c.train.decay_factor},
                {"decay_every", c.train.decay_every},
                {"total_iters", c.train.total_iters},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"threads", c.train.threads},
                {"flow_pretrain_iters", c.train.flow_pretrain_iters},
                {"flow_lr", c.train.flow_lr},
                {"log_every", c.train.log_every},
                {"task_strides", c.train.task_strides}};
  j["eval"] = {{"rgb", c.eval.rgb}, {"psnr_cap", c.eval.psnr_cap}};
  return j;
}

inline Config config_from_json(const nlohmann::json& j) {
  using detail::get_to;
  Config c;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      get_to(s, "T", c.data.T);
      get_to(s, "H", c.data.H);
      get_to(s, "W", c.data.W);
      get_to(s, "num_clips", c.data.num_clips);
      get_to(s, "num_objects", c.data.num_objects);
      get_to(s, "max_speed", c.data.max_speed);
      get_to(s, "seed", c.data.seed);
      get_to(s, "eval_clips", c.data.eval_clips);
    }
    get_to(d, "crop_lr", c.data.crop_lr);
    get_to(d, "scale", c.data.scale);
    get_to(d, "augment", c.data.augment);
    get_to(d, "path", c.data.path);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get_to(m, "channels", c.model.channels);
    get_to(m, "use_hr", c.model.use_hr);
    get_to(m, "use_lr", c.model.use_lr);
    if (m.contains("stfi")) {
      get_to(m.at("stfi"), "shared", c.model.stfi_shared);
      get_to(m.at("stfi"), "num_shared_blocks", c.model.stfi_blocks);
    }
    if (m.contains("stlr")) {
      get_to(m.at("stlr"), "enabled", c.model.stlr_enabled);
      get_to(m.at("stlr"), "inet", c.model.stlr_inet);
      if (m.at("stlr").contains("offsets"))
        c.model.stlr_offsets = detail::parse_offsets(m.at("stlr").at("offsets"));
    }
    if (m.contains("stgr")) {
      get_to(m.at("stgr"), "enabled", c.model.stgr_enabled);
      get_to(m.at("stgr"), "layers", c.model.stgr_layers);
      if (m.at("stgr").contains("edge")) {
        get_to(m.at("stgr").at("edge"), "EF", c.model.edge_ef);
        get_to(m.at("stgr").at("edge"), "EP", c.model.edge_ep);
        get_to(m.at("stgr").at("edge"), "ET", c.model.edge_et);
      }
    }
    if (m.contains("flow")) {
      get_to(m.at("flow"), "use", c.model.flow_use);
      get_to(m.at("flow"), "adaption", c.model.flow_adaption);
      get_to(m.at("flow"), "channels", c.model.flow_channels);
    }
  }
  if (j.contains("loss")) {
    get_to(j.at("loss"), "lambda1", c.loss.lambda1);
    get_to(j.at("loss"), "lambda2", c.loss.lambda2);
  }
  if (j.contains("mcl")) {
    const auto& m = j.at("mcl");
    if (m.contains("abs")) c.mcl.abs = detail::parse_abs(m.at("abs"));
    if (m.contains("abs_norm"))
      c.mcl.abs_norm = m.at("abs_norm") == "l1" ? AbsNorm::L1 : AbsNorm::L2;
    if (m.contains("rel")) c.mcl.rel = detail::parse_rel(m.at("rel"));
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get_to(t, "lr0", c.train.lr0);
    get_to(t, "decay_factor", c.train.decay_factor);
    get_to(t, "decay_every", c.train.decay_every);
    get_to(t, "total_iters", c.train.total_iters);
    get_to(t, "batch_size", c.train.batch_size);
    get_to(t, "seed", c.train.seed);
    get_to(t, "threads", c.train.threads);
    get_to(t, "flow_pretrain_iters", c.train.flow_pretrain_iters);
    get_to(t, "flow_lr", c.train.flow_lr);
    get_to(t, "log_every", c.train.log_every);
    get_to(t, "task_strides", c.train.task_strides);
  }
  if (j.contains("eval")) {
    get_to(j.at("eval"), "rgb", c.eval.rgb);
    get_to(j.at("eval"), "psnr_cap", c.eval.psnr_cap);
  }
  c.train.validate();
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  STINET_CHECK(in.good(), "config: cannot open ", path);
  return config_from_json(nlohmann::json::parse(in));
}

// Dotted-path override, e.g. "model.stlr.enabled" = false.
inline void apply_override(nlohmann::json& j, const std::string& path,
                           const nlohmann::json& value) {
  nlohmann::json* node = &j;
  size_t pos = 0;
  while (true) {
    const size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

// FNV-1a hash of the architecture-affecting subtrees; used to detect
// checkpoint/config mismatches (notably different ablation flags).
inline uint64_t config_fingerprint(const Config& c) {
  nlohmann::json j = config_to_json(c);
  nlohmann::json sub;
  sub["model"] = j["model"];
  sub["mcl"] = j["mcl"];
  sub["loss"] = j["loss"];
  sub["scale"] = j["data"]["scale"];
  const std::string s = sub.dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// STINET_DETERMINISTIC=1 forces fixed seeds (and the reduction orders are
// fixed by construction everywhere).
inline bool deterministic_env() {
  const char* v = std::getenv("STINET_DETERMINISTIC");
  return v && std::string(v) == "1";
}

}  // namespace stinet
