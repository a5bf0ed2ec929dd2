#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stinet/image.hpp"
#include "stinet/png_io.hpp"
#include "stinet/rng.hpp"

namespace stinet {

// Ordered frame sequence; all frames share one spatial size, samples in [0,1].
struct VideoClip {
  std::vector<Image> frames;
  std::string frame_rate_tag;  // metadata only

  int64_t T() const { return int64_t(frames.size()); }
  int64_t height() const { return frames.empty() ? 0 : frames[0].h; }
  int64_t width() const { return frames.empty() ? 0 : frames[0].w; }

  void validate() const {
    STINET_CHECK(frames.size() >= 2, "VideoClip: needs T >= 2");
    for (const auto& f : frames) {
      STINET_CHECK(f.h == frames[0].h && f.w == frames[0].w && f.c == frames[0].c,
                   "VideoClip: inconsistent frame shapes");
      for (float v : f.data) STINET_CHECK(v >= 0.f && v <= 1.f, "VideoClip: value outside [0,1]");
    }
  }
};

// ---- synthetic moving-texture clips ----

struct MotionSpec {
  int num_objects = 3;
  double max_speed = 3.0;  // px/frame at generation resolution
  // explicit per-object velocities; missing entries are drawn randomly
  std::vector<std::array<double, 2>> velocities;
  bool flat_background = false;
  double background_amplitude = 0.22;
};

namespace detail {

struct TexWave {
  double fx, fy, phase, amp;
};

struct SynthObject {
  double cx0, cy0;    // center at t = 0
  double vx, vy;      // px/frame
  double rx, ry;      // half extents
  bool ellipse;
  double base[3];     // base color
  std::vector<TexWave> waves;
};

inline double eval_waves(const std::vector<TexWave>& waves, double x, double y) {
  double v = 0;
  for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
  return v;
}

// Soft coverage of an object at a pixel; ~1.5 px edge so subpixel motion is
// smooth and centroids move linearly.
inline double coverage(const SynthObject& o, double t, double x, double y) {
  const double dx = x - (o.cx0 + o.vx * t);
  const double dy = y - (o.cy0 + o.vy * t);
  double dist;
  if (o.ellipse) {
    const double f = std::sqrt((dx / o.rx) * (dx / o.rx) + (dy / o.ry) * (dy / o.ry));
    dist = (f - 1.0) * std::min(o.rx, o.ry);
  } else {
    dist = std::max(std::abs(dx) - o.rx, std::abs(dy) - o.ry);
  }
  return std::clamp(0.5 - dist / 1.5, 0.0, 1.0);
}

}  // namespace detail

// Synthetic clip plus its analytic motion truth (object masks and flow
// fields), used for flow supervision and as test oracles.
class SyntheticClip {
 public:
  SyntheticClip(uint64_t seed, int64_t T, int64_t H, int64_t W, const MotionSpec& spec) {
    STINET_CHECK(T >= 3, "generate_synthetic_clip: T >= 3 required");
    STINET_CHECK(H % 4 == 0 && W % 4 == 0,
                 "generate_synthetic_clip: H and W must be divisible by 4");
    h_ = H;
    w_ = W;
    Rng rng(seed);
    // background
    bg_base_ = spec.flat_background ? 0.20 : 0.5;
    if (!spec.flat_background) {
      for (int k = 0; k < 4; ++k) {
        const double f = rng.uniform(0.5, 2.5) * 6.283185307179586 / double(std::min(H, W));
        const double ang = rng.uniform(0.0, 6.283185307179586);
        bg_waves_.push_back({f * std::cos(ang), f * std::sin(ang), rng.uniform(0.0, 6.28),
                             spec.background_amplitude / 2.2});
      }
    }
    // objects
    const double margin = 3.0;
    for (int i = 0; i < spec.num_objects; ++i) {
      detail::SynthObject o;
      if (size_t(i) < spec.velocities.size()) {
        o.vx = spec.velocities[i][0];
        o.vy = spec.velocities[i][1];
      } else {
        o.vx = rng.uniform(-spec.max_speed, spec.max_speed);
        o.vy = rng.uniform(-spec.max_speed, spec.max_speed);
      }
      o.rx = rng.uniform(double(W) / 9.0, double(W) / 5.5);
      o.ry = rng.uniform(double(H) / 9.0, double(H) / 5.5);
      o.ellipse = rng.uniform() < 0.5;
      const double travel_x = o.vx * double(T - 1), travel_y = o.vy * double(T - 1);
      const double lo_x = margin + o.rx + std::max(0.0, -travel_x);
      const double hi_x = double(W - 1) - margin - o.rx - std::max(0.0, travel_x);
      const double lo_y = margin + o.ry + std::max(0.0, -travel_y);
      const double hi_y = double(H - 1) - margin - o.ry - std::max(0.0, travel_y);
      STINET_CHECK(lo_x < hi_x && lo_y < hi_y,
                   "generate_synthetic_clip: object does not fit; reduce speed or size");
      // keep the centers apart so flow truth is unambiguous
      for (int attempt = 0; attempt < 40; ++attempt) {
        o.cx0 = rng.uniform(lo_x, hi_x);
        o.cy0 = rng.uniform(lo_y, hi_y);
        bool ok = true;
        for (const auto& p : objects_)
          if (std::abs(p.cx0 - o.cx0) < (p.rx + o.rx) * 0.8 &&
              std::abs(p.cy0 - o.cy0) < (p.ry + o.ry) * 0.8)
            ok = false;
        if (ok) break;
      }
      for (int ch = 0; ch < 3; ++ch) o.base[ch] = rng.uniform(0.25, 0.8);
      for (int k = 0; k < 3; ++k) {
        const double f = rng.uniform(1.0, 3.5) * 6.283185307179586 / std::min(o.rx, o.ry) / 4.0;
        const double ang = rng.uniform(0.0, 6.283185307179586);
        o.waves.push_back(
            {f * std::cos(ang), f * std::sin(ang), rng.uniform(0.0, 6.28), 0.09});
      }
      objects_.push_back(o);
    }
    // render
    clip_.frames.reserve(size_t(T));
    for (int64_t t = 0; t < T; ++t) clip_.frames.push_back(render(double(t)));
    clip_.frame_rate_tag = "synthetic";
  }

  const VideoClip& clip() const { return clip_; }
  VideoClip& clip() { return clip_; }
  int64_t height() const { return h_; }
  int64_t width() const { return w_; }
  size_t num_objects() const { return objects_.size(); }

  // Hard mask of object `idx` at (possibly fractional) time t.
  Image object_mask(size_t idx, double t) const {
    Image m(1, h_, w_);
    for (int64_t y = 0; y < h_; ++y)
      for (int64_t x = 0; x < w_; ++x)
        m.at(0, y, x) = detail::coverage(objects_[idx], t, double(x), double(y)) > 0.5 ? 1.f : 0.f;
    return m;
  }

  // Analytic flow from time t0 to time t1 sampled on an (oh x ow) grid.
  // Background pixels carry zero flow; object pixels (mask at t0, topmost
  // object wins) carry v * (t1 - t0). Values are in output-grid pixels.
  // Returned layout: {2, oh, ow} flat vector, channel 0 = x displacement.
  std::vector<float> flow_truth(double t0, double t1, int64_t oh, int64_t ow) const {
    const double sy = double(h_) / double(oh), sx = double(w_) / double(ow);
    std::vector<float> flow(size_t(2 * oh * ow), 0.f);
    const double dt = t1 - t0;
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t x = 0; x < ow; ++x) {
        const double px = (double(x) + 0.5) * sx - 0.5;
        const double py = (double(y) + 0.5) * sy - 0.5;
        for (auto it = objects_.rbegin(); it != objects_.rend(); ++it) {
          if (detail::coverage(*it, t0, px, py) > 0.5) {
            flow[size_t(y * ow + x)] = float(it->vx * dt / sx);
            flow[size_t(oh * ow + y * ow + x)] = float(it->vy * dt / sy);
            break;
          }
        }
      }
    return flow;
  }

  // Frame rendered at fractional time (exact interpolation ground truth).
  Image render(double t) const {
    Image f(3, h_, w_);
    for (int64_t y = 0; y < h_; ++y)
      for (int64_t x = 0; x < w_; ++x) {
        double px[3];
        const double bgtex = detail::eval_waves(bg_waves_, double(x), double(y));
        for (int ch = 0; ch < 3; ++ch) px[ch] = bg_base_ + bgtex * (0.8 + 0.2 * ch);
        for (const auto& o : objects_) {
          const double a = detail::coverage(o, t, double(x), double(y));
          if (a <= 0.0) continue;
          // texture moves rigidly with the object
          const double tx = double(x) - o.vx * t, ty = double(y) - o.vy * t;
          const double tex = detail::eval_waves(o.waves, tx, ty);
          for (int ch = 0; ch < 3; ++ch) px[ch] = px[ch] * (1.0 - a) + (o.base[ch] + tex) * a;
        }
        for (int ch = 0; ch < 3; ++ch) f.at(ch, y, x) = float(std::clamp(px[ch], 0.0, 1.0));
      }
    return f;
  }

 private:
  int64_t h_ = 0, w_ = 0;
  double bg_base_ = 0.5;
  std::vector<detail::TexWave> bg_waves_;
  std::vector<detail::SynthObject> objects_;
  VideoClip clip_;
};

inline VideoClip generate_synthetic_clip(uint64_t seed, int64_t T, int64_t H, int64_t W,
                                         const MotionSpec& spec = {}) {
  return SyntheticClip(seed, T, H, W, spec).clip();
}

// ---- degradation and samples ----

inline VideoClip degrade_bicubic(const VideoClip& clip, int64_t scale = 4) {
  STINET_CHECK(scale >= 1, "degrade_bicubic: bad scale");
  STINET_CHECK(clip.height() % scale == 0 && clip.width() % scale == 0,
               "degrade_bicubic: dimensions not divisible by scale");
  VideoClip out;
  out.frame_rate_tag = clip.frame_rate_tag;
  out.frames.reserve(clip.frames.size());
  for (const auto& f : clip.frames)
    out.frames.push_back(bicubic_resize(f, f.h / scale, f.w / scale));
  return out;
}

// lr_inputs: degraded odd-index frames (1-based; 0,2,4,... zero-based);
// hr_targets: the full clip; lr_targets: degraded version of every frame.
struct TrainingSample {
  VideoClip lr_inputs;
  VideoClip hr_targets;
  VideoClip lr_targets;
};

inline TrainingSample make_training_sample(const VideoClip& clip, int64_t scale = 4) {
  STINET_CHECK(clip.T() % 2 == 1, "make_training_sample: T must be odd");
  TrainingSample s;
  s.hr_targets = clip;
  s.lr_targets = degrade_bicubic(clip, scale);
  s.lr_inputs.frame_rate_tag = clip.frame_rate_tag;
  for (int64_t t = 0; t < clip.T(); t += 2) s.lr_inputs.frames.push_back(s.lr_targets.frames[t]);
  return s;
}

// ---- augmentation ----

struct AugFlags {
  bool flip_h = false;
  bool flip_v = false;
  bool rot180 = false;
  bool mirror_time = false;
};

namespace detail {

inline Image crop_image(const Image& in, int64_t y0, int64_t x0, int64_t ch, int64_t cw) {
  Image out(in.c, ch, cw);
  for (int64_t c = 0; c < in.c; ++c)
    for (int64_t y = 0; y < ch; ++y)
      for (int64_t x = 0; x < cw; ++x) out.at(c, y, x) = in.at(c, y0 + y, x0 + x);
  return out;
}

inline Image flip_image(const Image& in, bool fh, bool fv) {
  if (!fh && !fv) return in;
  Image out(in.c, in.h, in.w);
  for (int64_t c = 0; c < in.c; ++c)
    for (int64_t y = 0; y < in.h; ++y)
      for (int64_t x = 0; x < in.w; ++x)
        out.at(c, fv ? in.h - 1 - y : y, fh ? in.w - 1 - x : x) = in.at(c, y, x);
  return out;
}

inline void transform_clip(VideoClip& clip, const AugFlags& f, int64_t y0, int64_t x0,
                           int64_t ch, int64_t cw) {
  for (auto& img : clip.frames) {
    if (ch > 0) img = crop_image(img, y0, x0, ch, cw);
    img = flip_image(img, f.flip_h, f.flip_v);
    if (f.rot180) img = flip_image(img, true, true);
  }
  if (f.mirror_time) std::reverse(clip.frames.begin(), clip.frames.end());
}

}  // namespace detail

// Applies the same crop + flip/rotation + time mirror to all three clips.
// The crop is crop_lr x crop_lr on the LR clips at (crop_x, crop_y) and the
// aligned (4*crop_lr)^2 region at 4x the origin on the HR clip, so LR/HR
// stay pixel aligned. crop_lr <= 0 disables cropping. All transforms are
// pixel permutations: the [0,1] range is preserved exactly.
inline TrainingSample augment(const TrainingSample& sample, const AugFlags& flags,
                              int64_t crop_x = 0, int64_t crop_y = 0, int64_t crop_lr = 0) {
  TrainingSample out = sample;
  const int64_t scale = sample.hr_targets.height() / sample.lr_targets.height();
  if (crop_lr > 0) {
    STINET_CHECK(crop_x >= 0 && crop_y >= 0 &&
                     crop_x + crop_lr <= sample.lr_targets.width() &&
                     crop_y + crop_lr <= sample.lr_targets.height(),
                 "augment: crop out of bounds");
  }
  const int64_t hr_crop = crop_lr * scale;
  detail::transform_clip(out.lr_inputs, flags, crop_y, crop_x, crop_lr, crop_lr);
  detail::transform_clip(out.lr_targets, flags, crop_y, crop_x, crop_lr, crop_lr);
  detail::transform_clip(out.hr_targets, flags, crop_y * scale, crop_x * scale, hr_crop, hr_crop);
  return out;
}

// ---- clip directory format ----
// A clip is a directory of numbered frames 000000.png, 000001.png, ...
// A dataset directory holds a manifest.json: {"clips": ["name", ...]}.

inline void save_clip_dir(const VideoClip& clip, const std::string& dir) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (int64_t t = 0; t < clip.T(); ++t) {
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(t));
    write_png(dir + "/" + name, clip.frames[size_t(t)]);
  }
}

inline VideoClip load_clip_dir(const std::string& dir) {
  VideoClip clip;
  char name[32];
  for (int64_t t = 0;; ++t) {
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(t));
    const std::string path = dir + "/" + name;
    if (!std::filesystem::exists(path)) break;
    clip.frames.push_back(read_png(path));
  }
  STINET_CHECK(clip.T() >= 2, "load_clip_dir: fewer than two frames in ", dir);
  return clip;
}

inline void save_dataset(const std::vector<VideoClip>& clips, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["clips"] = nlohmann::json::array();
  for (size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04zu", i);
    save_clip_dir(clips[i], dir + "/" + name);
    manifest["clips"].push_back(name);
  }
  std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";
}

inline std::vector<VideoClip> load_dataset(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  STINET_CHECK(in.good(), "load_dataset: missing manifest.json in ", dir);
  nlohmann::json manifest = nlohmann::json::parse(in);
  std::vector<VideoClip> clips;
  for (const auto& name : manifest.at("clips"))
    clips.push_back(load_clip_dir(dir + "/" + name.get<std::string>()));
  return clips;
}

}  // namespace stinet
