#pragma once

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include "stinet/dataset.hpp"
#include "stinet/metrics.hpp"
#include "stinet/serialize.hpp"

namespace stinet {

inline std::string fingerprint_hex(uint64_t fp) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fp;
  return os.str();
}

// ---- inference helpers ----

template <typename S>
std::vector<Tensor<S>> clip_to_tensors(const VideoClip& clip) {
  std::vector<Tensor<S>> out;
  for (const auto& f : clip.frames) out.push_back(image_to_tensor<S>(f));
  return out;
}

// Runs the pipeline on an LR clip; output frames are clamped to [0,1]
// (export semantics). Output length is T + (T-1)*n_interp at 4x size.
template <typename S>
std::vector<Image> infer_clip(const STINet<S>& model, const FlowEstimator<S>& flownet,
                              const VideoClip& lr_clip, int64_t n_interp) {
  STINET_CHECK(lr_clip.T() >= 2, "infer: clip must have at least 2 frames");
  auto frames = clip_to_tensors<S>(lr_clip);
  auto result = model.forward(frames, flownet, n_interp);
  std::vector<Image> out;
  for (const auto& t : result.pred) {
    Image img = tensor_to_image(t);
    img.clamp01();
    out.push_back(std::move(img));
  }
  return out;
}

// Two-stage-free baseline: bicubic 4x upsampling of each given frame plus
// repetition of the previous upsampled frame for every intermediate slot.
inline std::vector<Image> baseline_bicubic_repeat(const VideoClip& lr_clip, int64_t n_interp,
                                                  int64_t scale = 4) {
  std::vector<Image> out;
  for (int64_t g = 0; g < lr_clip.T(); ++g) {
    Image up = bicubic_resize(lr_clip.frames[size_t(g)], lr_clip.height() * scale,
                              lr_clip.width() * scale);
    up.clamp01();
    out.push_back(up);
    if (g + 1 < lr_clip.T())
      for (int64_t k = 0; k < n_interp; ++k) out.push_back(out.back());
  }
  return out;
}

// ---- evaluation ----

struct ClipEval {
  std::string name;
  double psnr = 0, ssim = 0;
};

struct EvalReport {
  std::vector<ClipEval> clips;
  double mean_psnr = 0, mean_ssim = 0;
  double runtime_sec = 0;
  std::string fingerprint;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["fingerprint"] = fingerprint;
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["runtime_sec"] = runtime_sec;
    j["clips"] = nlohmann::json::array();
    for (const auto& c : clips)
      j["clips"].push_back({{"name", c.name}, {"psnr", c.psnr}, {"ssim", c.ssim}});
    return j;
  }
};

// Full-frame evaluation: degrade the HR clip, feed the odd-index LR frames,
// reconstruct all frames (n_interp = 1) and compare against ground truth.
template <typename S>
EvalReport evaluate_clips(const STINet<S>& model, const FlowEstimator<S>& flownet,
                          const std::vector<VideoClip>& gt_clips, int64_t scale,
                          const MetricOptions& opt, uint64_t fingerprint) {
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  rep.fingerprint = fingerprint_hex(fingerprint);
  for (size_t ci = 0; ci < gt_clips.size(); ++ci) {
    const auto& gt = gt_clips[ci];
    STINET_CHECK(gt.T() % 2 == 1, "evaluate: clips must have odd length");
    VideoClip lr = degrade_bicubic(gt, scale);
    VideoClip given;
    for (int64_t t = 0; t < lr.T(); t += 2) given.frames.push_back(lr.frames[size_t(t)]);
    auto pred = infer_clip(model, flownet, given, 1);
    STINET_CHECK(int64_t(pred.size()) == gt.T(), "evaluate: frame count mismatch");
    double p = 0, s = 0;
    for (int64_t t = 0; t < gt.T(); ++t) {
      p += psnr(pred[size_t(t)], gt.frames[size_t(t)], opt);
      s += ssim(pred[size_t(t)], gt.frames[size_t(t)], opt);
    }
    ClipEval ce;
    ce.name = "clip_" + std::to_string(ci);
    ce.psnr = p / double(gt.T());
    ce.ssim = s / double(gt.T());
    rep.clips.push_back(ce);
  }
  for (const auto& c : rep.clips) {
    rep.mean_psnr += c.psnr;
    rep.mean_ssim += c.ssim;
  }
  if (!rep.clips.empty()) {
    rep.mean_psnr /= double(rep.clips.size());
    rep.mean_ssim /= double(rep.clips.size());
  }
  rep.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---- training engine ----

template <typename S = float>
class TrainEngine {
 public:
  explicit TrainEngine(Config cfg) : cfg_(std::move(cfg)) {
    if (deterministic_env()) {
      cfg_.train.seed = 0;
      cfg_.data.seed = 1234;
    }
    std::tie(train_set_, eval_set_) = build_datasets(cfg_.data);
    Rng rng(cfg_.train.seed);
    flownet_ = TinyFlowNet<S>(cfg_.model.flow_channels, rng.fork(1));
    model_ = STINet<S>(cfg_.model, rng.fork(2));
    phi_ = std::make_unique<ConvExtractor<S>>(77);
    sample_rng_ = rng.fork(3);
    flow_rng_ = rng.fork(4);
    // cached LR versions of the training clips
    for (const auto& clip : train_set_.clips) lr_cache_.push_back(degrade_bicubic(clip, cfg_.data.scale));
  }

  // Stage A: flow estimator pretraining on clip frame pairs, supervised by
  // analytic flow truth when available, photometric warping otherwise. The
  // estimator is frozen afterwards.
  void pretrain_flow() {
    if (cfg_.train.flow_pretrain_iters <= 0) {
      flownet_.set_trainable(false);
      return;
    }
    ParamList<S> ps;
    flownet_.visit("flow", ps);
    std::vector<Tensor<S>> tensors;
    for (auto* t : ps.tensors) tensors.push_back(*t);
    Adam<S> opt(tensors);
    for (int64_t it = 0; it < cfg_.train.flow_pretrain_iters; ++it) {
      opt.zero_grad();
      double loss_sum = 0;
      const int64_t bs = std::min<int64_t>(cfg_.train.batch_size, 4);
      for (int64_t b = 0; b < bs; ++b) {
        const size_t ci = size_t(flow_rng_.uniform_int(train_set_.size()));
        const int64_t T = train_set_.clips[ci].T();
        const int64_t dt = 1 + int64_t(flow_rng_.uniform_int(2));
        const int64_t a = int64_t(flow_rng_.uniform_int(uint64_t(T - dt)));
        const bool lr_scale = flow_rng_.uniform() < 0.5;
        const VideoClip& src = lr_scale ? lr_cache_[ci] : train_set_.clips[ci];
        auto fa = image_to_tensor<S>(src.frames[size_t(a)]);
        auto fb = image_to_tensor<S>(src.frames[size_t(a + dt)]);
        auto flow = flownet_.forward(fa, fb);
        Tensor<S> loss;
        if (train_set_.has_truth()) {
          auto truth = train_set_.synth[ci].flow_truth(double(a), double(a + dt), src.height(),
                                                       src.width());
          std::vector<S> tv(truth.begin(), truth.end());
          auto target = Tensor<S>::from({2, src.height(), src.width()}, std::move(tv));
          loss = mse_mean(flow, target);
        } else {
          loss = add(mse_mean(warp_bilinear(fb, flow), fa),
                     scale(mean(mul(flow, flow)), S(1e-3)));
        }
        loss_sum += double(loss.item());
        loss.backward();
      }
      opt.step(cfg_.train.flow_lr);
      flow_curve_.push_back(loss_sum / double(std::min<int64_t>(cfg_.train.batch_size, 4)));
    }
    flownet_.set_trainable(false);
  }

  // Stage B: end-to-end STINet training with the frozen flow estimator.
  void train() {
    ParamList<S> ps;
    model_.visit("model", ps);
    std::vector<Tensor<S>> tensors;
    for (auto* t : ps.tensors) tensors.push_back(*t);
    opt_ = Adam<S>(tensors);
    if (!cfg_.data.augment) precompute_gt_flows();

    std::vector<S> last_good = flatten_params();
    for (int64_t it = 0; it < cfg_.train.total_iters; ++it) {
      const double lr = lr_schedule(cfg_.train.lr0, cfg_.train.decay_factor,
                                    cfg_.train.decay_every, it);
      try {
        step(it, lr);
      } catch (const std::exception& e) {
        // divergence: restore the last good parameters and stop
        restore_params_flat(last_good);
        diverged_ = true;
        divergence_message_ = e.what();
        std::fprintf(stderr, "[train] aborted at iter %lld: %s\n",
                     static_cast<long long>(it), e.what());
        break;
      }
      if ((it + 1) % cfg_.train.log_every == 0) {
        last_good = flatten_params();
        const auto& r = curve_.back();
        std::fprintf(stderr, "[train] iter %lld lr %.3g total %.5f rec %.5f\n",
                     static_cast<long long>(it + 1), lr, r.total, r.l_rec);
      }
      ++iteration_;
    }
  }

  void run() {
    pretrain_flow();
    train();
  }

  EvalReport evaluate() const {
    return evaluate_clips(model_, flownet_, eval_set_.clips, cfg_.data.scale,
                          MetricOptions{cfg_.eval.rgb, cfg_.eval.psnr_cap},
                          config_fingerprint(cfg_));
  }

  void save(const std::string& path) {
    ParamList<S> all = all_params();
    save_checkpoint(path, all, config_fingerprint(cfg_), iteration_,
                    config_to_json(cfg_).dump(), opt_.params().empty() ? nullptr : &opt_);
  }

  nlohmann::json train_report() const {
    nlohmann::json j;
    j["config"] = config_to_json(cfg_);
    j["fingerprint"] = fingerprint_hex(config_fingerprint(cfg_));
    j["iterations"] = iteration_;
    j["diverged"] = diverged_;
    if (diverged_) j["divergence_message"] = divergence_message_;
    j["flow_curve"] = flow_curve_;
    nlohmann::json curves;
    auto push = [&](const char* k, auto sel) {
      std::vector<double> v;
      for (const auto& r : curve_) v.push_back(sel(r));
      curves[k] = v;
    };
    push("total", [](const LossReport& r) { return r.total; });
    push("l_rec", [](const LossReport& r) { return r.l_rec; });
    push("l_rec_phase1", [](const LossReport& r) { return r.l_rec_phase1; });
    push("l_per", [](const LossReport& r) { return r.l_per; });
    push("l_abs", [](const LossReport& r) { return r.l_abs; });
    push("l_rel", [](const LossReport& r) { return r.l_rel; });
    j["loss_curves"] = curves;
    return j;
  }

  const std::vector<LossReport>& loss_curve() const { return curve_; }
  const std::vector<double>& flow_curve() const { return flow_curve_; }
  STINet<S>& model() { return model_; }
  TinyFlowNet<S>& flownet() { return flownet_; }
  const Config& config() const { return cfg_; }
  const Dataset& train_set() const { return train_set_; }
  const Dataset& eval_set() const { return eval_set_; }
  bool diverged() const { return diverged_; }

 private:
  ParamList<S> all_params() {
    ParamList<S> all;
    flownet_.visit("flow", all);
    model_.visit("model", all);
    return all;
  }

  std::vector<S> flatten_params() {
    ParamList<S> all = all_params();
    std::vector<S> flat;
    for (auto* t : all.tensors) flat.insert(flat.end(), t->values().begin(), t->values().end());
    return flat;
  }

  void restore_params_flat(const std::vector<S>& flat) {
    ParamList<S> all = all_params();
    size_t off = 0;
    for (auto* t : all.tensors) {
      std::copy(flat.begin() + off, flat.begin() + off + size_t(t->numel()),
                t->values().begin());
      off += size_t(t->numel());
    }
  }

  // One training sample: clip index, interpolation task and augmentation.
  struct SampleTask {
    size_t clip = 0;
    int64_t stride = 2;
    bool augmented = false;
    TrainingSample sample;  // only LR/HR target clips actually used
  };

  SampleTask draw_sample() {
    SampleTask t;
    t.clip = size_t(sample_rng_.uniform_int(train_set_.size()));
    t.stride = cfg_.train.task_strides[sample_rng_.uniform_int(cfg_.train.task_strides.size())];
    STINET_CHECK((train_set_.clips[t.clip].T() - 1) % t.stride == 0,
                 "train: task stride must divide T-1");
    t.sample.hr_targets = train_set_.clips[t.clip];
    t.sample.lr_targets = lr_cache_[t.clip];
    if (cfg_.data.augment) {
      AugFlags flags;
      flags.flip_h = sample_rng_.uniform() < 0.5;
      flags.flip_v = sample_rng_.uniform() < 0.5;
      flags.rot180 = sample_rng_.uniform() < 0.5;
      flags.mirror_time = sample_rng_.uniform() < 0.5;
      int64_t cx = 0, cy = 0, crop = 0;
      if (cfg_.data.crop_lr > 0 && t.sample.lr_targets.width() > cfg_.data.crop_lr &&
          t.sample.lr_targets.height() > cfg_.data.crop_lr) {
        crop = cfg_.data.crop_lr;
        cx = int64_t(sample_rng_.uniform_int(uint64_t(t.sample.lr_targets.width() - crop + 1)));
        cy = int64_t(sample_rng_.uniform_int(uint64_t(t.sample.lr_targets.height() - crop + 1)));
      }
      t.sample = augment(t.sample, flags, cx, cy, crop);
      t.augmented = flags.flip_h || flags.flip_v || flags.rot180 || flags.mirror_time || crop > 0;
    }
    return t;
  }

  // Loss graph for one sample on a shadow model. Returns the scalar total.
  Tensor<S> sample_loss(const STINet<S>& model, const SampleTask& task, LossReport* report,
                        const FlowCache<S>* gt_cache) const {
    const auto& lr_clip = task.sample.lr_targets;
    const auto& hr_clip = task.sample.hr_targets;
    std::vector<Tensor<S>> given;
    for (int64_t i = 0; i < lr_clip.T(); i += task.stride)
      given.push_back(image_to_tensor<S>(lr_clip.frames[size_t(i)]));
    auto result = model.forward(given, flownet_, task.stride - 1);
    STINET_CHECK(int64_t(result.pred.size()) == hr_clip.T(), "train: output/target mismatch");

    std::vector<Tensor<S>> hr_gt = clip_to_tensors<S>(hr_clip);
    std::vector<Tensor<S>> lr_gt = clip_to_tensors<S>(lr_clip);

    auto l_rec = loss_rec(result.pred, hr_gt);
    Tensor<S> l_p1;
    if (!result.phase1_lr.empty() && !result.phase1_hr.empty())
      l_p1 = add(loss_rec(result.phase1_lr, lr_gt), loss_rec(result.phase1_hr, hr_gt));
    else if (!result.phase1_lr.empty()) l_p1 = loss_rec(result.phase1_lr, lr_gt);
    else l_p1 = loss_rec(result.phase1_hr, hr_gt);
    auto l_per = loss_perceptual(result.pred, hr_gt, *phi_);

    Tensor<S> l_abs_t, l_rel_t;
    if (cfg_.loss.lambda2 != 0 &&
        (cfg_.mcl.abs != AbsMode::Off || cfg_.mcl.rel != RelMode::Off)) {
      auto flows = build_mcl_flows(result.pred, hr_gt, flownet_, cfg_.mcl, gt_cache);
      if (!flows.abs_pred.empty()) l_abs_t = loss_abs(flows.abs_pred, flows.abs_gt, cfg_.mcl.abs_norm);
      if (!flows.rel_short.empty()) {
        l_rel_t = cfg_.mcl.rel == RelMode::Strong
                      ? loss_rel_strong(flows.rel_short, flows.rel_long, flows.rel_short_gt,
                                        flows.rel_long_gt)
                      : loss_rel(flows.rel_short, flows.rel_long);
      }
    }
    return total_loss(l_rec, l_p1, l_per, l_abs_t, l_rel_t, cfg_.loss.lambda1, cfg_.loss.lambda2,
                      report);
  }

  void step(int64_t iter, double lr) {
    (void)iter;
    const int64_t bs = cfg_.train.batch_size;
    std::vector<SampleTask> tasks;
    for (int64_t b = 0; b < bs; ++b) tasks.push_back(draw_sample());

    const int64_t nw = std::max<int64_t>(1, std::min<int64_t>(cfg_.train.threads, bs));
    std::vector<STINet<S>> shadows;
    for (int64_t w = 0; w < nw; ++w) shadows.push_back(model_.shadow_clone());
    std::vector<LossReport> reports(static_cast<size_t>(bs));
    std::vector<std::string> errors(static_cast<size_t>(nw));

    auto worker = [&](int64_t w) {
      try {
        for (int64_t b = w; b < bs; b += nw) {
          const FlowCache<S>* cache = nullptr;
          if (!tasks[size_t(b)].augmented && !gt_flow_cache_.empty())
            cache = &gt_flow_cache_[tasks[size_t(b)].clip];
          auto total = sample_loss(shadows[size_t(w)], tasks[size_t(b)], &reports[size_t(b)], cache);
          total.backward();
        }
      } catch (const std::exception& e) {
        errors[size_t(w)] = e.what();
      }
    };
    if (nw == 1) {
      worker(0);
    } else {
      std::vector<std::thread> threads;
      for (int64_t w = 0; w < nw; ++w) threads.emplace_back(worker, w);
      for (auto& t : threads) t.join();
    }
    for (const auto& e : errors)
      if (!e.empty()) fail("training step failed: ", e);

    // reduce worker gradients into the master parameters in worker order
    opt_.zero_grad();
    ParamList<S> master;
    model_.visit("model", master);
    for (int64_t w = 0; w < nw; ++w) {
      ParamList<S> wp;
      shadows[size_t(w)].visit("model", wp);
      for (size_t i = 0; i < master.tensors.size(); ++i) {
        if (!wp.tensors[i]->has_grad()) continue;
        auto& dst = master.tensors[i]->grad();
        const auto& src = wp.tensors[i]->grad_view();
        for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k] / S(bs);
      }
    }
    opt_.step(lr);

    LossReport mean_report;
    for (const auto& r : reports) {
      mean_report.l_rec += r.l_rec / double(bs);
      mean_report.l_rec_phase1 += r.l_rec_phase1 / double(bs);
      mean_report.l_per += r.l_per / double(bs);
      mean_report.l_abs += r.l_abs / double(bs);
      mean_report.l_rel += r.l_rel / double(bs);
      mean_report.total += r.total / double(bs);
    }
    mean_report.lambda1 = cfg_.loss.lambda1;
    mean_report.lambda2 = cfg_.loss.lambda2;
    curve_.push_back(mean_report);
  }

  // Ground-truth flows are reused across iterations when augmentation is
  // off (the clips never change); computed once, single-threaded.
  void precompute_gt_flows() {
    if (cfg_.loss.lambda2 == 0 || (cfg_.mcl.abs == AbsMode::Off && cfg_.mcl.rel == RelMode::Off))
      return;
    gt_flow_cache_.assign(train_set_.size(), {});
    for (size_t ci = 0; ci < train_set_.size(); ++ci) {
      auto gt = clip_to_tensors<S>(train_set_.clips[ci]);
      const int n = int(gt.size());
      auto want = [&](int a, int b) {
        if (gt_flow_cache_[ci].count({a, b})) return;
        gt_flow_cache_[ci][{a, b}] = flownet_.forward(gt[size_t(a)], gt[size_t(b)]).detach();
      };
      if (cfg_.mcl.abs == AbsMode::On) {
        for (int t = 0; t < n; ++t)
          for (int p = 0; p < n; ++p)
            if (t != p) want(t, p);
      } else if (cfg_.mcl.abs == AbsMode::Adjacent) {
        for (int t = 0; t + 1 < n; ++t) {
          want(t, t + 1);
          want(t + 1, t);
        }
      }
      // the plain rel term needs predicted flows only; gt flows enter it
      // only in the strong-constraint variant
      if (cfg_.mcl.rel == RelMode::Strong) {
        for (int t = 1; t + 1 < n; ++t) {
          want(t - 1, t);
          want(t - 1, t + 1);
        }
      }
    }
  }

  Config cfg_;
  Dataset train_set_, eval_set_;
  TinyFlowNet<S> flownet_;
  STINet<S> model_;
  std::unique_ptr<PerceptualExtractor<S>> phi_;
  Adam<S> opt_;
  Rng sample_rng_{0}, flow_rng_{0};
  std::vector<VideoClip> lr_cache_;
  std::vector<FlowCache<S>> gt_flow_cache_;
  std::vector<LossReport> curve_;
  std::vector<double> flow_curve_;
  int64_t iteration_ = 0;
  bool diverged_ = false;
  std::string divergence_message_;
};

// ---- checkpoint loading for infer/eval ----

template <typename S = float>
struct LoadedModel {
  Config cfg;
  TinyFlowNet<S> flownet;
  STINet<S> model;
  int64_t iteration = 0;
  uint64_t fingerprint = 0;
  bool fingerprint_mismatch = false;
};

// Loads a checkpoint; when `expected_cfg` is given its fingerprint is
// compared against the stored one and a mismatch is flagged (callers refuse
// to proceed unless forced).
template <typename S = float>
LoadedModel<S> load_model(const std::string& path, const Config* expected_cfg = nullptr) {
  auto data = load_checkpoint<S>(path);
  LoadedModel<S> lm;
  lm.cfg = config_from_json(nlohmann::json::parse(data.config_json));
  lm.iteration = data.iteration;
  lm.fingerprint = data.fingerprint;
  Rng rng(lm.cfg.train.seed);
  lm.flownet = TinyFlowNet<S>(lm.cfg.model.flow_channels, rng.fork(1));
  lm.model = STINet<S>(lm.cfg.model, rng.fork(2));
  ParamList<S> all;
  lm.flownet.visit("flow", all);
  lm.model.visit("model", all);
  restore_params(data, all);
  lm.flownet.set_trainable(false);
  if (expected_cfg && config_fingerprint(*expected_cfg) != data.fingerprint)
    lm.fingerprint_mismatch = true;
  return lm;
}

}  // namespace stinet
