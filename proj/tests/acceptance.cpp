// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria. Criteria 7 and 8 train desk-scale models on the CPU and
// dominate the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "stinet/ablate.hpp"
#include "stinet/train.hpp"

using namespace stinet;

namespace {

struct Outcome {
  int id;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail, double seconds) {
  outcomes.push_back({id, pass, detail, seconds});
  std::printf("CRITERION %2d: %s  (%.1fs)  %s\n", id, pass ? "PASS" : "FAIL", seconds,
              detail.c_str());
  std::fflush(stdout);
}

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

template <typename S>
Tensor<S> random_tensor(std::vector<int64_t> shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false) {
  auto t = Tensor<S>::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = S(rng.uniform(lo, hi));
  return t;
}

// Central finite differences vs reverse-mode gradients; returns the max
// relative error over the probed coordinates.
double fd_max_rel_err(const std::function<Tensor<double>()>& forward,
                      std::vector<Tensor<double>> leaves, int max_coords_per_leaf,
                      uint64_t seed = 7, double eps = 1e-5) {
  for (auto& leaf : leaves) leaf.zero_grad();
  auto loss = forward();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves)
    analytic.push_back(leaf.has_grad() ? leaf.grad_view()
                                       : std::vector<double>(size_t(leaf.numel()), 0.0));
  Rng rng(seed);
  double worst = 0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    const int64_t n = leaf.numel();
    std::vector<int64_t> coords;
    if (n <= max_coords_per_leaf) {
      for (int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_leaf; ++i)
        coords.push_back(int64_t(rng.uniform_int(uint64_t(n))));
    }
    for (int64_t ci : coords) {
      const double x0 = leaf.data()[ci];
      const double h = eps * std::max(1.0, std::abs(x0));
      leaf.data()[ci] = x0 + h;
      const double fp = forward().item();
      leaf.data()[ci] = x0 - h;
      const double fm = forward().item();
      leaf.data()[ci] = x0;
      const double fd = (fp - fm) / (2 * h);
      const double an = analytic[li][size_t(ci)];
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-4});
      worst = std::max(worst, std::abs(an - fd) / denom);
    }
  }
  return worst;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---- criterion 1: flow adaptation scaling exactness ----

void criterion1() {
  Timer t;
  bool pass = true;
  std::string detail;
  auto make = [](double u, double v, double t0, double t1) {
    auto f = Tensor<double>::zeros({2, 4, 4});
    for (int64_t i = 0; i < 16; ++i) {
      f.data()[i] = u;
      f.data()[16 + i] = v;
    }
    return FlowField<double>{f, t0, t1};
  };
  // midpoint: both factors exactly 0.5
  {
    auto fwd = make(3.0, -2.0, 0.0, 2.0);
    auto bwd = make(-3.0, 2.0, 2.0, 0.0);
    auto [p, n] = adapt_flow(fwd, bwd, 1.0);
    for (int64_t i = 0; i < 32; ++i) {
      pass = pass && p.values.data()[i] == 0.5 * bwd.values.data()[i];
      pass = pass && n.values.data()[i] == 0.5 * fwd.values.data()[i];
    }
  }
  // half a unit after the left frame: backward factor exactly 0.25
  {
    auto fwd = make(-4.0, 0.0, 0.0, 2.0);
    auto bwd = make(4.0, 0.0, 2.0, 0.0);
    auto [p, n] = adapt_flow(fwd, bwd, 0.5);
    for (int64_t i = 0; i < 16; ++i) {
      pass = pass && p.values.data()[i] == 1.0;   // 0.25 * 4
      pass = pass && n.values.data()[i] == -3.0;  // 0.75 * (-4)
    }
  }
  report(1, pass, "flow adaptation factors 0.5 / 0.25 reproduced to machine precision",
         t.seconds());
}

// ---- criterion 2: relative motion loss oracle ----

void criterion2() {
  Timer t;
  bool pass = true;
  auto constant = [](double v) { return Tensor<double>::full({2, 6, 6}, v); };
  pass = pass && loss_rel<double>({constant(1.0)}, {constant(2.0)}).item() == 0.0;
  pass = pass && loss_rel<double>({constant(2.0)}, {constant(1.0)}).item() == 1.0;
  pass = pass && loss_rel<double>({constant(-2.0)}, {constant(-1.0)}).item() == 1.0;
  // property: 100 random families with elementwise same sign and
  // accumulating magnitude give exactly zero
  Rng rng(21);
  int zero_count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto s = Tensor<double>::zeros({2, 8, 8});
    auto l = Tensor<double>::zeros({2, 8, 8});
    for (int64_t i = 0; i < 128; ++i) {
      const double sg = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double mag = rng.uniform(0.0, 3.0);
      s.data()[i] = sg * mag;
      l.data()[i] = sg * (mag + rng.uniform(0.0, 2.0));
    }
    if (loss_rel<double>({s}, {l}).item() == 0.0) ++zero_count;
  }
  pass = pass && zero_count == 100;
  report(2, pass,
         "hinge values 0/1/1 on constant flows; " + std::to_string(zero_count) +
             "/100 satisfying random families give exactly 0",
         t.seconds());
}

// ---- criterion 3: gradient suite (double precision) ----

void criterion3() {
  Timer t;
  double worst = 0;
  Rng rng(31);

  // backward warping
  {
    auto img = random_tensor<double>({2, 6, 6}, rng, 0, 1, true);
    auto flow = random_tensor<double>({2, 6, 6}, rng, -0.35, 0.35, true);
    for (auto& v : flow.values()) v += 0.17;
    worst = std::max(worst, fd_max_rel_err(
                                [&] { return mean(warp_bilinear(img, flow)); }, {img, flow}, 24));
  }
  // deformable alignment
  {
    auto x = random_tensor<double>({2, 8, 8}, rng, -1, 1, true);
    auto w = random_tensor<double>({2, 2, 3, 3}, rng, -1, 1, true);
    auto b = random_tensor<double>({2}, rng, -1, 1, true);
    auto off = random_tensor<double>({18, 8, 8}, rng, -0.3, 0.3, true);
    for (auto& v : off.values()) v += 0.23;
    worst = std::max(worst,
                     fd_max_rel_err([&] { return mean(deform_conv3x3(x, off, w, b)); },
                                    {x, off, w, b}, 16));
  }
  // reconstruction loss
  {
    auto a = random_tensor<double>({3, 5, 5}, rng, 0, 1, true);
    auto gt = random_tensor<double>({3, 5, 5}, rng, 0, 1);
    worst = std::max(worst,
                     fd_max_rel_err([&] { return loss_rec<double>({a}, {gt}); }, {a}, 24));
  }
  // absolute motion loss (both norms)
  {
    auto f = random_tensor<double>({2, 5, 5}, rng, -2, 2, true);
    auto g = random_tensor<double>({2, 5, 5}, rng, -2, 2);
    worst = std::max(
        worst, fd_max_rel_err([&] { return loss_abs<double>({f}, {g}, AbsNorm::L2); }, {f}, 24));
  }
  // relative motion loss, away from the sign/hinge kinks
  {
    auto s = random_tensor<double>({2, 5, 5}, rng, 0.4, 2.0, true);
    auto l = random_tensor<double>({2, 5, 5}, rng, 0.4, 2.0, true);
    for (int64_t i = 0; i < 25; ++i) {
      s.data()[25 + i] = -s.data()[25 + i];
      l.data()[25 + i] = -l.data()[25 + i];
    }
    worst = std::max(worst,
                     fd_max_rel_err([&] { return loss_rel<double>({s}, {l}); }, {s, l}, 24));
  }
  const double worst_primitives = worst;

  // end-to-end tiny model. Note: the reconstruction path requires the
  // channel count to be divisible by 16 (two 2x pixel shuffles), so the
  // smallest valid width 16 is used. Zero-initialized heads are nudged to
  // put the model in generic position (fractional sampling offsets, nonzero
  // flows) where the objective is differentiable.
  double worst_e2e = 0;
  {
    ModelConfig mc;
    mc.channels = 16;
    mc.flow_channels = 8;
    STINet<double> model(mc, Rng(5));
    TinyFlowNet<double> flownet(8, Rng(6));
    flownet.set_trainable(false);
    Rng nrng(7);
    auto nudge = [&](Tensor<double>& p, double s) {
      for (auto& v : p.values()) v += nrng.normal(0, s);
    };
    model.visit("m", [&](const std::string& name, Tensor<double>& p) {
      // give the zero-initialized heads small nonzero values
      bool all_zero = true;
      for (double v : p.values()) all_zero = all_zero && v == 0.0;
      if (all_zero) nudge(p, 0.03);
    });
    for (auto* pred : {&model.stlr.p_lr_prev, &model.stlr.p_lr_next, &model.stlr.p_hr_prev,
                       &model.stlr.p_hr_next})
      for (auto& v : pred->c2.b.values()) v += 0.29;
    // bias the flow head so MCL flows sit away from the hinge kinks
    flownet.visit("flow", [&](const std::string& name, Tensor<double>& p) {
      if (name.find("head.b") != std::string::npos)
        for (auto& v : p.values()) v = 0.31;
    });

    MotionSpec spec;
    spec.max_speed = 1.0;
    spec.num_objects = 1;
    SyntheticClip sc(9, 3, 32, 32, spec);
    auto sample = make_training_sample(sc.clip());
    std::vector<Tensor<double>> given = {
        image_to_tensor<double>(sample.lr_inputs.frames[0], true),
        image_to_tensor<double>(sample.lr_inputs.frames[1], true)};
    auto hr_gt = clip_to_tensors<double>(sample.hr_targets);
    auto lr_gt = clip_to_tensors<double>(sample.lr_targets);
    IdentityExtractor<double> phi;
    MclConfig mcl;
    mcl.abs = AbsMode::Adjacent;

    auto forward = [&] {
      auto res = model.forward(given, flownet, 1);
      auto l_rec_t = loss_rec(res.pred, hr_gt);
      auto l_p1 = add(loss_rec(res.phase1_lr, lr_gt), loss_rec(res.phase1_hr, hr_gt));
      auto l_per = loss_perceptual(res.pred, hr_gt, phi);
      auto flows = build_mcl_flows(res.pred, hr_gt, flownet, mcl);
      auto l_abs_t = loss_abs(flows.abs_pred, flows.abs_gt);
      auto l_rel_t = loss_rel(flows.rel_short, flows.rel_long);
      return total_loss(l_rec_t, l_p1, l_per, l_abs_t, l_rel_t, 0.1, 0.1);
    };

    // probe the input frames and a spread of parameters across all modules
    std::vector<Tensor<double>> leaves = {given[0], given[1]};
    ParamList<double> ps;
    model.visit("m", ps);
    for (size_t i = 0; i < ps.tensors.size(); i += 7) leaves.push_back(*ps.tensors[i]);
    worst_e2e = fd_max_rel_err(forward, leaves, 2, 11);
  }
  worst = std::max(worst_primitives, worst_e2e);
  report(3, worst < 1e-4,
         "max FD relative error: primitives " + fmt(worst_primitives) + ", end-to-end " +
             fmt(worst_e2e) + " (tiny model uses width 16, the smallest supported by the "
             "x16 shuffle reconstruction)",
         t.seconds());
}

// ---- criterion 4: zero-offset deformable alignment equals plain conv ----

void criterion4() {
  Timer t;
  Rng rng(41);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t ic = 1 + int64_t(rng.uniform_int(3));
    const int64_t oc = 1 + int64_t(rng.uniform_int(3));
    const int64_t h = 5 + int64_t(rng.uniform_int(6));
    const int64_t w = 5 + int64_t(rng.uniform_int(6));
    auto x = random_tensor<float>({ic, h, w}, rng, -1, 1);
    auto wt = random_tensor<float>({oc, ic, 3, 3}, rng, -1, 1);
    auto b = random_tensor<float>({oc}, rng, -1, 1);
    auto off = Tensor<float>::zeros({18, h, w});
    auto y1 = deform_conv3x3(x, off, wt, b);
    auto y2 = conv2d(x, wt, b);
    for (int64_t i = 0; i < y1.numel(); ++i)
      worst = std::max(worst, double(std::abs(y1.data()[i] - y2.data()[i])));
  }
  report(4, worst < 1e-5, "max abs deviation from plain 3x3 conv over 50 draws: " + fmt(worst),
         t.seconds());
}

// ---- criterion 5: graph construction and edge attributes ----

void criterion5() {
  Timer t;
  bool pass = true;
  std::string note;
  Rng rng(51);
  for (int64_t s = 1; s <= 10; ++s) {
    std::vector<Tensor<double>> lr, hr;
    for (int64_t i = 0; i < s; ++i) {
      lr.push_back(random_tensor<double>({4, 2, 2}, rng, -1, 1));
      hr.push_back(random_tensor<double>({4, 8, 8}, rng, -1, 1));
    }
    std::vector<double> times;
    for (int64_t i = 0; i < s; ++i) times.push_back(double(2 * i));
    auto g = build_graph(lr, hr, times);
    // brute-force enumeration of the two adjacency rules over all pairs
    int64_t expected = 0;
    for (int64_t a = 0; a < 2 * s; ++a)
      for (int64_t b = a + 1; b < 2 * s; ++b) {
        const bool a_lr = a < s, b_lr = b < s;
        const int64_t ta = a_lr ? a : a - s, tb = b_lr ? b : b - s;
        if (a_lr != b_lr && ta == tb) ++expected;          // counterpart rule
        else if (a_lr == b_lr && ta != tb) ++expected;     // same-level rule
      }
    pass = pass && int64_t(g.edges.size()) == expected;
    pass = pass && int64_t(g.edges.size()) == s * s;

    std::vector<Tensor<double>> pixel_feats = lr;
    for (const auto& h : hr) pixel_feats.push_back(resize_bilinear(h, 2, 2));
    edge_attributes(g, pixel_feats);
    for (size_t e = 0; e < g.edges.size(); ++e) {
      pass = pass && g.attrs[e].ef.item() >= -1.0 - 1e-12 && g.attrs[e].ef.item() <= 1.0 + 1e-12;
      pass = pass && g.attrs[e].ep.item() >= -1.0 - 1e-12 && g.attrs[e].ep.item() <= 1.0 + 1e-12;
    }
  }
  const double et0 = temporal_closeness(3.0, 3.0);
  const double et1 = temporal_closeness(3.0, 4.0);
  pass = pass && et0 == 0.5;
  pass = pass && std::abs(et1 - 0.26894) <= 1e-5;
  report(5, pass,
         "edge counts equal S^2 for S=1..10 by rule enumeration; ET(0)=" + fmt(et0) +
             ", ET(1)=" + fmt(et1) + "; EF/EP within [-1,1]",
         t.seconds());
}

// ---- criterion 6: inference shape and sequence contracts ----

void criterion6() {
  Timer t;
  Config cfg;
  cfg.data.T = 5;
  cfg.data.H = 32;
  cfg.data.W = 32;
  cfg.data.num_clips = 2;
  cfg.data.eval_clips = 1;
  cfg.data.max_speed = 1.5;
  cfg.data.augment = false;
  cfg.model.channels = 16;
  cfg.model.flow_channels = 8;
  cfg.train.total_iters = 2;
  cfg.train.batch_size = 2;
  cfg.train.flow_pretrain_iters = 2;
  TrainEngine<float> engine(cfg);
  engine.run();
  const std::string path =
      (std::filesystem::temp_directory_path() / "stinet_accept_tiny.ckpt").string();
  engine.save(path);
  auto lm = load_model<float>(path);

  auto clip = generate_synthetic_clip(61, 5, 32, 32, {});
  auto lr = degrade_bicubic(clip, 4);
  bool pass = true;
  std::string detail = "output counts:";
  for (auto [T, n] : std::vector<std::pair<int64_t, int64_t>>{{2, 1}, {2, 3}, {2, 5}, {4, 1}}) {
    VideoClip sub;
    for (int64_t i = 0; i < T; ++i) sub.frames.push_back(lr.frames[size_t(i % lr.T())]);
    auto out = infer_clip(lm.model, lm.flownet, sub, n);
    const int64_t want = T + (T - 1) * n;
    pass = pass && int64_t(out.size()) == want;
    pass = pass && out[0].h == 4 * lr.height() && out[0].w == 4 * lr.width();
    detail += " (" + std::to_string(T) + "," + std::to_string(n) + ")->" +
              std::to_string(out.size());
  }
  report(6, pass, detail + " at exactly 4x spatial size", t.seconds());
}

// ---- criteria 7 and 8: desk-scale learning and ablation direction ----

Config desk_config() {
  Config cfg;
  cfg.data.T = 7;
  cfg.data.H = 64;
  cfg.data.W = 64;
  cfg.data.num_clips = 8;
  cfg.data.eval_clips = 1;
  cfg.data.num_objects = 3;
  cfg.data.max_speed = 3.0;
  cfg.data.seed = 1234;
  cfg.data.augment = false;
  cfg.model.channels = 16;
  cfg.model.flow_channels = 12;
  cfg.mcl.abs = AbsMode::Adjacent;
  cfg.train.lr0 = 3e-4;
  cfg.train.decay_factor = 4;
  cfg.train.decay_every = 400;
  cfg.train.total_iters = 1000;  // CPU regime
  cfg.train.batch_size = 2;
  cfg.train.threads = 2;
  cfg.train.flow_pretrain_iters = 400;
  cfg.train.log_every = 100;
  cfg.train.seed = 0;
  cfg.train.task_strides = {2, 3};
  return cfg;
}

double baseline_psnr(const Config& cfg) {
  auto eval_set = build_synthetic_dataset(cfg.data, cfg.data.eval_clips,
                                          cfg.data.seed + 1000003);
  double total = 0;
  int64_t count = 0;
  for (const auto& gt : eval_set.clips) {
    auto lr = degrade_bicubic(gt, cfg.data.scale);
    VideoClip given;
    for (int64_t t = 0; t < lr.T(); t += 2) given.frames.push_back(lr.frames[size_t(t)]);
    auto frames = baseline_bicubic_repeat(given, 1, cfg.data.scale);
    for (int64_t t = 0; t < gt.T(); ++t) {
      total += psnr(frames[size_t(t)], gt.frames[size_t(t)]);
      ++count;
    }
  }
  return total / double(count);
}

double desk_full_psnr = 0;

void criterion7() {
  Timer t;
  Config cfg = desk_config();
  const double base = baseline_psnr(cfg);
  TrainEngine<float> engine(cfg);
  engine.run();
  auto eval = engine.evaluate();
  desk_full_psnr = eval.mean_psnr;
  const bool pass = !engine.diverged() && eval.mean_psnr >= base + 1.5;
  report(7, pass,
         "held-out PSNR " + fmt(eval.mean_psnr) + " dB vs baseline " + fmt(base) +
             " dB (+1.5 dB required, CPU regime: 1e3 iterations)",
         t.seconds());
}

void criterion8() {
  Timer t;
  Config base_cfg = desk_config();
  const std::vector<AblateVariant> variants = {
      {"wo_stlr", {{"model.stlr.enabled", false}}},
      {"wo_stgr", {{"model.stgr.enabled", false}}},
      {"wo_mcl", {{"mcl.abs", "off"}, {"mcl.rel", "off"}}},
      {"wo_flow_adaption", {{"model.flow.adaption", false}}},
  };
  bool pass = true;
  std::string detail = "full " + fmt(desk_full_psnr) + " dB vs";
  for (const auto& v : variants) {
    Config cfg = apply_variant(base_cfg, v);
    TrainEngine<float> engine(cfg);
    engine.run();
    auto eval = engine.evaluate();
    detail += " " + v.name + " " + fmt(eval.mean_psnr);
    if (!(desk_full_psnr >= eval.mean_psnr)) pass = false;
  }
  report(8, pass, detail + " (dB, shared seeds)", t.seconds());
}

// ---- criterion 9: metric fidelity ----

double ref_psnr_1ch(const Image& a, const Image& b, double cap = 100) {
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    mse += d * d;
  }
  mse /= double(a.data.size());
  if (mse <= 0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

double ref_ssim_1ch(const Image& img1, const Image& img2) {
  double kern[11][11];
  double ksum = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5, dx = x - 5;
      kern[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      ksum += kern[y][x];
    }
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) kern[y][x] /= ksum;
  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0;
  int64_t count = 0;
  for (int64_t y0 = 0; y0 + 11 <= img1.h; ++y0)
    for (int64_t x0 = 0; x0 + 11 <= img1.w; ++x0) {
      double m1 = 0, m2 = 0, s1 = 0, s2 = 0, s12 = 0;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
          const double a = img1.at(0, y0 + y, x0 + x);
          const double b = img2.at(0, y0 + y, x0 + x);
          m1 += kern[y][x] * a;
          m2 += kern[y][x] * b;
          s1 += kern[y][x] * a * a;
          s2 += kern[y][x] * b * b;
          s12 += kern[y][x] * a * b;
        }
      const double v1 = s1 - m1 * m1, v2 = s2 - m2 * m2, cov = s12 - m1 * m2;
      acc += ((2 * m1 * m2 + c1) * (2 * cov + c2)) /
             ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
      ++count;
    }
  return acc / double(count);
}

void criterion9() {
  Timer t;
  Rng rng(91);
  double worst_p = 0, worst_s = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Image a(3, 20, 24), b(3, 20, 24);
    for (auto& v : a.data) v = float(rng.uniform());
    for (auto& v : b.data) v = float(rng.uniform());
    worst_p = std::max(worst_p, std::abs(psnr(a, b) - ref_psnr_1ch(luma601(a), luma601(b))));
    worst_s = std::max(worst_s, std::abs(ssim(a, b) - ref_ssim_1ch(luma601(a), luma601(b))));
  }
  // closed form: uniform difference 0.1 on one channel -> exactly 20 dB
  Image u(1, 16, 16, 0.7f), v(1, 16, 16, 0.6f);
  const double closed = psnr(u, v);
  const bool closed_ok = std::abs(closed - 20.0) < 1e-5;  // float32 frame quantization floor
  const bool pass = worst_p < 1e-6 && worst_s < 1e-6 && closed_ok;
  report(9, pass,
         "max |PSNR delta| " + fmt(worst_p) + " dB, max |SSIM delta| " + fmt(worst_s) +
             " over 20 pairs; uniform-0.1 case = " + fmt(closed) + " dB",
         t.seconds());
}

// ---- criterion 10: determinism and persistence ----

void criterion10() {
  Timer t;
  Config cfg;
  cfg.data.T = 5;
  cfg.data.H = 32;
  cfg.data.W = 32;
  cfg.data.num_clips = 2;
  cfg.data.eval_clips = 1;
  cfg.data.max_speed = 1.5;
  cfg.data.augment = true;  // exercise the augmented path too
  cfg.model.channels = 16;
  cfg.model.flow_channels = 8;
  cfg.train.total_iters = 10;
  cfg.train.batch_size = 2;
  cfg.train.threads = 2;
  cfg.train.flow_pretrain_iters = 5;
  cfg.train.seed = 33;

  TrainEngine<float> a(cfg);
  a.run();
  TrainEngine<float> b(cfg);
  b.run();
  bool identical = a.loss_curve().size() == b.loss_curve().size();
  for (size_t i = 0; identical && i < a.loss_curve().size(); ++i)
    identical = a.loss_curve()[i].total == b.loss_curve()[i].total &&
                a.loss_curve()[i].l_rec == b.loss_curve()[i].l_rec;

  const std::string path =
      (std::filesystem::temp_directory_path() / "stinet_accept_det.ckpt").string();
  a.save(path);
  auto lm = load_model<float>(path);
  auto clip = generate_synthetic_clip(101, 5, 32, 32, {});
  auto lr = degrade_bicubic(clip, 4);
  VideoClip given;
  for (int64_t i = 0; i < 5; i += 2) given.frames.push_back(lr.frames[size_t(i)]);
  auto f1 = infer_clip(a.model(), a.flownet(), given, 1);
  auto f2 = infer_clip(lm.model, lm.flownet, given, 1);
  bool roundtrip = f1.size() == f2.size();
  for (size_t i = 0; roundtrip && i < f1.size(); ++i) roundtrip = f1[i].data == f2[i].data;

  report(10, identical && roundtrip,
         std::string("seeded reruns identical: ") + (identical ? "yes" : "no") +
             "; checkpoint reload inference bit-identical: " + (roundtrip ? "yes" : "no"),
         t.seconds());
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  int failures = 0;
  for (const auto& o : outcomes)
    if (!o.pass) ++failures;
  std::printf("%d/%zu criteria passed\n", int(outcomes.size()) - failures, outcomes.size());
  return failures;
}
