#pragma once

#include <utility>
#include <vector>

#include "stinet/config.hpp"
#include "stinet/video.hpp"

namespace stinet {

// Training/evaluation clip source. Synthetic datasets keep the generator
// objects so analytic flow truth is available for flow supervision; clip
// directories fall back to photometric flow training.
struct Dataset {
  std::vector<SyntheticClip> synth;
  std::vector<VideoClip> clips;

  bool has_truth() const { return !synth.empty(); }
  size_t size() const { return clips.size(); }
};

inline Dataset build_synthetic_dataset(const DataConfig& d, int64_t count, uint64_t seed_base) {
  Dataset ds;
  MotionSpec spec;
  spec.num_objects = d.num_objects;
  spec.max_speed = d.max_speed;
  for (int64_t i = 0; i < count; ++i) {
    ds.synth.emplace_back(seed_base + uint64_t(i), d.T, d.H, d.W, spec);
    ds.clips.push_back(ds.synth.back().clip());
  }
  return ds;
}

// Returns (train, eval). Synthetic eval clips use a disjoint seed range;
// directory datasets reserve the last eval_clips entries for evaluation.
inline std::pair<Dataset, Dataset> build_datasets(const DataConfig& d) {
  if (!d.path.empty()) {
    auto clips = load_dataset(d.path);
    STINET_CHECK(int64_t(clips.size()) > d.eval_clips,
                 "dataset: need more clips than eval_clips in ", d.path);
    Dataset train, eval;
    for (size_t i = 0; i < clips.size(); ++i) {
      if (int64_t(i) + d.eval_clips < int64_t(clips.size())) train.clips.push_back(clips[i]);
      else eval.clips.push_back(clips[i]);
    }
    return {train, eval};
  }
  auto train = build_synthetic_dataset(d, d.num_clips, d.seed);
  auto eval = build_synthetic_dataset(d, d.eval_clips, d.seed + 1000003);
  return {train, eval};
}

}  // namespace stinet
