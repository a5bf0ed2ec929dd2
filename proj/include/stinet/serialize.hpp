#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "stinet/module.hpp"
#include "stinet/optim.hpp"

namespace stinet {

// Binary checkpoint: every parameter tensor, the Adam state, the iteration
// counter and the full config (JSON text) with its fingerprint. The format
// round-trips bit-exactly.
namespace ckpt {

constexpr char kMagic[8] = {'S', 'T', 'I', 'N', 'E', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  STINET_CHECK(in.good(), "checkpoint: truncated or corrupt file ", path);
}
inline void write_str(std::ofstream& out, const std::string& s) {
  write_pod(out, uint64_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}
inline std::string read_str(std::ifstream& in, const std::string& path) {
  uint64_t n = 0;
  read_pod(in, n, path);
  STINET_CHECK(n < (1ULL << 32), "checkpoint: implausible string length in ", path);
  std::string s(size_t(n), '\0');
  in.read(s.data(), std::streamsize(n));
  STINET_CHECK(in.good(), "checkpoint: truncated or corrupt file ", path);
  return s;
}

}  // namespace ckpt

template <typename S>
struct CheckpointData {
  uint64_t fingerprint = 0;
  int64_t iteration = 0;
  std::string config_json;
  std::vector<std::string> names;
  std::vector<std::vector<int64_t>> shapes;
  std::vector<std::vector<S>> values;
  bool has_opt = false;
  int64_t opt_step = 0;
  std::vector<std::vector<S>> opt_m, opt_v;
};

template <typename S>
void save_checkpoint(const std::string& path, const ParamList<S>& params, uint64_t fingerprint,
                     int64_t iteration, const std::string& config_json, Adam<S>* opt = nullptr) {
  std::ofstream out(path, std::ios::binary);
  STINET_CHECK(out.good(), "checkpoint: cannot open ", path, " for writing");
  out.write(ckpt::kMagic, 8);
  ckpt::write_pod(out, ckpt::kVersion);
  ckpt::write_pod(out, uint32_t(sizeof(S)));
  ckpt::write_pod(out, fingerprint);
  ckpt::write_pod(out, iteration);
  ckpt::write_str(out, config_json);
  ckpt::write_pod(out, uint64_t(params.tensors.size()));
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    ckpt::write_str(out, params.names[i]);
    const auto& t = *params.tensors[i];
    ckpt::write_pod(out, uint32_t(t.ndim()));
    for (size_t d = 0; d < t.ndim(); ++d) ckpt::write_pod(out, t.shape()[d]);
    out.write(reinterpret_cast<const char*>(t.data()),
              std::streamsize(sizeof(S) * size_t(t.numel())));
  }
  ckpt::write_pod(out, uint8_t(opt ? 1 : 0));
  if (opt) {
    ckpt::write_pod(out, opt->step_count());
    // the optimizer may cover a subset of the stored parameters (the flow
    // estimator is frozen), so moment arrays carry their own sizes
    ckpt::write_pod(out, uint64_t(opt->moment1().size()));
    auto write_moments = [&](const std::vector<std::vector<S>>& ms) {
      for (const auto& m : ms) {
        ckpt::write_pod(out, uint64_t(m.size()));
        out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(S) * m.size()));
      }
    };
    write_moments(opt->moment1());
    write_moments(opt->moment2());
  }
  STINET_CHECK(out.good(), "checkpoint: write failed for ", path);
}

template <typename S>
CheckpointData<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  STINET_CHECK(in.good(), "checkpoint: cannot open ", path);
  char magic[8];
  in.read(magic, 8);
  STINET_CHECK(in.good() && std::memcmp(magic, ckpt::kMagic, 8) == 0,
               "checkpoint: bad magic in ", path);
  uint32_t version = 0, ssize = 0;
  ckpt::read_pod(in, version, path);
  STINET_CHECK(version == ckpt::kVersion, "checkpoint: unsupported version in ", path);
  ckpt::read_pod(in, ssize, path);
  STINET_CHECK(ssize == sizeof(S), "checkpoint: scalar width mismatch in ", path);
  CheckpointData<S> d;
  ckpt::read_pod(in, d.fingerprint, path);
  ckpt::read_pod(in, d.iteration, path);
  d.config_json = ckpt::read_str(in, path);
  uint64_t count = 0;
  ckpt::read_pod(in, count, path);
  for (uint64_t i = 0; i < count; ++i) {
    d.names.push_back(ckpt::read_str(in, path));
    uint32_t ndim = 0;
    ckpt::read_pod(in, ndim, path);
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (auto& s : shape) {
      ckpt::read_pod(in, s, path);
      numel *= s;
    }
    std::vector<S> vals(static_cast<size_t>(numel));
    in.read(reinterpret_cast<char*>(vals.data()), std::streamsize(sizeof(S) * vals.size()));
    STINET_CHECK(in.good(), "checkpoint: truncated parameter data in ", path);
    d.shapes.push_back(std::move(shape));
    d.values.push_back(std::move(vals));
  }
  uint8_t has_opt = 0;
  ckpt::read_pod(in, has_opt, path);
  d.has_opt = has_opt != 0;
  if (d.has_opt) {
    ckpt::read_pod(in, d.opt_step, path);
    uint64_t opt_count = 0;
    ckpt::read_pod(in, opt_count, path);
    STINET_CHECK(opt_count <= count, "checkpoint: implausible optimizer entry count in ", path);
    auto read_moments = [&](std::vector<std::vector<S>>& dst) {
      for (uint64_t i = 0; i < opt_count; ++i) {
        uint64_t m = 0;
        ckpt::read_pod(in, m, path);
        std::vector<S> vals(static_cast<size_t>(m));
        in.read(reinterpret_cast<char*>(vals.data()), std::streamsize(sizeof(S) * vals.size()));
        STINET_CHECK(in.good(), "checkpoint: truncated optimizer state in ", path);
        dst.push_back(std::move(vals));
      }
    };
    read_moments(d.opt_m);
    read_moments(d.opt_v);
  }
  return d;
}

// Restores parameter values by name; every parameter must be present with a
// matching shape.
template <typename S>
void restore_params(const CheckpointData<S>& d, ParamList<S>& params) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < d.names.size(); ++i) index[d.names[i]] = i;
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    auto it = index.find(params.names[i]);
    STINET_CHECK(it != index.end(), "checkpoint: missing parameter ", params.names[i]);
    const size_t k = it->second;
    STINET_CHECK(d.shapes[k] == params.tensors[i]->shape(), "checkpoint: shape mismatch for ",
                 params.names[i]);
    std::copy(d.values[k].begin(), d.values[k].end(), params.tensors[i]->values().begin());
  }
}

template <typename S>
void restore_optimizer(const CheckpointData<S>& d, Adam<S>& opt) {
  STINET_CHECK(d.has_opt, "checkpoint: no optimizer state stored");
  STINET_CHECK(d.opt_m.size() == opt.moment1().size(), "checkpoint: optimizer size mismatch");
  opt.set_step_count(d.opt_step);
  for (size_t i = 0; i < d.opt_m.size(); ++i) {
    STINET_CHECK(d.opt_m[i].size() == opt.moment1()[i].size(),
                 "checkpoint: optimizer moment size mismatch");
    opt.moment1()[i] = d.opt_m[i];
    opt.moment2()[i] = d.opt_v[i];
  }
}

}  // namespace stinet
