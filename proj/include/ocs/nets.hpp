// Network building blocks on the autodiff tape: linear layers, a strided
// conv encoder (expressed as per-tap gathers + matmuls), and a GRU cell.
// Parameters are named so checkpoints can be saved and restored in place.

#pragma once

#include "ocs/ad.hpp"
#include "ocs/common.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ocs {

struct ParamSet {
  std::vector<std::pair<std::string, ad::Var>> items;

  void add(const std::string& name, const ad::Var& v) { items.emplace_back(name, v); }
  void extend(const std::string& prefix, const ParamSet& other) {
    for (const auto& [n, v] : other.items) items.emplace_back(prefix + "." + n, v);
  }
  std::vector<ad::Var> vars() const {
    std::vector<ad::Var> out;
    for (const auto& [n, v] : items) out.push_back(v);
    return out;
  }
  std::int64_t count() const {
    std::int64_t n = 0;
    for (const auto& [name, v] : items) n += v.value().size();
    return n;
  }
};

// binary checkpoint with a config-hash stamp; loading checks names/shapes
void save_params(const std::filesystem::path& path, const ParamSet& params,
                 std::uint64_t config_hash);
std::uint64_t load_params(const std::filesystem::path& path, ParamSet& params);

struct Linear {
  ad::Var w;  // in x out
  ad::Var b;  // 1 x out

  Linear() = default;
  Linear(int in, int out, Rng& rng, double scale = -1.0);  // scale<0: He init
  static Linear zeros(int in, int out);
  ad::Var forward(const ad::Var& x) const;
  ParamSet params(const std::string& name) const;
};

struct Mlp {
  std::vector<Linear> layers;  // relu between, none after the last

  Mlp() = default;
  Mlp(int in, const std::vector<int>& hidden, int out, Rng& rng);
  ad::Var forward(const ad::Var& x) const;
  ParamSet params(const std::string& name) const;
};

// 3x3 stride-2 conv stack ending in a linear projection; input images are
// (H*W, C) row-major arrays
struct ConvEncoder {
  struct Layer {
    std::vector<ad::Var> taps;  // 9 of (in x out)
    ad::Var bias;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    std::vector<std::shared_ptr<const std::vector<Eigen::Index>>> tap_index;
  };
  std::vector<Layer> layers;
  Linear proj;
  int input_h = 0, input_w = 0, input_c = 0, out_dim = 0;

  ConvEncoder() = default;
  ConvEncoder(int h, int w, int c, const std::vector<int>& channels, int out,
              Rng& rng);
  ad::Var forward(const ad::Var& image) const;
  ParamSet params(const std::string& name) const;
};

struct GruCell {
  Linear in_r, in_u, in_h;   // input -> hidden
  Linear rec_r, rec_u, rec_h;  // hidden -> hidden (no bias duplication: biases live on in_*)
  int hidden = 0;

  GruCell() = default;
  GruCell(int input, int hidden, Rng& rng);
  ad::Var forward(const ad::Var& x, const ad::Var& h) const;
  ad::Var initial_state(Eigen::Index batch) const;
  ParamSet params(const std::string& name) const;
};

}  // namespace ocs
