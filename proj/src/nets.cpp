#include "ocs/nets.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ocs {

using ad::Array;
using ad::Var;

namespace {

Array random_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Array a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = stddev * rng.normal();
  return a;
}

}  // namespace

void save_params(const std::filesystem::path& path, const ParamSet& params,
                 std::uint64_t config_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  const char magic[8] = {'O', 'C', 'S', 'C', 'K', 'P', 'T', '1'};
  f.write(magic, 8);
  f.write(reinterpret_cast<const char*>(&config_hash), 8);
  std::uint64_t n = params.items.size();
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& [name, v] : params.items) {
    std::uint64_t len = name.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(name.data(), static_cast<std::streamsize>(len));
    std::uint64_t rows = static_cast<std::uint64_t>(v.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(v.cols());
    f.write(reinterpret_cast<const char*>(&rows), 8);
    f.write(reinterpret_cast<const char*>(&cols), 8);
    f.write(reinterpret_cast<const char*>(v.value().data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
  }
}

std::uint64_t load_params(const std::filesystem::path& path, ParamSet& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, "OCSCKPT1", 8) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path.string());
  std::uint64_t config_hash = 0, n = 0;
  f.read(reinterpret_cast<char*>(&config_hash), 8);
  f.read(reinterpret_cast<char*>(&n), 8);
  if (n != params.items.size())
    throw std::runtime_error("checkpoint parameter count mismatch in " + path.string());
  for (auto& [name, v] : params.items) {
    std::uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 8);
    std::string got(len, '\0');
    f.read(got.data(), static_cast<std::streamsize>(len));
    std::uint64_t rows = 0, cols = 0;
    f.read(reinterpret_cast<char*>(&rows), 8);
    f.read(reinterpret_cast<char*>(&cols), 8);
    if (got != name || rows != static_cast<std::uint64_t>(v.rows()) ||
        cols != static_cast<std::uint64_t>(v.cols()))
      throw std::runtime_error("checkpoint entry mismatch at '" + got + "' in " +
                               path.string());
    f.read(reinterpret_cast<char*>(v.mutable_value().data()),
           static_cast<std::streamsize>(sizeof(double) * rows * cols));
  }
  if (!f) throw std::runtime_error("truncated checkpoint " + path.string());
  return config_hash;
}

Linear::Linear(int in, int out, Rng& rng, double scale) {
  double stddev = scale < 0 ? std::sqrt(2.0 / in) : scale;
  w = Var::param(random_matrix(in, out, stddev, rng));
  b = Var::param(Array::Zero(1, out));
}

Linear Linear::zeros(int in, int out) {
  Linear l;
  l.w = Var::param(Array::Zero(in, out));
  l.b = Var::param(Array::Zero(1, out));
  return l;
}

Var Linear::forward(const Var& x) const { return ad::matmul(x, w) + b; }

ParamSet Linear::params(const std::string& name) const {
  ParamSet p;
  p.add(name + ".w", w);
  p.add(name + ".b", b);
  return p;
}

Mlp::Mlp(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  int prev = in;
  for (int h : hidden) {
    layers.emplace_back(prev, h, rng);
    prev = h;
  }
  layers.emplace_back(prev, out, rng);
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = ad::relu(h);
  }
  return h;
}

ParamSet Mlp::params(const std::string& name) const {
  ParamSet p;
  for (size_t i = 0; i < layers.size(); ++i)
    p.extend(name, layers[i].params("l" + std::to_string(i)));
  return p;
}

ConvEncoder::ConvEncoder(int h, int w, int c, const std::vector<int>& channels,
                         int out, Rng& rng)
    : input_h(h), input_w(w), input_c(c), out_dim(out) {
  int cur_h = h, cur_w = w, cur_c = c;
  for (int ch : channels) {
    Layer layer;
    layer.in_h = cur_h;
    layer.in_w = cur_w;
    layer.out_h = (cur_h + 1) / 2;
    layer.out_w = (cur_w + 1) / 2;
    double stddev = std::sqrt(2.0 / (9.0 * cur_c));
    for (int tap = 0; tap < 9; ++tap)
      layer.taps.push_back(Var::param(random_matrix(cur_c, ch, stddev, rng)));
    layer.bias = Var::param(Array::Zero(1, ch));
    // stride-2 3x3 with pad 1: tap (dy, dx) reads input row (2oy+dy-1, 2ox+dx-1)
    for (int tap = 0; tap < 9; ++tap) {
      int dy = tap / 3 - 1, dx = tap % 3 - 1;
      auto idx = std::make_shared<std::vector<Eigen::Index>>();
      idx->reserve(static_cast<size_t>(layer.out_h) * layer.out_w);
      for (int oy = 0; oy < layer.out_h; ++oy)
        for (int ox = 0; ox < layer.out_w; ++ox) {
          int iy = 2 * oy + dy, ix = 2 * ox + dx;
          if (iy < 0 || iy >= cur_h || ix < 0 || ix >= cur_w)
            idx->push_back(-1);
          else
            idx->push_back(static_cast<Eigen::Index>(iy) * cur_w + ix);
        }
      layer.tap_index.push_back(std::move(idx));
    }
    layers.push_back(std::move(layer));
    cur_h = layers.back().out_h;
    cur_w = layers.back().out_w;
    cur_c = ch;
  }
  proj = Linear(cur_h * cur_w * cur_c, out, rng);
}

Var ConvEncoder::forward(const Var& image) const {
  if (image.rows() != static_cast<Eigen::Index>(input_h) * input_w ||
      image.cols() != input_c)
    throw std::invalid_argument("ConvEncoder: bad input shape");
  Var x = image;
  for (const auto& layer : layers) {
    Eigen::Index out_px = static_cast<Eigen::Index>(layer.out_h) * layer.out_w;
    Var acc;
    for (int tap = 0; tap < 9; ++tap) {
      Var patch = ad::gather_rows(x, layer.tap_index[tap], out_px);
      Var term = ad::matmul(patch, layer.taps[tap]);
      acc = tap == 0 ? term : acc + term;
    }
    x = ad::relu(acc + layer.bias);
  }
  // flatten (out_px, C) -> (1, out_px * C); column-major data maps channel-major
  Eigen::Index n = x.value().size();
  Array flat = Eigen::Map<const Array>(x.value().data(), 1, n);
  Var flat_v;
  if (x.requires_grad()) {
    auto xn = x.node();
    auto node = std::make_shared<ad::Node>();
    node->val = flat;
    node->requires_grad = true;
    node->parents = {xn};
    Eigen::Index rows = x.rows(), cols = x.cols();
    node->backward_fn = [xn, rows, cols](ad::Node& self) {
      xn->accumulate(Eigen::Map<const Array>(self.grad.data(), rows, cols));
    };
    flat_v = Var(node);
  } else {
    flat_v = Var::constant(flat);
  }
  return ad::relu(proj.forward(flat_v));
}

ParamSet ConvEncoder::params(const std::string& name) const {
  ParamSet p;
  for (size_t i = 0; i < layers.size(); ++i) {
    for (int tap = 0; tap < 9; ++tap)
      p.add(name + ".c" + std::to_string(i) + ".t" + std::to_string(tap),
            layers[i].taps[tap]);
    p.add(name + ".c" + std::to_string(i) + ".b", layers[i].bias);
  }
  p.extend(name, proj.params("proj"));
  return p;
}

GruCell::GruCell(int input, int hidden_, Rng& rng) : hidden(hidden_) {
  double s_in = std::sqrt(1.0 / input), s_rec = std::sqrt(1.0 / hidden_);
  in_r = Linear(input, hidden_, rng, s_in);
  in_u = Linear(input, hidden_, rng, s_in);
  in_h = Linear(input, hidden_, rng, s_in);
  rec_r = Linear(hidden_, hidden_, rng, s_rec);
  rec_u = Linear(hidden_, hidden_, rng, s_rec);
  rec_h = Linear(hidden_, hidden_, rng, s_rec);
}

Var GruCell::forward(const Var& x, const Var& h) const {
  Var r = ad::sigmoid(in_r.forward(x) + rec_r.forward(h));
  Var u = ad::sigmoid(in_u.forward(x) + rec_u.forward(h));
  Var cand = ad::tanh(in_h.forward(x) + rec_h.forward(r * h));
  return (1.0 - u) * h + u * cand;
}

Var GruCell::initial_state(Eigen::Index batch) const {
  return Var::constant(Array::Zero(batch, hidden));
}

ParamSet GruCell::params(const std::string& name) const {
  ParamSet p;
  p.extend(name, in_r.params("in_r"));
  p.extend(name, in_u.params("in_u"));
  p.extend(name, in_h.params("in_h"));
  p.extend(name, rec_r.params("rec_r"));
  p.extend(name, rec_u.params("rec_u"));
  p.extend(name, rec_h.params("rec_h"));
  return p;
}

}  // namespace ocs
