#include "rdist/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "rdist/errors.hpp"
#include "rdist/random.hpp"

namespace rdist {

// --- configuration and layout ------------------------------------------------------

void NetworkConfig::validate() const {
  if (stage_channels.empty()) throw ShapeError("network needs at least one stage");
  for (int c : stage_channels) {
    if (c < 1) throw ShapeError("stage channel counts must be positive");
  }
  if (blocks_per_stage < 1) throw ShapeError("blocks per stage must be >= 1");
  if (head_width < 1) throw ShapeError("head width must be >= 1");
  const int divisor = 1 << (stage_channels.size() + 1);
  if (input_size < divisor || input_size % divisor != 0) {
    throw ShapeError("input size " + std::to_string(input_size) + " must be divisible by " +
                     std::to_string(divisor));
  }
}

bool is_trainable(const std::string& name) {
  return !name.ends_with(".running_mean") && !name.ends_with(".running_var");
}

const Tensor& Weights::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ShapeError("no tensor named " + name);
}

Tensor& Weights::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Weights&>(*this).at(name));
}

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    if (is_trainable(t.name)) n += t.numel();
  }
  return n;
}

namespace {

struct ConvPlan {
  int weight;
  int cin, cout, k, stride, pad;
};

struct BnPlan {
  int gamma, beta, mean, var;
};

struct BlockPlan {
  ConvPlan conv1;
  BnPlan bn1;
  ConvPlan conv2;
  BnPlan bn2;
  bool projection = false;
  ConvPlan proj{};
  BnPlan proj_bn{};
};

struct HeadPlan {
  int fc1;
  BnPlan bn;
  int fc2_w, fc2_b;
  int in, width;
};

struct Plan {
  std::vector<TensorSpec> specs;
  ConvPlan stem;
  BnPlan stem_bn;
  std::vector<BlockPlan> blocks;
  HeadPlan heads[2];

  int add(std::string name, std::vector<int> shape) {
    specs.push_back({std::move(name), std::move(shape)});
    return static_cast<int>(specs.size()) - 1;
  }

  ConvPlan conv(const std::string& name, int cin, int cout, int k, int stride) {
    return {add(name + ".weight", {cout, cin, k, k}), cin, cout, k, stride, k / 2};
  }

  BnPlan bn(const std::string& name, int c) {
    BnPlan p;
    p.gamma = add(name + ".gamma", {c});
    p.beta = add(name + ".beta", {c});
    p.mean = add(name + ".running_mean", {c});
    p.var = add(name + ".running_var", {c});
    return p;
  }
};

Plan make_plan(const NetworkConfig& cfg) {
  cfg.validate();
  Plan plan;
  int c = cfg.stage_channels.front();
  plan.stem = plan.conv("stem.conv", 3, c, 3, 2);
  plan.stem_bn = plan.bn("stem.bn", c);
  for (size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    const int cout = cfg.stage_channels[s];
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      const int stride = b == 0 ? 2 : 1;
      BlockPlan blk;
      blk.conv1 = plan.conv(prefix + ".conv1", c, cout, 3, stride);
      blk.bn1 = plan.bn(prefix + ".bn1", cout);
      blk.conv2 = plan.conv(prefix + ".conv2", cout, cout, 3, 1);
      blk.bn2 = plan.bn(prefix + ".bn2", cout);
      blk.projection = stride != 1 || c != cout;
      if (blk.projection) {
        blk.proj = plan.conv(prefix + ".proj", c, cout, 1, stride);
        blk.proj_bn = plan.bn(prefix + ".proj_bn", cout);
      }
      plan.blocks.push_back(blk);
      c = cout;
    }
  }
  const char* head_names[2] = {"head_k1", "head_k2"};
  for (int h = 0; h < 2; ++h) {
    const std::string prefix = head_names[h];
    HeadPlan& hp = plan.heads[h];
    hp.in = c;
    hp.width = cfg.head_width;
    hp.fc1 = plan.add(prefix + ".fc1.weight", {cfg.head_width, c});
    hp.bn = plan.bn(prefix + ".bn", cfg.head_width);
    hp.fc2_w = plan.add(prefix + ".fc2.weight", {1, cfg.head_width});
    hp.fc2_b = plan.add(prefix + ".fc2.bias", {1});
  }
  return plan;
}

std::size_t shape_numel(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

}  // namespace

std::vector<TensorSpec> architecture(const NetworkConfig& cfg) { return make_plan(cfg).specs; }

Weights init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
  const auto specs = architecture(cfg);
  Weights w;
  w.tensors.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    Tensor t{spec.name, spec.shape, std::vector<float>(shape_numel(spec.shape), 0.0f)};
    const std::string& n = spec.name;
    if (n.ends_with(".gamma") || n.ends_with(".running_var")) {
      std::fill(t.values.begin(), t.values.end(), 1.0f);
    } else if (n.ends_with(".weight")) {
      const std::size_t fan_in = t.numel() / static_cast<std::size_t>(spec.shape[0]);
      // Output layers start small so initial predictions sit near zero.
      const double gain = n.ends_with(".fc2.weight") ? 0.1 : 2.0;
      const double sigma = std::sqrt(gain / static_cast<double>(fan_in));
      CounterRng rng(derive_seed(seed, i));
      for (float& v : t.values) v = static_cast<float>(rng.normal(0.0, sigma));
    }
    w.tensors.push_back(std::move(t));
  }
  return w;
}

void validate_weights(const Weights& w, const NetworkConfig& cfg) {
  const auto specs = architecture(cfg);
  if (specs.size() != w.tensors.size()) {
    throw ShapeError("tensor count mismatch: configuration expects " + std::to_string(specs.size()) +
                     ", weights have " + std::to_string(w.tensors.size()));
  }
  for (size_t i = 0; i < specs.size(); ++i) {
    const Tensor& t = w.tensors[i];
    if (t.name != specs[i].name || t.shape != specs[i].shape) {
      throw ShapeError("tensor " + std::to_string(i) + " (" + t.name + ") does not match expected " +
                       specs[i].name);
    }
    if (t.values.size() != shape_numel(t.shape)) {
      throw ShapeError("tensor " + t.name + " has the wrong number of values");
    }
    for (float v : t.values) {
      if (!std::isfinite(v)) throw DomainError("tensor " + t.name + " contains non-finite values");
    }
  }
}

NetworkConfig infer_config(const Weights& w, int input_size) {
  const auto has = [&](const std::string& name) {
    return std::any_of(w.tensors.begin(), w.tensors.end(),
                       [&](const Tensor& t) { return t.name == name; });
  };
  NetworkConfig cfg;
  cfg.input_size = input_size;
  cfg.stage_channels.clear();
  for (int s = 0; has("stage" + std::to_string(s) + ".block0.conv1.weight"); ++s) {
    cfg.stage_channels.push_back(w.at("stage" + std::to_string(s) + ".block0.conv1.weight").shape.at(0));
  }
  cfg.blocks_per_stage = 0;
  while (has("stage0.block" + std::to_string(cfg.blocks_per_stage) + ".conv1.weight")) {
    ++cfg.blocks_per_stage;
  }
  if (cfg.stage_channels.empty() || !has("head_k1.fc1.weight")) {
    throw ShapeError("weights do not describe a known network layout");
  }
  cfg.head_width = w.at("head_k1.fc1.weight").shape.at(0);
  validate_weights(w, cfg);
  return cfg;
}

// --- serialization -------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("truncated weight file");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const Weights& w) {
  std::vector<std::uint8_t> out = {'R', 'D', 'W', 'T'};
  put_u32(out, Weights::kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(w.tensors.size()));
  for (const auto& t : w.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Weights decode_weights(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.bytes(4) != "RDWT") throw FormatError("bad magic: not an RDWT weight file");
  const std::uint32_t version = in.u32();
  if (version != Weights::kFormatVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  Weights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const std::uint32_t name_len = in.u32();
    if (name_len > 4096) throw FormatError("implausible tensor name length");
    t.name = in.bytes(name_len);
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw FormatError("implausible tensor rank");
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = in.u32();
      if (d > (1u << 28)) throw FormatError("implausible tensor dimension");
      t.shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    if (numel > (std::size_t{1} << 30)) throw FormatError("implausible tensor size");
    t.values.resize(numel);
    for (float& v : t.values) v = std::bit_cast<float>(in.u32());
    w.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError("trailing bytes after the last tensor");
  return w;
}

void save_weights(const std::filesystem::path& path, const Weights& w) {
  const auto bytes = encode_weights(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Weights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_weights(bytes);
}

// --- batches -------------------------------------------------------------------------

void append_normalized(const Image& img, std::vector<float>& out) {
  const int plane = img.width() * img.height();
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(plane) * 3);
  const auto& px = img.data();
  for (int i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      out[base + static_cast<std::size_t>(c) * plane + i] =
          static_cast<float>(px[static_cast<std::size_t>(i) * 3 + c]) / 127.5f - 1.0f;
    }
  }
}

Batch make_batch(std::span<const Image> images, int input_size) {
  Batch b;
  b.size = static_cast<int>(images.size());
  b.height = b.width = input_size;
  b.data.reserve(images.size() * 3 * static_cast<std::size_t>(input_size) * input_size);
  for (const auto& img : images) {
    if (img.width() != input_size || img.height() != input_size) {
      throw ShapeError("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                       ", network expects " + std::to_string(input_size) + "x" + std::to_string(input_size));
    }
    append_normalized(img, b.data);
  }
  return b;
}

// --- layers ----------------------------------------------------------------------------

namespace {

template <typename T>
using Mat = RowMatrix<T>;
template <typename T>
using Params = std::vector<std::vector<T>>;

// Activations are stored channel-major: one row per channel, columns ordered
// (sample, y, x).
template <typename T>
struct Act {
  Mat<T> m;
  int n = 0, h = 0, w = 0;
};

template <typename T>
Eigen::Map<const Mat<T>> cmap(const Params<T>& p, int idx, int rows, int cols) {
  return Eigen::Map<const Mat<T>>(p[static_cast<size_t>(idx)].data(), rows, cols);
}

template <typename T>
Eigen::Map<Mat<T>> map(Params<T>& p, int idx, int rows, int cols) {
  return Eigen::Map<Mat<T>>(p[static_cast<size_t>(idx)].data(), rows, cols);
}

template <typename T>
struct Conv {
  ConvPlan plan;
  Mat<T> col;
  int n = 0, ih = 0, iw = 0, oh = 0, ow = 0;

  int kdim() const { return plan.cin * plan.k * plan.k; }

  Act<T> forward(const Params<T>& P, const Act<T>& x) {
    n = x.n;
    ih = x.h;
    iw = x.w;
    oh = (ih + 2 * plan.pad - plan.k) / plan.stride + 1;
    ow = (iw + 2 * plan.pad - plan.k) / plan.stride + 1;
    const int k = plan.k, s = plan.stride, pad = plan.pad;
    col.resize(kdim(), static_cast<Eigen::Index>(n) * oh * ow);
    for (int c = 0; c < plan.cin; ++c) {
      const T* src_c = x.m.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* dst = col.row((c * k + ky) * k + kx).data();
          for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * s - pad + ky;
              T* d = dst + (static_cast<size_t>(b) * oh + oy) * ow;
              if (iy < 0 || iy >= ih) {
                std::fill(d, d + ow, T(0));
                continue;
              }
              const T* srow = src_c + (static_cast<size_t>(b) * ih + iy) * iw;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s - pad + kx;
                d[ox] = (ix >= 0 && ix < iw) ? srow[ix] : T(0);
              }
            }
          }
        }
      }
    }
    Act<T> y;
    y.n = n;
    y.h = oh;
    y.w = ow;
    y.m.noalias() = cmap(P, plan.weight, plan.cout, kdim()) * col;
    return y;
  }

  Act<T> backward(const Params<T>& P, Params<T>& G, const Act<T>& dy) {
    map(G, plan.weight, plan.cout, kdim()).noalias() += dy.m * col.transpose();
    Mat<T> dcol;
    dcol.noalias() = cmap(P, plan.weight, plan.cout, kdim()).transpose() * dy.m;
    Act<T> dx;
    dx.n = n;
    dx.h = ih;
    dx.w = iw;
    dx.m.setZero(plan.cin, static_cast<Eigen::Index>(n) * ih * iw);
    const int k = plan.k, s = plan.stride, pad = plan.pad;
    for (int c = 0; c < plan.cin; ++c) {
      T* dst_c = dx.m.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* src = dcol.row((c * k + ky) * k + kx).data();
          for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * s - pad + ky;
              if (iy < 0 || iy >= ih) continue;
              const T* srow = src + (static_cast<size_t>(b) * oh + oy) * ow;
              T* drow = dst_c + (static_cast<size_t>(b) * ih + iy) * iw;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s - pad + kx;
                if (ix >= 0 && ix < iw) drow[ix] += srow[ox];
              }
            }
          }
        }
      }
    }
    return dx;
  }
};

// Per-row batch normalization; rows are channels (or features), columns are
// the samples/positions the statistics run over.
template <typename T>
struct BatchNorm {
  BnPlan plan;
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;

  void forward(Params<T>& P, Mat<T>& x, Mode mode, T momentum, T eps) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    T* gamma = P[plan.gamma].data();
    T* beta = P[plan.beta].data();
    T* rmean = P[plan.mean].data();
    T* rvar = P[plan.var].data();
    if (mode == Mode::Eval) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const T scale = gamma[r] / std::sqrt(rvar[r] + eps);
        const T shift = beta[r] - rmean[r] * scale;
        x.row(r).array() = x.row(r).array() * scale + shift;
      }
      return;
    }
    xhat.resize(rows, cols);
    inv_std.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const T mean = x.row(r).mean();
      const T var = (x.row(r).array() - mean).square().mean();
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[r] = is;
      xhat.row(r) = (x.row(r).array() - mean) * is;
      x.row(r) = xhat.row(r).array() * gamma[r] + beta[r];
      rmean[r] = momentum * rmean[r] + (T(1) - momentum) * mean;
      rvar[r] = momentum * rvar[r] + (T(1) - momentum) * var;
    }
  }

  void backward(const Params<T>& P, Params<T>& G, Mat<T>& dy) {
    const Eigen::Index rows = dy.rows();
    const T count = static_cast<T>(dy.cols());
    const T* gamma = P[plan.gamma].data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const T dbeta = dy.row(r).sum();
      const T dgamma = (dy.row(r).array() * xhat.row(r).array()).sum();
      G[plan.gamma][r] += dgamma;
      G[plan.beta][r] += dbeta;
      const T k = gamma[r] * inv_std[r] / count;
      dy.row(r) = k * (count * dy.row(r).array() - dbeta - xhat.row(r).array() * dgamma);
    }
  }
};

template <typename T>
void leaky_forward(Mat<T>& x, T slope) {
  x = x.unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
}

// dy *= f'(x) where y = f(x) shares the sign of x.
template <typename T>
void leaky_backward(Mat<T>& dy, const Mat<T>& y, T slope) {
  dy.array() *= y.unaryExpr([slope](T v) { return v > T(0) ? T(1) : slope; }).array();
}

template <typename T>
struct Block {
  Conv<T> conv1, conv2, proj;
  BatchNorm<T> bn1, bn2, proj_bn;
  bool projection = false;
  Mat<T> act1, out;

  Act<T> forward(Params<T>& P, const Act<T>& x, Mode mode, T slope, T mom, T eps) {
    Act<T> h = conv1.forward(P, x);
    bn1.forward(P, h.m, mode, mom, eps);
    leaky_forward(h.m, slope);
    if (mode == Mode::Train) act1 = h.m;
    Act<T> h2 = conv2.forward(P, h);
    bn2.forward(P, h2.m, mode, mom, eps);
    if (projection) {
      Act<T> sc = proj.forward(P, x);
      proj_bn.forward(P, sc.m, mode, mom, eps);
      h2.m += sc.m;
    } else {
      h2.m += x.m;
    }
    leaky_forward(h2.m, slope);
    if (mode == Mode::Train) out = h2.m;
    return h2;
  }

  Act<T> backward(const Params<T>& P, Params<T>& G, Act<T> dy, T slope) {
    leaky_backward(dy.m, out, slope);
    Mat<T> dshort = dy.m;
    bn2.backward(P, G, dy.m);
    Act<T> dh = conv2.backward(P, G, dy);
    leaky_backward(dh.m, act1, slope);
    bn1.backward(P, G, dh.m);
    Act<T> dx = conv1.backward(P, G, dh);
    if (projection) {
      proj_bn.backward(P, G, dshort);
      Act<T> ds{std::move(dshort), dy.n, dy.h, dy.w};
      dx.m += proj.backward(P, G, ds).m;
    } else {
      dx.m += dshort;
    }
    return dx;
  }
};

template <typename T>
struct Head {
  HeadPlan plan;
  BatchNorm<T> bn;
  Mat<T> feat, act;

  Mat<T> forward(Params<T>& P, const Mat<T>& x, Mode mode, T slope, T mom, T eps) {
    Mat<T> z = cmap(P, plan.fc1, plan.width, plan.in) * x;
    bn.forward(P, z, mode, mom, eps);
    leaky_forward(z, slope);
    if (mode == Mode::Train) {
      feat = x;
      act = z;
    }
    Mat<T> y = cmap(P, plan.fc2_w, 1, plan.width) * z;
    y.array() += P[plan.fc2_b][0];
    return y;
  }

  Mat<T> backward(const Params<T>& P, Params<T>& G, const Mat<T>& dy, T slope) {
    map(G, plan.fc2_w, 1, plan.width).noalias() += dy * act.transpose();
    G[plan.fc2_b][0] += dy.sum();
    Mat<T> dz = cmap(P, plan.fc2_w, 1, plan.width).transpose() * dy;
    leaky_backward(dz, act, slope);
    bn.backward(P, G, dz);
    map(G, plan.fc1, plan.width, plan.in).noalias() += dz * feat.transpose();
    return cmap(P, plan.fc1, plan.width, plan.in).transpose() * dz;
  }
};

}  // namespace

// --- network -----------------------------------------------------------------------------

template <typename T>
struct Network<T>::Impl {
  NetworkConfig cfg;
  Plan plan;
  Params<T> params;
  Conv<T> stem;
  BatchNorm<T> stem_bn;
  Mat<T> stem_out;
  std::vector<Block<T>> blocks;
  Head<T> heads[2];
  int pool_n = 0, pool_h = 0, pool_w = 0;
  bool have_train_pass = false;

  T slope() const { return static_cast<T>(cfg.leaky_slope); }
  T mom() const { return static_cast<T>(cfg.bn_momentum); }
  T eps() const { return static_cast<T>(cfg.bn_eps); }
};

template <typename T>
Network<T>::Network(const NetworkConfig& cfg, const Weights& w) : impl_(std::make_unique<Impl>()) {
  validate_weights(w, cfg);
  Impl& m = *impl_;
  m.cfg = cfg;
  m.plan = make_plan(cfg);
  m.params.reserve(w.tensors.size());
  for (const auto& t : w.tensors) m.params.emplace_back(t.values.begin(), t.values.end());
  m.stem.plan = m.plan.stem;
  m.stem_bn.plan = m.plan.stem_bn;
  for (const auto& bp : m.plan.blocks) {
    Block<T> b;
    b.conv1.plan = bp.conv1;
    b.bn1.plan = bp.bn1;
    b.conv2.plan = bp.conv2;
    b.bn2.plan = bp.bn2;
    b.projection = bp.projection;
    if (bp.projection) {
      b.proj.plan = bp.proj;
      b.proj_bn.plan = bp.proj_bn;
    }
    m.blocks.push_back(std::move(b));
  }
  for (int h = 0; h < 2; ++h) {
    m.heads[h].plan = m.plan.heads[h];
    m.heads[h].bn.plan = m.plan.heads[h].bn;
  }
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
std::vector<std::vector<T>>& Network<T>::params() {
  return impl_->params;
}

template <typename T>
const std::vector<std::vector<T>>& Network<T>::params() const {
  return impl_->params;
}

template <typename T>
const NetworkConfig& Network<T>::config() const {
  return impl_->cfg;
}

template <typename T>
Weights Network<T>::to_weights() const {
  Weights w;
  for (size_t i = 0; i < impl_->plan.specs.size(); ++i) {
    const auto& spec = impl_->plan.specs[i];
    const auto& p = impl_->params[i];
    w.tensors.push_back({spec.name, spec.shape, std::vector<float>(p.begin(), p.end())});
  }
  return w;
}

template <typename T>
Predictions Network<T>::forward(const Batch& batch, Mode mode) {
  Impl& m = *impl_;
  const int s = m.cfg.input_size;
  if (batch.size < 1 || batch.height != s || batch.width != s ||
      batch.data.size() != static_cast<size_t>(batch.size) * 3 * s * s) {
    throw ShapeError("batch does not match the network input size " + std::to_string(s));
  }
  const int n = batch.size;
  const size_t plane = static_cast<size_t>(s) * s;

  Act<T> x;
  x.n = n;
  x.h = x.w = s;
  x.m.resize(3, static_cast<Eigen::Index>(n * plane));
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < 3; ++c) {
      const float* src = batch.data.data() + (static_cast<size_t>(b) * 3 + c) * plane;
      T* dst = x.m.row(c).data() + b * plane;
      for (size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(src[i]);
    }
  }

  Act<T> a = m.stem.forward(m.params, x);
  m.stem_bn.forward(m.params, a.m, mode, m.mom(), m.eps());
  leaky_forward(a.m, m.slope());
  if (mode == Mode::Train) m.stem_out = a.m;
  for (auto& blk : m.blocks) a = blk.forward(m.params, a, mode, m.slope(), m.mom(), m.eps());

  // Global average pool to a (channels x samples) feature matrix.
  const int hw = a.h * a.w;
  Mat<T> feat(a.m.rows(), n);
  for (Eigen::Index c = 0; c < a.m.rows(); ++c) {
    for (int b = 0; b < n; ++b) feat(c, b) = a.m.row(c).segment(static_cast<Eigen::Index>(b) * hw, hw).mean();
  }
  m.pool_n = n;
  m.pool_h = a.h;
  m.pool_w = a.w;

  Predictions out;
  const Mat<T> y1 = m.heads[0].forward(m.params, feat, mode, m.slope(), m.mom(), m.eps());
  const Mat<T> y2 = m.heads[1].forward(m.params, feat, mode, m.slope(), m.mom(), m.eps());
  out.k1.resize(static_cast<size_t>(n));
  out.k2.resize(static_cast<size_t>(n));
  for (int b = 0; b < n; ++b) {
    out.k1[static_cast<size_t>(b)] = static_cast<double>(y1(0, b));
    out.k2[static_cast<size_t>(b)] = static_cast<double>(y2(0, b));
  }
  m.have_train_pass = mode == Mode::Train;
  return out;
}

template <typename T>
std::vector<std::vector<T>> Network<T>::backward(std::span<const double> dk1, std::span<const double> dk2) {
  Impl& m = *impl_;
  if (!m.have_train_pass) throw std::logic_error("backward() requires a preceding train-mode forward()");
  const int n = m.pool_n;
  if (dk1.size() != static_cast<size_t>(n) || dk2.size() != static_cast<size_t>(n)) {
    throw ShapeError("output gradient length does not match the batch");
  }
  Params<T> G(m.params.size());
  for (size_t i = 0; i < G.size(); ++i) G[i].assign(m.params[i].size(), T(0));

  Mat<T> d1(1, n), d2(1, n);
  for (int b = 0; b < n; ++b) {
    d1(0, b) = static_cast<T>(dk1[static_cast<size_t>(b)]);
    d2(0, b) = static_cast<T>(dk2[static_cast<size_t>(b)]);
  }
  Mat<T> dfeat = m.heads[0].backward(m.params, G, d1, m.slope());
  dfeat += m.heads[1].backward(m.params, G, d2, m.slope());

  const int hw = m.pool_h * m.pool_w;
  Act<T> da;
  da.n = n;
  da.h = m.pool_h;
  da.w = m.pool_w;
  da.m.resize(dfeat.rows(), static_cast<Eigen::Index>(n) * hw);
  for (Eigen::Index c = 0; c < dfeat.rows(); ++c) {
    for (int b = 0; b < n; ++b) {
      da.m.row(c).segment(static_cast<Eigen::Index>(b) * hw, hw).setConstant(dfeat(c, b) / static_cast<T>(hw));
    }
  }
  for (auto it = m.blocks.rbegin(); it != m.blocks.rend(); ++it) {
    da = it->backward(m.params, G, std::move(da), m.slope());
  }
  leaky_backward(da.m, m.stem_out, m.slope());
  m.stem_bn.backward(m.params, G, da.m);
  m.stem.backward(m.params, G, da);
  return G;
}

template class Network<float>;
template class Network<double>;

// --- free functions --------------------------------------------------------------------------

Predictions forward(const Weights& w, const NetworkConfig& cfg, const Batch& batch, Mode mode) {
  Network<float> net(cfg, w);
  return net.forward(batch, mode);
}

template <typename T>
double batch_loss(Network<T>& net, const Batch& batch, std::span<const CoefficientPair> labels,
                  const RadiusGrid& grid, std::type_identity_t<std::vector<std::vector<T>>>* grads) {
  if (labels.size() != static_cast<size_t>(batch.size)) {
    throw ShapeError("label count does not match batch size");
  }
  const Predictions pred = net.forward(batch, Mode::Train);
  const size_t n = labels.size();
  double loss = 0.0;
  std::vector<double> dk1(n), dk2(n);
  for (size_t b = 0; b < n; ++b) {
    const CoefficientPair yhat{pred.k1[b], pred.k2[b]};
    loss += split_loss(labels[b], yhat, grid).total;
    const CoefficientPair g = loss_gradient(labels[b], yhat, grid);
    dk1[b] = g.k1 / static_cast<double>(n);
    dk2[b] = g.k2 / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss over a batch of " << n << " (first prediction k1=" << pred.k1[0]
        << ", k2=" << pred.k2[0] << ")";
    throw NumericError(msg.str());
  }
  if (grads) *grads = net.backward(dk1, dk2);
  return loss;
}

template double batch_loss<float>(Network<float>&, const Batch&, std::span<const CoefficientPair>,
                                  const RadiusGrid&, std::vector<std::vector<float>>*);
template double batch_loss<double>(Network<double>&, const Batch&, std::span<const CoefficientPair>,
                                   const RadiusGrid&, std::vector<std::vector<double>>*);

LossAndGrad loss_and_grad(const Weights& w, const NetworkConfig& cfg, const Batch& batch,
                          std::span<const CoefficientPair> labels, const RadiusGrid& grid) {
  Network<float> net(cfg, w);
  std::vector<std::vector<float>> g;
  LossAndGrad out;
  out.loss = batch_loss(net, batch, labels, grid, &g);
  out.predictions = net.forward(batch, Mode::Eval);
  out.grad = net.to_weights();
  for (size_t i = 0; i < g.size(); ++i) out.grad.tensors[i].values = std::move(g[i]);
  return out;
}

CoefficientPair predict(const Weights& w, const NetworkConfig& cfg, const Image& image) {
  const Batch b = make_batch(std::span<const Image>(&image, 1), cfg.input_size);
  const Predictions p = forward(w, cfg, b, Mode::Eval);
  return {p.k1[0], p.k2[0]};
}

}  // namespace rdist
