#include "uld/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <json.hpp>

#include "uld/errors.hpp"
#include "uld/io.hpp"
#include "uld/rng.hpp"

namespace uld::fusion {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;

ConstMapMat as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMapMat(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Tensor from_matrix(const RowMat& m, std::vector<std::size_t> shape) {
  return Tensor(std::move(shape), std::vector<double>(m.data(), m.data() + m.size()));
}

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

void check_input(const Tensor& x, std::size_t channels, const char* what) {
  if (x.rank() != 3 || x.dim(0) != channels || x.dim(1) == 0 || x.dim(2) == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " expects (" + std::to_string(channels) + ", H, W), got " +
                    shape_string(x.shape()));
  }
}

void check_attention(const AttentionParams& p) {
  const auto c = p.w_q.rank() == 2 ? p.w_q.dim(0) : 0;
  const auto qk = p.heads * p.key_depth_per_head;
  const bool ok = p.heads > 0 && p.key_depth_per_head > 0 && p.value_depth > 0 &&
                  p.value_depth % p.heads == 0 && c > 0 &&
                  p.w_q.shape() == std::vector<std::size_t>{c, qk} &&
                  p.w_k.shape() == std::vector<std::size_t>{c, qk} &&
                  p.w_v.shape() == std::vector<std::size_t>{c, p.value_depth} &&
                  p.w_o.shape() == std::vector<std::size_t>{p.value_depth, p.value_depth};
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, "inconsistent attention parameter shapes");
}

void check_conv(const ConvParams& p) {
  const bool ok = p.kernel.rank() == 4 && p.kernel.dim(2) == kKernel && p.kernel.dim(3) == kKernel &&
                  p.bias.shape() == std::vector<std::size_t>{p.kernel.dim(0)};
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, "conv kernel must be (C_out, C_in, 3, 3) with C_out biases");
}

// Forward intermediates kept for the backward pass. Position-major (N x d).
struct AttentionCache {
  RowMat x;  // (C_in, N)
  RowMat q, k, v;
  RowMat concat;  // per-head outputs side by side, (N, value_depth)
  std::vector<RowMat> weights;
  RowMat y;  // (N, value_depth)
};

AttentionCache attention_forward(const Tensor& x, const AttentionParams& p) {
  check_attention(p);
  check_input(x, p.input_channels(), "mhsa_forward");
  const auto c = x.dim(0);
  const auto n = x.dim(1) * x.dim(2);
  const auto dk = static_cast<Eigen::Index>(p.key_depth_per_head);
  const auto dvh = static_cast<Eigen::Index>(p.value_depth / p.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.key_depth_per_head));

  AttentionCache cache;
  cache.x = as_matrix(x, c, n);
  cache.q = cache.x.transpose() * as_matrix(p.w_q, c, p.w_q.dim(1));
  cache.k = cache.x.transpose() * as_matrix(p.w_k, c, p.w_k.dim(1));
  cache.v = cache.x.transpose() * as_matrix(p.w_v, c, p.value_depth);
  cache.concat.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p.value_depth));
  for (std::size_t h = 0; h < p.heads; ++h) {
    const auto hi = static_cast<Eigen::Index>(h);
    RowMat s = cache.q.middleCols(hi * dk, dk) * cache.k.middleCols(hi * dk, dk).transpose() * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double m = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - m).exp();
      s.row(r) /= s.row(r).sum();
    }
    cache.concat.middleCols(hi * dvh, dvh) = s * cache.v.middleCols(hi * dvh, dvh);
    cache.weights.push_back(std::move(s));
  }
  cache.y = cache.concat * as_matrix(p.w_o, p.value_depth, p.value_depth);
  return cache;
}

// (C*9, N) patch matrix for a 3x3 kernel with zero padding 1.
RowMat im2col(const Tensor& x) {
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(c * kTaps), static_cast<Eigen::Index>(h * w));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const auto row = static_cast<Eigen::Index>(ch * kTaps + ky * kKernel + kx);
        for (std::size_t y = 0; y < h; ++y) {
          const long long sy = static_cast<long long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long long>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long long sx = static_cast<long long>(xx + kx) - 1;
            if (sx < 0 || sx >= static_cast<long long>(w)) continue;
            cols(row, static_cast<Eigen::Index>(y * w + xx)) =
                x.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters patch gradients back onto the (C, H, W) grid.
Tensor col2im(const RowMat& cols, std::size_t c, std::size_t h, std::size_t w) {
  Tensor x({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const auto row = static_cast<Eigen::Index>(ch * kTaps + ky * kKernel + kx);
        for (std::size_t y = 0; y < h; ++y) {
          const long long sy = static_cast<long long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long long>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long long sx = static_cast<long long>(xx + kx) - 1;
            if (sx < 0 || sx >= static_cast<long long>(w)) continue;
            x.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) +=
                cols(row, static_cast<Eigen::Index>(y * w + xx));
          }
        }
      }
    }
  }
  return x;
}

void check_block_against(const FeatureBlock& block, const AttentionParams& ap, const ConvParams& cp) {
  check_attention(ap);
  check_conv(cp);
  if (ap.input_channels() != cp.input_channels()) {
    throw Error(ErrorCode::kDimensionMismatch, "attention and conv branches disagree on input channels");
  }
  (void)block;
}

Tensor upstream_slice(const Tensor& upstream, std::size_t first, std::size_t count) {
  const auto plane = upstream.dim(1) * upstream.dim(2);
  const auto begin = upstream.data().begin() + static_cast<std::ptrdiff_t>(first * plane);
  return Tensor({count, upstream.dim(1), upstream.dim(2)},
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * plane)));
}

}  // namespace

FusionConfig FusionConfig::standard() { return {}; }

FusionConfig FusionConfig::small() { return {5, 8, 2, 4, 2, 6}; }

void FusionConfig::validate() const {
  if (views == 0 || channels == 0 || heads == 0 || key_depth_per_head == 0 || value_depth == 0 ||
      conv_out == 0) {
    throw Error(ErrorCode::kInvalidArgument, "fusion dimensions must be positive");
  }
  if (value_depth % heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "value depth must be divisible by the number of heads");
  }
}

std::array<Tensor*, 6> FusionParams::tensors() {
  return {&attention.w_q, &attention.w_k, &attention.w_v, &attention.w_o, &conv.kernel, &conv.bias};
}

std::array<const Tensor*, 6> FusionParams::tensors() const {
  return {&attention.w_q, &attention.w_k, &attention.w_v, &attention.w_o, &conv.kernel, &conv.bias};
}

FusionParams init_params(const FusionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto c_in = cfg.input_channels();
  const auto qk = cfg.heads * cfg.key_depth_per_head;
  FusionParams p;
  p.attention.heads = cfg.heads;
  p.attention.key_depth_per_head = cfg.key_depth_per_head;
  p.attention.value_depth = cfg.value_depth;
  p.attention.w_q = Tensor({c_in, qk});
  p.attention.w_k = Tensor({c_in, qk});
  p.attention.w_v = Tensor({c_in, cfg.value_depth});
  p.attention.w_o = Tensor({cfg.value_depth, cfg.value_depth});
  p.conv.kernel = Tensor({cfg.conv_out, c_in, kKernel, kKernel});
  p.conv.bias = Tensor({cfg.conv_out});

  Rng rng(seed);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(c_in));
  fill_uniform(p.attention.w_q, in_bound, rng);
  fill_uniform(p.attention.w_k, in_bound, rng);
  fill_uniform(p.attention.w_v, in_bound, rng);
  fill_uniform(p.attention.w_o, 1.0 / std::sqrt(static_cast<double>(cfg.value_depth)), rng);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(c_in * kTaps));
  fill_uniform(p.conv.kernel, conv_bound, rng);
  fill_uniform(p.conv.bias, conv_bound, rng);
  return p;
}

FeatureBlock random_block(const FusionConfig& cfg, std::size_t height, std::size_t width,
                          std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  FeatureBlock block;
  for (std::size_t v = 0; v < cfg.views; ++v) {
    Tensor t({cfg.channels, height, width});
    fill_uniform(t, 1.0, rng);
    block.views.push_back(std::move(t));
  }
  return block;
}

Tensor concat_views(const FeatureBlock& block) {
  if (block.views.empty()) throw Error(ErrorCode::kEmptyBlock, "feature block has no views");
  const auto& first = block.views.front().shape();
  if (first.size() != 3) throw Error(ErrorCode::kShapeMismatch, "views must be (C, H, W)");
  for (const auto& v : block.views) {
    if (v.shape() != first) {
      throw Error(ErrorCode::kShapeMismatch, "view shape " + shape_string(v.shape()) + " differs from " +
                                                 shape_string(first));
    }
  }
  std::vector<double> data;
  data.reserve(block.views.size() * block.views.front().size());
  for (const auto& v : block.views) data.insert(data.end(), v.data().begin(), v.data().end());
  return Tensor({first[0] * block.views.size(), first[1], first[2]}, std::move(data));
}

AttentionOutput mhsa_forward(const Tensor& x, const AttentionParams& p) {
  auto cache = attention_forward(x, p);
  AttentionOutput out;
  out.out = from_matrix(cache.y.transpose(), {p.value_depth, x.dim(1), x.dim(2)});
  const auto n = x.dim(1) * x.dim(2);
  for (const auto& w : cache.weights) out.weights.push_back(from_matrix(w, {n, n}));
  return out;
}

Tensor conv_forward(const Tensor& x, const ConvParams& p) {
  check_conv(p);
  check_input(x, p.input_channels(), "conv_forward");
  const auto c_out = p.out_channels();
  const auto n = x.dim(1) * x.dim(2);
  RowMat out = as_matrix(p.kernel, c_out, p.input_channels() * kTaps) * im2col(x);
  out.colwise() += Eigen::Map<const Eigen::VectorXd>(p.bias.data().data(), static_cast<Eigen::Index>(c_out));
  (void)n;
  return from_matrix(out, {c_out, x.dim(1), x.dim(2)});
}

Tensor fuse(const FeatureBlock& block, const AttentionParams& ap, const ConvParams& cp) {
  check_block_against(block, ap, cp);
  const auto x = concat_views(block);
  const auto conv = conv_forward(x, cp);
  const auto attn = mhsa_forward(x, ap).out;
  std::vector<double> data(conv.data().begin(), conv.data().end());
  data.insert(data.end(), attn.data().begin(), attn.data().end());
  return Tensor({cp.out_channels() + ap.value_depth, x.dim(1), x.dim(2)}, std::move(data));
}

FusionGradients fuse_backward(const FeatureBlock& block, const AttentionParams& ap,
                              const ConvParams& cp, const Tensor& upstream) {
  check_block_against(block, ap, cp);
  const auto x = concat_views(block);
  const auto c_in = x.dim(0), h = x.dim(1), w = x.dim(2), n = h * w;
  const auto c_out = cp.out_channels();
  if (upstream.shape() != std::vector<std::size_t>{c_out + ap.value_depth, h, w}) {
    throw Error(ErrorCode::kDimensionMismatch, "upstream gradient shape " + shape_string(upstream.shape()) +
                                                   " does not match fuse output");
  }

  FusionGradients g;

  // Convolution branch.
  const RowMat cols = im2col(x);
  const auto d_conv_t = upstream_slice(upstream, 0, c_out);
  const auto d_conv = as_matrix(d_conv_t, c_out, n);
  const RowMat d_kernel = d_conv * cols.transpose();
  const Eigen::VectorXd d_bias = d_conv.rowwise().sum();
  g.conv.kernel = from_matrix(d_kernel, cp.kernel.shape());
  g.conv.bias = Tensor({c_out}, std::vector<double>(d_bias.data(), d_bias.data() + d_bias.size()));
  const RowMat d_cols = as_matrix(cp.kernel, c_out, c_in * kTaps).transpose() * d_conv;
  Tensor dx = col2im(d_cols, c_in, h, w);

  // Attention branch.
  const auto cache = attention_forward(x, ap);
  const auto d_attn_t = upstream_slice(upstream, c_out, ap.value_depth);
  const RowMat d_y = as_matrix(d_attn_t, ap.value_depth, n).transpose();
  const auto w_o = as_matrix(ap.w_o, ap.value_depth, ap.value_depth);
  const RowMat d_w_o = cache.concat.transpose() * d_y;
  const RowMat d_concat = d_y * w_o.transpose();

  const auto dk = static_cast<Eigen::Index>(ap.key_depth_per_head);
  const auto dvh = static_cast<Eigen::Index>(ap.value_depth / ap.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ap.key_depth_per_head));
  RowMat d_q = RowMat::Zero(cache.q.rows(), cache.q.cols());
  RowMat d_k = RowMat::Zero(cache.k.rows(), cache.k.cols());
  RowMat d_v = RowMat::Zero(cache.v.rows(), cache.v.cols());
  for (std::size_t head = 0; head < ap.heads; ++head) {
    const auto hi = static_cast<Eigen::Index>(head);
    const auto& a = cache.weights[head];
    const auto d_out_h = d_concat.middleCols(hi * dvh, dvh);
    d_v.middleCols(hi * dvh, dvh) = a.transpose() * d_out_h;
    const RowMat d_a = d_out_h * cache.v.middleCols(hi * dvh, dvh).transpose();
    // Softmax Jacobian-vector product per row: A * (dA - <dA, A>).
    const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
    const RowMat d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix() * scale;
    d_q.middleCols(hi * dk, dk) = d_s * cache.k.middleCols(hi * dk, dk);
    d_k.middleCols(hi * dk, dk) = d_s.transpose() * cache.q.middleCols(hi * dk, dk);
  }

  const auto qk = ap.w_q.dim(1);
  const auto w_q = as_matrix(ap.w_q, c_in, qk);
  const auto w_k = as_matrix(ap.w_k, c_in, qk);
  const auto w_v = as_matrix(ap.w_v, c_in, ap.value_depth);
  g.attention.heads = ap.heads;
  g.attention.key_depth_per_head = ap.key_depth_per_head;
  g.attention.value_depth = ap.value_depth;
  g.attention.w_q = from_matrix(cache.x * d_q, ap.w_q.shape());
  g.attention.w_k = from_matrix(cache.x * d_k, ap.w_k.shape());
  g.attention.w_v = from_matrix(cache.x * d_v, ap.w_v.shape());
  g.attention.w_o = from_matrix(d_w_o, ap.w_o.shape());

  const RowMat d_x_attn = w_q * d_q.transpose() + w_k * d_k.transpose() + w_v * d_v.transpose();
  as_matrix(dx, c_in, n) += d_x_attn;

  // Split the stacked input gradient back into views.
  const auto per_view = block.views.front().size();
  for (std::size_t v = 0; v < block.views.size(); ++v) {
    const auto begin = dx.data().begin() + static_cast<std::ptrdiff_t>(v * per_view);
    g.views.emplace_back(block.views[v].shape(),
                         std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(per_view)));
  }
  return g;
}

void polyak_update(std::span<Tensor* const> target, std::span<const Tensor* const> online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorCode::kTauOutOfRange, "tau must lie in [0, 1]");
  if (target.size() != online.size()) throw Error(ErrorCode::kShapeMismatch, "parameter lists differ in length");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i]->shape() != online[i]->shape()) {
      throw Error(ErrorCode::kShapeMismatch, "parameter " + std::to_string(i) + " shapes differ");
    }
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto t = target[i]->data();
    const auto o = online[i]->data();
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = tau * t[j] + (1.0 - tau) * o[j];
  }
}

void polyak_update(FusionParams& target, const FusionParams& online, double tau) {
  const auto t = target.tensors();
  const auto o = online.tensors();
  polyak_update(std::span<Tensor* const>(t), std::span<const Tensor* const>(o), tau);
}

GradCheckReport gradient_check(const FeatureBlock& block, const FusionParams& params,
                               const Tensor& upstream, double step) {
  const auto grads = fuse_backward(block, params.attention, params.conv, upstream);
  FeatureBlock probe_block = block;
  FusionParams probe = params;

  auto loss = [&]() {
    const auto out = fuse(probe_block, probe.attention, probe.conv);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * upstream[i];
    return s;
  };

  GradCheckReport report;
  auto check = [&](Tensor& value, const Tensor& analytic) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      const double plus = loss();
      value[i] = saved - step;
      const double minus = loss();
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(analytic[i] - numeric) / denom);
      ++report.entries_checked;
    }
  };

  const auto params_t = probe.tensors();
  const std::array<const Tensor*, 6> grads_t = {&grads.attention.w_q, &grads.attention.w_k, &grads.attention.w_v,
                                                &grads.attention.w_o, &grads.conv.kernel, &grads.conv.bias};
  for (std::size_t k = 0; k < params_t.size(); ++k) check(*params_t[k], *grads_t[k]);
  for (std::size_t v = 0; v < probe_block.views.size(); ++v) check(probe_block.views[v], grads.views[v]);
  return report;
}

void save_params(const FusionParams& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["dtype"] = "float64";
  manifest["byte_order"] = "little";
  manifest["config"] = {{"heads", params.attention.heads},
                        {"key_depth_per_head", params.attention.key_depth_per_head},
                        {"value_depth", params.attention.value_depth}};
  auto entries = nlohmann::ordered_json::array();
  std::string blob;
  const auto tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    entries.push_back({{"name", FusionParams::kNames[i]}, {"shape", tensors[i]->shape()}, {"offset", blob.size()}});
    blob += io::encode_f64_le(tensors[i]->data());
  }
  manifest["tensors"] = entries;
  io::write_file(dir / "params.bin", blob);
  io::write_file(dir / "params.json", manifest.dump(2) + "\n");
}

FusionParams load_params(const std::filesystem::path& dir) {
  const auto blob = io::read_file(dir / "params.bin");
  FusionParams params;
  try {
    const auto manifest = nlohmann::json::parse(io::read_file(dir / "params.json"));
    params.attention.heads = manifest.at("config").at("heads").get<std::size_t>();
    params.attention.key_depth_per_head = manifest.at("config").at("key_depth_per_head").get<std::size_t>();
    params.attention.value_depth = manifest.at("config").at("value_depth").get<std::size_t>();
    const auto tensors = params.tensors();
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto it = std::find(FusionParams::kNames.begin(), FusionParams::kNames.end(), name);
      if (it == FusionParams::kNames.end()) throw Error(ErrorCode::kIoError, "unknown tensor " + name);
      auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto bytes = shape_product(shape) * sizeof(double);
      if (offset + bytes > blob.size()) throw Error(ErrorCode::kIoError, "tensor " + name + " exceeds blob");
      *tensors[static_cast<std::size_t>(it - FusionParams::kNames.begin())] =
          Tensor(std::move(shape), io::decode_f64_le(std::string_view(blob).substr(offset, bytes)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("bad parameter manifest: ") + e.what());
  }
  check_attention(params.attention);
  check_conv(params.conv);
  return params;
}

}  // namespace uld::fusion
