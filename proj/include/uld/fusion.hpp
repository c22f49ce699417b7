#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uld/tensor.hpp"

namespace uld::fusion {

/// Dimensions of one fusion block. The conv branch and the attention branch
/// are concatenated along channels, conv first.
struct FusionConfig {
  std::size_t views = 5;
  std::size_t channels = 256;           // per view
  std::size_t heads = 2;
  std::size_t key_depth_per_head = 20;  // queries and keys
  std::size_t value_depth = 4;          // total across heads
  std::size_t conv_out = 252;

  std::size_t input_channels() const noexcept { return views * channels; }
  std::size_t output_channels() const noexcept { return conv_out + value_depth; }

  /// 5 views x 256 channels, 2 heads, 20-d keys, 4-d values, 252 conv outputs.
  static FusionConfig standard();
  /// Reduced sizes used for gradient checking: C=8, d_k=4, d_v=2, 2 heads, 6 conv outputs.
  static FusionConfig small();

  /// Throws kInvalidArgument when a dimension is zero or value_depth % heads != 0.
  void validate() const;
};

/// One pyramid sub-level of every intensity view, each (channels, H, W).
struct FeatureBlock {
  std::vector<Tensor> views;
  int level = 2;
};

struct AttentionParams {
  std::size_t heads = 0;
  std::size_t key_depth_per_head = 0;
  std::size_t value_depth = 0;
  Tensor w_q;  // (C_in, heads * key_depth_per_head)
  Tensor w_k;  // (C_in, heads * key_depth_per_head)
  Tensor w_v;  // (C_in, value_depth)
  Tensor w_o;  // (value_depth, value_depth)

  std::size_t input_channels() const { return w_q.dim(0); }
};

struct ConvParams {
  Tensor kernel;  // (C_out, C_in, 3, 3)
  Tensor bias;    // (C_out)

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t input_channels() const { return kernel.dim(1); }
};

struct FusionParams {
  AttentionParams attention;
  ConvParams conv;

  static constexpr std::array<const char*, 6> kNames = {"w_q", "w_k", "w_v", "w_o", "conv_kernel", "conv_bias"};
  /// Parameter tensors in kNames order.
  std::array<Tensor*, 6> tensors();
  std::array<const Tensor*, 6> tensors() const;
};

/// Seeded uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor.
FusionParams init_params(const FusionConfig& cfg, std::uint64_t seed);

/// Views with entries uniform in [-1, 1].
FeatureBlock random_block(const FusionConfig& cfg, std::size_t height, std::size_t width,
                          std::uint64_t seed);

/// Channel-stacks the views in order. Throws kEmptyBlock / kShapeMismatch.
Tensor concat_views(const FeatureBlock& block);

struct AttentionOutput {
  Tensor out;                  // (value_depth, H, W)
  std::vector<Tensor> weights; // one (N, N) row-stochastic matrix per head, N = H*W
};

/// Multi-head self-attention over the H*W positions, no positional encoding:
/// softmax(Q_h K_h^T / sqrt(d_k)) V_h per head, heads concatenated, then W_o.
AttentionOutput mhsa_forward(const Tensor& x, const AttentionParams& p);

/// 3x3 cross-correlation, stride 1, zero padding 1, plus bias.
Tensor conv_forward(const Tensor& x, const ConvParams& p);

/// Conv branch channels followed by attention channels.
Tensor fuse(const FeatureBlock& block, const AttentionParams& ap, const ConvParams& cp);

struct FusionGradients {
  AttentionParams attention;
  ConvParams conv;
  std::vector<Tensor> views;
};

/// Reverse-mode gradients of sum(upstream * fuse(block)) with respect to every
/// parameter and every input view.
FusionGradients fuse_backward(const FeatureBlock& block, const AttentionParams& ap,
                              const ConvParams& cp, const Tensor& upstream);

/// target <- tau * target + (1 - tau) * online, elementwise.
/// Throws kShapeMismatch / kTauOutOfRange.
void polyak_update(std::span<Tensor* const> target, std::span<const Tensor* const> online, double tau);
void polyak_update(FusionParams& target, const FusionParams& online, double tau);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares fuse_backward with central differences of sum(upstream * fuse)
/// for every parameter and input entry. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport gradient_check(const FeatureBlock& block, const FusionParams& params,
                               const Tensor& upstream, double step = 1e-5);

/// `params.bin` holds every tensor as float64 LE back to back; `params.json`
/// records {"config": {...}, "tensors": [{"name", "shape", "offset"}]} with byte offsets.
void save_params(const FusionParams& params, const std::filesystem::path& dir);
FusionParams load_params(const std::filesystem::path& dir);

}  // namespace uld::fusion
