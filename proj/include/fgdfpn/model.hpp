#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform.hpp"
#include "fgdfpn/ops.hpp"
#include "fgdfpn/sampling.hpp"
#include "fgdfpn/shuffle.hpp"
#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

struct ModelConfig {
  int64_t base_channels = 16;  // channels at the finest scale; doubles per level
  int64_t deform_groups = 2;   // per frame
  int64_t blocks = 2;          // residual bottleneck blocks per stage
  std::array<double, 3> magnitudes{40.0, 20.0, 10.0};  // finest -> coarsest
  static constexpr int64_t kFrames = 4;
  static constexpr int64_t kScales = 3;

  void validate() const {
    require(base_channels >= 2 && base_channels % 2 == 0,
            "ModelConfig: base_channels must be even and >= 2");
    require(deform_groups >= 1, "ModelConfig: deform_groups must be >= 1");
    require(blocks >= 0, "ModelConfig: blocks must be >= 0");
    require(magnitudes[0] >= magnitudes[1] && magnitudes[1] >= magnitudes[2] &&
                magnitudes[2] > 0,
            "ModelConfig: magnitudes must be positive and ordered m1 >= m2 >= m3");
  }

  int64_t channels(int64_t level) const { return base_channels << (level - 1); }

  bool operator==(const ModelConfig& o) const {
    return base_channels == o.base_channels && deform_groups == o.deform_groups &&
           blocks == o.blocks && magnitudes == o.magnitudes;
  }
};

namespace nn {

/// Fan-in scaled uniform init matching the leaky_relu default slope.
template <typename T>
Tensor<T> kaiming_uniform(Rng& rng, const Shape& s, int64_t fan_in) {
  const double slope = kDefaultLeakySlope;
  const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
  return random_uniform<T>(rng, s, -bound, bound);
}

template <typename T>
struct Conv2dLayer {
  ConvSpec spec;
  Parameter<T> w, b;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, const ConvSpec& s, Rng& rng, bool zero_init = false)
      : spec(s) {
    spec.validate();
    const int64_t fan_in = (s.in_channels / s.groups) * s.kernel_h * s.kernel_w;
    Tensor<T> wv = zero_init ? Tensor<T>(s.weight_shape())
                             : kaiming_uniform<T>(rng, s.weight_shape(), fan_in);
    w = Parameter<T>(name + ".w", std::move(wv));
    b = Parameter<T>(name + ".b", Tensor<T>(s.bias_shape()));
  }

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const {
    return conv2d(tape, x, spec, w.var, b.var);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// 1x1 reduce to half channels -> 3x3 -> 1x1 expand, additive skip.
template <typename T>
struct Bottleneck {
  Conv2dLayer<T> reduce, conv, expand;

  Bottleneck() = default;
  Bottleneck(const std::string& name, int64_t channels, Rng& rng) {
    const int64_t half = channels / 2;
    reduce = Conv2dLayer<T>(name + ".reduce", ConvSpec{channels, half, 1, 1, 1, 0, 1}, rng);
    conv = Conv2dLayer<T>(name + ".conv", ConvSpec{half, half, 3, 3, 1, 1, 1}, rng);
    expand = Conv2dLayer<T>(name + ".expand", ConvSpec{half, channels, 1, 1, 1, 0, 1}, rng);
  }

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const {
    Var<T> h = leaky_relu(tape, reduce(tape, x));
    h = leaky_relu(tape, conv(tape, h));
    return add(tape, x, expand(tape, h));
  }

  void collect(std::vector<Parameter<T>*>& out) {
    reduce.collect(out);
    conv.collect(out);
    expand.collect(out);
  }
};

template <typename T>
Var<T> run_blocks(Tape<T>& tape, const std::vector<Bottleneck<T>>& blocks, Var<T> x) {
  for (const auto& blk : blocks) x = blk(tape, x);
  return x;
}

/// pixel-shuffle upsample, then align to the skip's spatial dims when an odd
/// extent made the downsampled stage round up
template <typename T>
Var<T> upsample_to(Tape<T>& tape, const Conv2dLayer<T>& pre, const Var<T>& x, int64_t want_h,
                   int64_t want_w) {
  Var<T> u = pixel_shuffle(tape, pre(tape, x), 2);
  if (u.shape().h() != want_h || u.shape().w() != want_w)
    u = bilinear_resize(tape, u, want_h, want_w);
  return u;
}

}  // namespace nn

/// Per-frame feature maps, warped counterparts, and the per-level flow.
template <typename T>
struct ScalePyramid {
  std::array<Var<T>, 3> f;
  std::array<Var<T>, 3> w;
  std::array<Var<T>, 3> flow;
};

/// Refined deformable parameters for one (scale, frame).
template <typename T>
struct DeformParams {
  Var<T> offsets;  // (N, G*18, H_l, W_l)
  Var<T> mask;     // (N, G*9, H_l, W_l)
};

/// Encoder (3 stride-2 convs), bottleneck blocks, decoder (3 pixel-shuffle
/// upsamplings with skip concatenation), zero-initialized 8-channel head
/// split into four flow fields.
template <typename T>
struct FlowEstimator {
  nn::Conv2dLayer<T> enc1, enc2, enc3;
  std::vector<nn::Bottleneck<T>> blocks;
  nn::Conv2dLayer<T> up3, fuse3, up2, fuse2, up1, fuse1, head;

  FlowEstimator() = default;
  FlowEstimator(const ModelConfig& cfg, Rng& rng) {
    const int64_t C = cfg.base_channels;
    enc1 = nn::Conv2dLayer<T>("flow.enc1", ConvSpec{4, C, 3, 3, 2, 1, 1}, rng);
    enc2 = nn::Conv2dLayer<T>("flow.enc2", ConvSpec{C, 2 * C, 3, 3, 2, 1, 1}, rng);
    enc3 = nn::Conv2dLayer<T>("flow.enc3", ConvSpec{2 * C, 4 * C, 3, 3, 2, 1, 1}, rng);
    for (int64_t i = 0; i < cfg.blocks; ++i)
      blocks.emplace_back("flow.block" + std::to_string(i), 4 * C, rng);
    up3 = nn::Conv2dLayer<T>("flow.up3", ConvSpec{4 * C, 8 * C, 1, 1, 1, 0, 1}, rng);
    fuse3 = nn::Conv2dLayer<T>("flow.fuse3", ConvSpec{4 * C, 2 * C, 3, 3, 1, 1, 1}, rng);
    up2 = nn::Conv2dLayer<T>("flow.up2", ConvSpec{2 * C, 4 * C, 1, 1, 1, 0, 1}, rng);
    fuse2 = nn::Conv2dLayer<T>("flow.fuse2", ConvSpec{2 * C, C, 3, 3, 1, 1, 1}, rng);
    up1 = nn::Conv2dLayer<T>("flow.up1", ConvSpec{C, 4 * C, 1, 1, 1, 0, 1}, rng);
    fuse1 = nn::Conv2dLayer<T>("flow.fuse1", ConvSpec{C + 4, C, 1, 1, 1, 0, 1}, rng);
    head = nn::Conv2dLayer<T>("flow.head", ConvSpec{C, 8, 3, 3, 1, 1, 1}, rng, true);
  }

  std::array<Var<T>, 4> operator()(Tape<T>& tape, const Var<T>& frames) const {
    Var<T> e1 = leaky_relu(tape, enc1(tape, frames));
    Var<T> e2 = leaky_relu(tape, enc2(tape, e1));
    Var<T> e3 = leaky_relu(tape, enc3(tape, e2));
    Var<T> h = nn::run_blocks(tape, blocks, e3);
    Var<T> u = nn::upsample_to(tape, up3, h, e2.shape().h(), e2.shape().w());
    h = leaky_relu(tape, fuse3(tape, concat_channels(tape, {u, e2})));
    u = nn::upsample_to(tape, up2, h, e1.shape().h(), e1.shape().w());
    h = leaky_relu(tape, fuse2(tape, concat_channels(tape, {u, e1})));
    u = nn::upsample_to(tape, up1, h, frames.shape().h(), frames.shape().w());
    h = leaky_relu(tape, fuse1(tape, concat_channels(tape, {u, frames})));
    Var<T> raw = head(tape, h);
    auto parts = split_channels(tape, raw, {2, 2, 2, 2});
    return {parts[0], parts[1], parts[2], parts[3]};
  }

  void collect(std::vector<Parameter<T>*>& out) {
    enc1.collect(out);
    enc2.collect(out);
    enc3.collect(out);
    for (auto& blk : blocks) blk.collect(out);
    up3.collect(out);
    fuse3.collect(out);
    up2.collect(out);
    fuse2.collect(out);
    up1.collect(out);
    fuse1.collect(out);
    head.collect(out);
  }
};

/// Full-resolution conv stack, then two strided stages with bottleneck
/// blocks. Weights are shared across the four frames by construction.
template <typename T>
struct FeatureExtractor {
  nn::Conv2dLayer<T> conv0, conv1, down1, down2;
  std::vector<nn::Bottleneck<T>> blocks2, blocks3;

  FeatureExtractor() = default;
  FeatureExtractor(const ModelConfig& cfg, Rng& rng) {
    const int64_t C = cfg.base_channels;
    conv0 = nn::Conv2dLayer<T>("extract.conv0", ConvSpec{1, C, 3, 3, 1, 1, 1}, rng);
    conv1 = nn::Conv2dLayer<T>("extract.conv1", ConvSpec{C, C, 3, 3, 1, 1, 1}, rng);
    down1 = nn::Conv2dLayer<T>("extract.down1", ConvSpec{C, 2 * C, 3, 3, 2, 1, 1}, rng);
    down2 = nn::Conv2dLayer<T>("extract.down2", ConvSpec{2 * C, 4 * C, 3, 3, 2, 1, 1}, rng);
    for (int64_t i = 0; i < cfg.blocks; ++i) {
      blocks2.emplace_back("extract.b2." + std::to_string(i), 2 * C, rng);
      blocks3.emplace_back("extract.b3." + std::to_string(i), 4 * C, rng);
    }
  }

  std::array<Var<T>, 3> operator()(Tape<T>& tape, const Var<T>& frame) const {
    Var<T> f1 = leaky_relu(tape, conv1(tape, leaky_relu(tape, conv0(tape, frame))));
    Var<T> f2 = nn::run_blocks(tape, blocks2, leaky_relu(tape, down1(tape, f1)));
    Var<T> f3 = nn::run_blocks(tape, blocks3, leaky_relu(tape, down2(tape, f2)));
    return {f1, f2, f3};
  }

  void collect(std::vector<Parameter<T>*>& out) {
    conv0.collect(out);
    conv1.collect(out);
    down1.collect(out);
    down2.collect(out);
    for (auto& blk : blocks2) blk.collect(out);
    for (auto& blk : blocks3) blk.collect(out);
  }
};

/// Resamples a full-resolution flow to a pyramid level and rescales the
/// displacements so units remain pixels at the target resolution.
template <typename T>
Var<T> adapt_flow(Tape<T>& tape, const Var<T>& flow, int64_t level, int64_t out_h,
                  int64_t out_w) {
  require(level >= 1 && level <= 3, "adapt_flow: level must be in {1,2,3}");
  Var<T> resized = bilinear_resize(tape, flow, out_h, out_w);
  if (level == 1) return resized;
  return mul_scalar(tape, resized, static_cast<T>(std::ldexp(1.0, 1 - int(level))));
}

/// Per-scale offset/mask predictor: concat of the four frames' original and
/// warped features, a strided encoder with bottleneck blocks, pixel-shuffle
/// decoder, and a zero-initialized head emitting all four frames' raw
/// offsets and masks.
template <typename T>
struct OffsetMaskScale {
  int64_t level = 1;
  nn::Conv2dLayer<T> reduce, down, up, fuse, head;
  std::vector<nn::Bottleneck<T>> blocks;

  OffsetMaskScale() = default;
  OffsetMaskScale(const ModelConfig& cfg, int64_t l, Rng& rng) : level(l) {
    const int64_t Cl = cfg.channels(l);
    const std::string p = "omp" + std::to_string(l);
    reduce = nn::Conv2dLayer<T>(p + ".reduce", ConvSpec{8 * Cl, Cl, 1, 1, 1, 0, 1}, rng);
    down = nn::Conv2dLayer<T>(p + ".down", ConvSpec{Cl, 2 * Cl, 3, 3, 2, 1, 1}, rng);
    for (int64_t i = 0; i < cfg.blocks; ++i)
      blocks.emplace_back(p + ".block" + std::to_string(i), 2 * Cl, rng);
    up = nn::Conv2dLayer<T>(p + ".up", ConvSpec{2 * Cl, 4 * Cl, 1, 1, 1, 0, 1}, rng);
    fuse = nn::Conv2dLayer<T>(p + ".fuse", ConvSpec{2 * Cl, Cl, 1, 1, 1, 0, 1}, rng);
    const int64_t out_ch = ModelConfig::kFrames * cfg.deform_groups * 27;
    head = nn::Conv2dLayer<T>(p + ".head", ConvSpec{Cl, out_ch, 1, 1, 1, 0, 1}, rng, true);
  }

  /// Returns the raw per-frame tensors, each (N, G*27, H_l, W_l).
  std::array<Var<T>, 4> operator()(Tape<T>& tape,
                                   const std::array<ScalePyramid<T>, 4>& pyr) const {
    std::vector<Var<T>> maps;
    maps.reserve(8);
    for (const auto& p : pyr) maps.push_back(p.f[level - 1]);
    for (const auto& p : pyr) maps.push_back(p.w[level - 1]);
    Var<T> r = leaky_relu(tape, reduce(tape, concat_channels(tape, maps)));
    Var<T> h = leaky_relu(tape, down(tape, r));
    h = nn::run_blocks(tape, blocks, h);
    Var<T> u = nn::upsample_to(tape, up, h, r.shape().h(), r.shape().w());
    h = leaky_relu(tape, fuse(tape, concat_channels(tape, {u, r})));
    Var<T> raw = head(tape, h);
    const int64_t per_frame = raw.shape().c() / ModelConfig::kFrames;
    auto parts = split_channels(tape, raw, {per_frame, per_frame, per_frame, per_frame});
    return {parts[0], parts[1], parts[2], parts[3]};
  }

  void collect(std::vector<Parameter<T>*>& out) {
    reduce.collect(out);
    down.collect(out);
    for (auto& blk : blocks) blk.collect(out);
    up.collect(out);
    fuse.collect(out);
    head.collect(out);
  }
};

/// offset = m_l * tanh(offset_raw) + flow tiled over every tap;
/// mask = sigmoid(mask_raw).
template <typename T>
DeformParams<T> refine_offsets(Tape<T>& tape, const Var<T>& raw, const Var<T>& flow_l,
                               T magnitude, int64_t groups) {
  const int64_t g18 = groups * 18, g9 = groups * 9;
  if (raw.shape().c() != g18 + g9)
    throw std::invalid_argument("refine_offsets: raw has " + std::to_string(raw.shape().c()) +
                                " channels, expected " + std::to_string(g18 + g9));
  auto parts = split_channels(tape, raw, {g18, g9});
  Var<T> bounded = mul_scalar(tape, fgdfpn::tanh(tape, parts[0]), magnitude);
  Var<T> offsets = add(tape, bounded, tile_flow_offsets(tape, flow_l, groups));
  return {offsets, sigmoid(tape, parts[1])};
}

/// Concatenates the four frames' features, offsets and masks and fuses them
/// with one grouped deformable convolution into C_l output channels.
template <typename T>
struct FuseScale {
  ConvSpec spec;
  int64_t deform_groups = 0;
  Parameter<T> w, b;

  FuseScale() = default;
  FuseScale(const ModelConfig& cfg, int64_t l, Rng& rng) {
    const int64_t Cl = cfg.channels(l);
    spec = ConvSpec{4 * Cl, Cl, 3, 3, 1, 1, 1};
    deform_groups = 4 * cfg.deform_groups;
    const int64_t fan_in = spec.in_channels * 9;
    w = Parameter<T>("fuse" + std::to_string(l) + ".w",
                     nn::kaiming_uniform<T>(rng, spec.weight_shape(), fan_in));
    b = Parameter<T>("fuse" + std::to_string(l) + ".b", Tensor<T>(spec.bias_shape()));
  }

  Var<T> operator()(Tape<T>& tape, const std::array<Var<T>, 4>& feats,
                    const std::array<DeformParams<T>, 4>& params) const {
    std::vector<Var<T>> fs(feats.begin(), feats.end());
    std::vector<Var<T>> offs, masks;
    for (const auto& p : params) {
      offs.push_back(p.offsets);
      masks.push_back(p.mask);
    }
    return deform_conv2d(tape, concat_channels(tape, fs), concat_channels(tape, offs),
                         concat_channels(tape, masks), spec, deform_groups, w.var, b.var);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// Coarse-to-fine synthesis: bottleneck blocks and subpixel upsampling,
/// concatenating the fused features of the next finer scale at each step.
template <typename T>
struct Reconstructor {
  std::vector<nn::Bottleneck<T>> blocks3, blocks2, blocks1;
  nn::Conv2dLayer<T> up3, fuse2, up2, fuse1, head;

  Reconstructor() = default;
  Reconstructor(const ModelConfig& cfg, Rng& rng) {
    const int64_t C = cfg.base_channels;
    for (int64_t i = 0; i < cfg.blocks; ++i) {
      blocks3.emplace_back("recon.b3." + std::to_string(i), 4 * C, rng);
      blocks2.emplace_back("recon.b2." + std::to_string(i), 2 * C, rng);
      blocks1.emplace_back("recon.b1." + std::to_string(i), C, rng);
    }
    up3 = nn::Conv2dLayer<T>("recon.up3", ConvSpec{4 * C, 8 * C, 1, 1, 1, 0, 1}, rng);
    fuse2 = nn::Conv2dLayer<T>("recon.fuse2", ConvSpec{4 * C, 2 * C, 1, 1, 1, 0, 1}, rng);
    up2 = nn::Conv2dLayer<T>("recon.up2", ConvSpec{2 * C, 4 * C, 1, 1, 1, 0, 1}, rng);
    fuse1 = nn::Conv2dLayer<T>("recon.fuse1", ConvSpec{2 * C, C, 1, 1, 1, 0, 1}, rng);
    head = nn::Conv2dLayer<T>("recon.head", ConvSpec{C, 1, 3, 3, 1, 1, 1}, rng);
  }

  Var<T> operator()(Tape<T>& tape, const Var<T>& f1, const Var<T>& f2, const Var<T>& f3) const {
    Var<T> h = nn::run_blocks(tape, blocks3, f3);
    Var<T> u = pixel_shuffle(tape, up3(tape, h), 2);
    h = leaky_relu(tape, fuse2(tape, concat_channels(tape, {u, f2})));
    h = nn::run_blocks(tape, blocks2, h);
    u = pixel_shuffle(tape, up2(tape, h), 2);
    h = leaky_relu(tape, fuse1(tape, concat_channels(tape, {u, f1})));
    h = nn::run_blocks(tape, blocks1, h);
    return head(tape, h);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto& blk : blocks3) blk.collect(out);
    up3.collect(out);
    fuse2.collect(out);
    for (auto& blk : blocks2) blk.collect(out);
    up2.collect(out);
    fuse1.collect(out);
    for (auto& blk : blocks1) blk.collect(out);
    head.collect(out);
  }
};

/// Intermediates exposed for tests and diagnostics.
template <typename T>
struct ForwardTrace {
  std::array<Var<T>, 4> flows;
  std::array<std::array<ScalePyramid<T>, 4>, 1> pyramids_holder;  // [0][frame]
  std::array<std::array<Var<T>, 4>, 3> raw;                       // [scale-1][frame]
  std::array<std::array<DeformParams<T>, 4>, 3> refined;          // [scale-1][frame]
  std::array<Var<T>, 3> fused;

  std::array<ScalePyramid<T>, 4>& pyramids() { return pyramids_holder[0]; }
};

template <typename T>
class FGDFPN {
 public:
  FGDFPN() = default;
  FGDFPN(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    flow_ = FlowEstimator<T>(cfg_, rng);
    extract_ = FeatureExtractor<T>(cfg_, rng);
    for (int64_t l = 1; l <= 3; ++l) {
      omp_[l - 1] = OffsetMaskScale<T>(cfg_, l, rng);
      fuse_[l - 1] = FuseScale<T>(cfg_, l, rng);
    }
    recon_ = Reconstructor<T>(cfg_, rng);
  }

  const ModelConfig& config() const { return cfg_; }

  static void check_input(const Shape& s) {
    require(s.rank() == 4 && s.c() == ModelConfig::kFrames,
            "FGDFPN: input must be (N,4,H,W), got " + s.str());
    require(s.h() % 4 == 0 && s.w() % 4 == 0,
            "FGDFPN: spatial dims must be divisible by 4, got " + s.str());
  }

  std::array<ScalePyramid<T>, 4> build_pyramids(Tape<T>& tape, const Var<T>& frames,
                                                const std::array<Var<T>, 4>& flows) const {
    auto singles = split_channels(tape, frames, {1, 1, 1, 1});
    std::array<ScalePyramid<T>, 4> out;
    for (int64_t i = 0; i < 4; ++i) {
      auto feats = extract_(tape, singles[i]);
      for (int64_t l = 1; l <= 3; ++l) {
        out[i].f[l - 1] = feats[l - 1];
        out[i].flow[l - 1] = adapt_flow(tape, flows[i], l, feats[l - 1].shape().h(),
                                        feats[l - 1].shape().w());
        out[i].w[l - 1] = flow_warp(tape, feats[l - 1], out[i].flow[l - 1]);
      }
    }
    return out;
  }

  Var<T> forward(Tape<T>& tape, const Var<T>& frames, ForwardTrace<T>* trace = nullptr) const {
    check_input(frames.shape());
    auto flows = flow_(tape, frames);
    auto pyramids = build_pyramids(tape, frames, flows);
    std::array<Var<T>, 3> fused;
    std::array<std::array<Var<T>, 4>, 3> raws;
    std::array<std::array<DeformParams<T>, 4>, 3> refined;
    for (int64_t l = 1; l <= 3; ++l) {
      raws[l - 1] = omp_[l - 1](tape, pyramids);
      std::array<Var<T>, 4> feats;
      for (int64_t i = 0; i < 4; ++i) {
        feats[i] = pyramids[i].f[l - 1];
        refined[l - 1][i] =
            refine_offsets(tape, raws[l - 1][i], pyramids[i].flow[l - 1],
                           static_cast<T>(cfg_.magnitudes[l - 1]), cfg_.deform_groups);
      }
      fused[l - 1] = fuse_[l - 1](tape, feats, refined[l - 1]);
    }
    Var<T> out = recon_(tape, fused[0], fused[1], fused[2]);
    if (trace) {
      trace->flows = flows;
      trace->pyramids() = pyramids;
      trace->raw = raws;
      trace->refined = refined;
      trace->fused = fused;
    }
    return out;
  }

  /// Inference: no tape, output clamped to [0,1].
  Tensor<T> predict(const Tensor<T>& frames) const {
    Tape<T> tape(false);
    Var<T> out = forward(tape, tape.leaf(frames));
    return clamp01(out.value());
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    flow_.collect(out);
    extract_.collect(out);
    for (auto& o : omp_) o.collect(out);
    for (auto& f : fuse_) f.collect(out);
    recon_.collect(out);
    return out;
  }

  void zero_grads() {
    for (auto* p : parameters()) p->zero_grad();
  }

  const FlowEstimator<T>& flow_estimator() const { return flow_; }
  const FeatureExtractor<T>& feature_extractor() const { return extract_; }
  const OffsetMaskScale<T>& offset_mask(int64_t l) const { return omp_[l - 1]; }
  const FuseScale<T>& fuse_layer(int64_t l) const { return fuse_[l - 1]; }
  const Reconstructor<T>& reconstructor() const { return recon_; }

 private:
  ModelConfig cfg_;
  FlowEstimator<T> flow_;
  FeatureExtractor<T> extract_;
  std::array<OffsetMaskScale<T>, 3> omp_;
  std::array<FuseScale<T>, 3> fuse_;
  Reconstructor<T> recon_;
};

}  // namespace fgdfpn
