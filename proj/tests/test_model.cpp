#include <gtest/gtest.h>

#include "fgdfpn/checkpoint.hpp"
#include "fgdfpn/model.hpp"

using namespace fgdfpn;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.deform_groups = 2;
  cfg.blocks = 1;
  return cfg;
}

Tensor<float> random_frames(Rng& rng, int64_t n, int64_t h, int64_t w) {
  return random_uniform<float>(rng, {n, 4, h, w}, 0.0, 1.0);
}

}  // namespace

TEST(FlowEstimator, ShapesAndZeroInit) {
  FGDFPN<float> model(small_cfg(), 1);
  Rng rng(2);
  Tape<float> tape(false);
  Var<float> frames = tape.leaf(random_frames(rng, 1, 32, 32));
  auto flows = model.flow_estimator()(tape, frames);
  for (const auto& f : flows) {
    ASSERT_EQ(f.shape(), (Shape{1, 2, 32, 32}));
    for (int64_t i = 0; i < f.value().numel(); ++i) ASSERT_EQ(f.value()[i], 0.f);
  }
}

TEST(FeatureExtractor, PyramidShapesAndSharing) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 1);
  Rng rng(3);
  Tape<float> tape(false);
  Tensor<float> frame = random_uniform<float>(rng, {1, 1, 32, 32}, 0, 1);
  auto a = model.feature_extractor()(tape, tape.leaf(frame));
  auto b = model.feature_extractor()(tape, tape.leaf(frame));
  ASSERT_EQ(a[0].shape(), (Shape{1, cfg.base_channels, 32, 32}));
  ASSERT_EQ(a[1].shape(), (Shape{1, 2 * cfg.base_channels, 16, 16}));
  ASSERT_EQ(a[2].shape(), (Shape{1, 4 * cfg.base_channels, 8, 8}));
  // two identical frames give bit-identical pyramids (shared weights)
  for (int l = 0; l < 3; ++l)
    for (int64_t i = 0; i < a[l].value().numel(); ++i)
      ASSERT_EQ(a[l].value()[i], b[l].value()[i]);
}

TEST(AdaptFlow, ScalesDisplacementsPerLevel) {
  Tape<float> t(false);
  Tensor<float> flow(Shape{1, 2, 8, 8});
  for (int64_t i = 0; i < 64; ++i) flow.plane(0, 0)[i] = 4.f;  // dx = 4, dy = 0
  Var<float> v = t.leaf(flow);

  Tensor<float> l1 = adapt_flow(t, v, 1, 8, 8).value();
  for (int64_t i = 0; i < l1.numel(); ++i) ASSERT_EQ(l1[i], flow[i]);  // identity

  Tensor<float> l3 = adapt_flow(t, v, 3, 2, 2).value();
  for (int64_t i = 0; i < 4; ++i) {
    EXPECT_FLOAT_EQ(l3.plane(0, 0)[i], 1.f);
    EXPECT_FLOAT_EQ(l3.plane(0, 1)[i], 0.f);
  }

  Var<float> zero = t.leaf(Tensor<float>(Shape{1, 2, 8, 8}));
  for (int l = 1; l <= 3; ++l) {
    Tensor<float> z = adapt_flow(t, zero, l, 8 >> (l - 1), 8 >> (l - 1)).value();
    for (int64_t i = 0; i < z.numel(); ++i) ASSERT_EQ(z[i], 0.f);
  }
}

TEST(BuildPyramids, ZeroFlowWarpEqualsFeatures) {
  FGDFPN<float> model(small_cfg(), 5);
  Rng rng(6);
  Tape<float> tape(false);
  Var<float> frames = tape.leaf(random_frames(rng, 1, 16, 16));
  std::array<Var<float>, 4> flows;
  for (auto& f : flows) f = tape.leaf(Tensor<float>(Shape{1, 2, 16, 16}));
  auto pyr = model.build_pyramids(tape, frames, flows);
  for (const auto& p : pyr)
    for (int l = 0; l < 3; ++l) {
      ASSERT_EQ(p.f[l].shape(), p.w[l].shape());
      for (int64_t i = 0; i < p.f[l].value().numel(); ++i)
        ASSERT_EQ(p.w[l].value()[i], p.f[l].value()[i]);
    }
}

TEST(OffsetMask, ZeroInitializedRawOutputs) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 7);
  Rng rng(8);
  Tape<float> tape(false);
  ForwardTrace<float> trace;
  model.forward(tape, tape.leaf(random_frames(rng, 1, 16, 16)), &trace);
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 4; ++i) {
      const Tensor<float>& raw = trace.raw[l][i].value();
      ASSERT_EQ(raw.shape().c(), cfg.deform_groups * 27);
      for (int64_t j = 0; j < raw.numel(); ++j) ASSERT_EQ(raw[j], 0.f);
      // refined offsets equal the adapted flow at every tap, masks are 0.5
      const Tensor<float>& off = trace.refined[l][i].offsets.value();
      const Tensor<float>& mask = trace.refined[l][i].mask.value();
      const Tensor<float>& flow = trace.pyramids()[i].flow[l].value();
      for (int64_t g = 0; g < cfg.deform_groups; ++g)
        for (int64_t k = 0; k < 9; ++k)
          for (int64_t px = 0; px < off.shape().h() * off.shape().w(); ++px) {
            ASSERT_EQ(off.plane(0, (g * 9 + k) * 2 + 0)[px], flow.plane(0, 1)[px]);
            ASSERT_EQ(off.plane(0, (g * 9 + k) * 2 + 1)[px], flow.plane(0, 0)[px]);
          }
      for (int64_t j = 0; j < mask.numel(); ++j) ASSERT_EQ(mask[j], 0.5f);
    }
}

TEST(RefineOffsets, FlowPassThroughAndBound) {
  Rng rng(9);
  Tape<float> tape(false);
  const int64_t G = 2, H = 6, W = 6;
  // +-10 keeps sigmoid away from fp32 saturation so the (0,1) bound is strict
  Tensor<float> raw = random_uniform<float>(rng, {1, G * 27, H, W}, -10, 10);
  Tensor<float> flow = random_uniform<float>(rng, {1, 2, H, W}, -5, 5);
  const float m = 20.f;
  DeformParams<float> p = refine_offsets(tape, tape.leaf(raw), tape.leaf(flow), m, G);
  const Tensor<float>& off = p.offsets.value();
  for (int64_t g = 0; g < G; ++g)
    for (int64_t k = 0; k < 9; ++k)
      for (int64_t px = 0; px < H * W; ++px) {
        const float dy = off.plane(0, (g * 9 + k) * 2 + 0)[px];
        const float dx = off.plane(0, (g * 9 + k) * 2 + 1)[px];
        ASSERT_LE(std::abs(dy - flow.plane(0, 1)[px]), m);
        ASSERT_LE(std::abs(dx - flow.plane(0, 0)[px]), m);
      }
  for (int64_t i = 0; i < p.mask.value().numel(); ++i) {
    ASSERT_GT(p.mask.value()[i], 0.f);
    ASSERT_LT(p.mask.value()[i], 1.f);
  }

  // raw = 0 passes the flow through at every tap and yields masks of 0.5
  DeformParams<float> q = refine_offsets(tape, tape.leaf(Tensor<float>(Shape{1, G * 27, H, W})),
                                         tape.leaf(flow), m, G);
  for (int64_t g = 0; g < G; ++g)
    for (int64_t k = 0; k < 9; ++k)
      for (int64_t px = 0; px < H * W; ++px) {
        ASSERT_EQ(q.offsets.value().plane(0, (g * 9 + k) * 2 + 0)[px], flow.plane(0, 1)[px]);
        ASSERT_EQ(q.offsets.value().plane(0, (g * 9 + k) * 2 + 1)[px], flow.plane(0, 0)[px]);
      }
  for (int64_t i = 0; i < q.mask.value().numel(); ++i) ASSERT_EQ(q.mask.value()[i], 0.5f);
}

TEST(FuseScale, MatchesDirectDeformCallAndRigidOracle) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 11);
  Rng rng(12);
  Tape<float> tape(false);
  ForwardTrace<float> trace;
  Var<float> out = model.forward(tape, tape.leaf(random_frames(rng, 1, 16, 16)), &trace);
  (void)out;

  // oracle: call the kernel directly with the traced inputs
  for (int64_t l = 1; l <= 3; ++l) {
    const auto& fl = model.fuse_layer(l);
    std::vector<Var<float>> feats, offs, masks;
    for (int i = 0; i < 4; ++i) {
      feats.push_back(trace.pyramids()[i].f[l - 1]);
      offs.push_back(trace.refined[l - 1][i].offsets);
      masks.push_back(trace.refined[l - 1][i].mask);
    }
    Tensor<float> want = deform_conv2d_forward(
        concat_channels(tape, feats).value(), concat_channels(tape, offs).value(),
        concat_channels(tape, masks).value(), fl.spec, fl.deform_groups, fl.w.value(),
        fl.b.value());
    const Tensor<float>& got = trace.fused[l - 1].value();
    ASSERT_EQ(got.shape().c(), cfg.channels(l));
    ASSERT_EQ(got.shape(), want.shape());
    for (int64_t i = 0; i < got.numel(); ++i) ASSERT_EQ(got[i], want[i]);
  }

  // rigid oracle: at init flows are zero and raw outputs are zero, so fusion
  // equals plain convolution of the concatenated features scaled by the 0.5
  // masks (plus bias)
  for (int64_t l = 1; l <= 3; ++l) {
    const auto& fl = model.fuse_layer(l);
    std::vector<Var<float>> feats;
    for (int i = 0; i < 4; ++i) feats.push_back(trace.pyramids()[i].f[l - 1]);
    Tensor<float> x = concat_channels(tape, feats).value();
    Tensor<float> zero_bias(fl.spec.bias_shape());
    Tensor<float> conv = conv2d_forward(x, fl.spec, fl.w.value(), zero_bias);
    const Tensor<float>& got = trace.fused[l - 1].value();
    for (int64_t co = 0; co < got.shape().c(); ++co) {
      const float* gp = got.plane(0, co);
      const float* cp = conv.plane(0, co);
      for (int64_t i = 0; i < got.shape().h() * got.shape().w(); ++i)
        ASSERT_NEAR(gp[i], 0.5f * cp[i] + fl.b.value()[co], 2e-5);
    }
  }
}

TEST(Reconstructor, ShapeAndZeroPropagation) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 13);
  Tape<float> tape(false);
  const int64_t H = 16, W = 16;
  Var<float> f1 = tape.leaf(Tensor<float>(Shape{1, cfg.channels(1), H, W}));
  Var<float> f2 = tape.leaf(Tensor<float>(Shape{1, cfg.channels(2), H / 2, W / 2}));
  Var<float> f3 = tape.leaf(Tensor<float>(Shape{1, cfg.channels(3), H / 4, W / 4}));
  Tensor<float> y = model.reconstructor()(tape, f1, f2, f3).value();
  ASSERT_EQ(y.shape(), (Shape{1, 1, H, W}));
  // biases start at zero, so zero features propagate to a zero frame
  for (int64_t i = 0; i < y.numel(); ++i) ASSERT_EQ(y[i], 0.f);
}

TEST(FGDFPN, ForwardShapeDeterminismAndInit) {
  ModelConfig cfg = small_cfg();
  Rng rng(14);
  Tensor<float> frames = random_frames(rng, 1, 16, 16);

  FGDFPN<float> a(cfg, 21);
  Tensor<float> p1 = a.predict(frames);
  Tensor<float> p2 = a.predict(frames);
  ASSERT_EQ(p1.shape(), (Shape{1, 1, 16, 16}));
  for (int64_t i = 0; i < p1.numel(); ++i) {
    ASSERT_EQ(p1[i], p2[i]);  // bit-identical
    ASSERT_GE(p1[i], 0.f);    // clamped at inference
    ASSERT_LE(p1[i], 1.f);
  }
  ASSERT_TRUE(p1.all_finite());

  // different seeds give different outputs
  FGDFPN<float> b(cfg, 22);
  Tensor<float> pb = b.predict(frames);
  bool any_diff = false;
  for (int64_t i = 0; i < p1.numel(); ++i) any_diff = any_diff || pb[i] != p1[i];
  EXPECT_TRUE(any_diff);

  // dims not divisible by 4 are rejected
  Tape<float> t(false);
  EXPECT_THROW(a.forward(t, t.leaf(Tensor<float>(Shape{1, 4, 18, 16}))),
               std::invalid_argument);
}

TEST(FGDFPN, HandlesDivisibleByFourButNotEight) {
  // 20/4 = 5 is odd, which makes the flow estimator's innermost stage and
  // the offset predictors round up; the upsample-align path covers it.
  FGDFPN<float> model(small_cfg(), 31);
  Rng rng(32);
  Tensor<float> frames = random_frames(rng, 1, 20, 20);
  Tensor<float> y = model.predict(frames);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 20, 20}));
  ASSERT_TRUE(y.all_finite());
}

TEST(Checkpoint, RoundTripBitExactForward) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 41);
  Rng rng(42);
  Tensor<float> frames = random_frames(rng, 1, 16, 16);
  Tensor<float> before = model.predict(frames);

  const std::string path = testing::TempDir() + "/ckpt_roundtrip.fgdf";
  checkpoint_save(model, path);
  FGDFPN<float> loaded = checkpoint_load<float>(path);
  EXPECT_TRUE(loaded.config() == cfg);
  Tensor<float> after = loaded.predict(frames);
  for (int64_t i = 0; i < before.numel(); ++i) ASSERT_EQ(before[i], after[i]);
}

TEST(Checkpoint, TruncatedFileIsStructuredError) {
  ModelConfig cfg = small_cfg();
  FGDFPN<float> model(cfg, 43);
  const std::string path = testing::TempDir() + "/ckpt_trunc.fgdf";
  checkpoint_save(model, path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string data = buf.str();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), data.size() / 2);
  out.close();
  EXPECT_THROW(checkpoint_load<float>(path), CheckpointError);
}

TEST(Checkpoint, BadMagicAndShapeMismatchNameTheProblem) {
  const std::string bad = testing::TempDir() + "/ckpt_bad.fgdf";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "XUV4 nonsense";
  }
  try {
    checkpoint_load<float>(bad);
    FAIL() << "expected bad magic error";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }

  // checkpoint written with one width, loaded into a wider model
  ModelConfig small = small_cfg();
  FGDFPN<float> m8(small, 44);
  const std::string path = testing::TempDir() + "/ckpt_c8.fgdf";
  checkpoint_save(m8, path);
  ModelConfig big = small;
  big.base_channels = 16;
  FGDFPN<float> m16(big, 45);
  try {
    CheckpointReader r(path);
    load_model(m16, r);
    FAIL() << "expected shape mismatch";
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("shape"), std::string::npos) << msg;
    EXPECT_NE(msg.find("flow.enc1.w"), std::string::npos) << msg;
  }
}

TEST(ModelConfig, InvariantsValidated) {
  ModelConfig bad = small_cfg();
  bad.magnitudes = {10.0, 20.0, 40.0};  // must be ordered finest >= coarsest
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  ModelConfig odd = small_cfg();
  odd.base_channels = 7;
  EXPECT_THROW(odd.validate(), std::invalid_argument);
}
