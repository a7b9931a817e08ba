#pragma once

// Clip storage and batching: clips live on disk as directories of five PGM
// frames plus a manifest recording the true motion, so synthetic data and
// real footage go through the same loader.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fgdfpn/synth.hpp"
#include "fgdfpn/tensor.hpp"
#include "fgdfpn/video_io.hpp"

namespace fgdfpn {

struct ClipDataset {
  std::vector<Clip> clips;

  int64_t height() const { return clips.empty() ? 0 : clips[0].height(); }
  int64_t width() const { return clips.empty() ? 0 : clips[0].width(); }
};

inline std::string clip_dir_name(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05d", static_cast<int>(index));
  return buf;
}

/// Writes clips as PGM frame directories plus manifest.csv with the true
/// per-clip motion descriptors.
inline void save_dataset(const ClipDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("save_dataset: cannot write manifest in '" + dir + "'");
  manifest << "clip,kind,vx,vy,rotate,scale\n";
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    const Clip& c = ds.clips[i];
    const fs::path cdir = fs::path(dir) / clip_dir_name(static_cast<int64_t>(i));
    fs::create_directories(cdir);
    for (size_t t = 0; t < c.frames.size(); ++t)
      save_pgm(unit_to_frame(c.frames[t]), (cdir / ("frame_" + std::to_string(t) + ".pgm")).string());
    manifest << clip_dir_name(static_cast<int64_t>(i)) << ','
             << (c.motion.kind == MotionSpec::kTranslate ? "translate" : "affine") << ','
             << c.motion.vx << ',' << c.motion.vy << ',' << c.motion.rotate << ','
             << c.motion.scale << "\n";
  }
}

inline Clip load_clip_dir(const std::string& dir) {
  FrameSequence seq = load_pgm_sequence(dir);
  if (seq.frames.size() != 5)
    throw IoError("load_clip_dir: '" + dir + "' holds " + std::to_string(seq.frames.size()) +
                  " frames, a clip needs exactly 5");
  Clip c;
  for (const Frame& f : seq.frames) c.frames.push_back(frame_to_unit(f));
  return c;
}

/// Loads every clip_* subdirectory (sorted) and the manifest when present.
inline ClipDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("load_dataset: '" + dir + "' is not a directory");
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  ClipDataset ds;
  for (const auto& d : subdirs) ds.clips.push_back(load_clip_dir(d));
  if (ds.clips.empty()) throw IoError("load_dataset: no clip directories under '" + dir + "'");

  const fs::path manifest = fs::path(dir) / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);  // header
    size_t i = 0;
    while (std::getline(in, line) && i < ds.clips.size()) {
      std::istringstream row(line);
      std::string clip, kind, field;
      std::getline(row, clip, ',');
      std::getline(row, kind, ',');
      MotionSpec& m = ds.clips[i].motion;
      m.kind = kind == "affine" ? MotionSpec::kAffine : MotionSpec::kTranslate;
      std::getline(row, field, ',');
      m.vx = std::stod(field);
      std::getline(row, field, ',');
      m.vy = std::stod(field);
      std::getline(row, field, ',');
      m.rotate = std::stod(field);
      std::getline(row, field, ',');
      m.scale = std::stod(field);
      ++i;
    }
  }
  return ds;
}

/// One random crop position per clip, shared by all five frames; frames 1-4
/// stack into the input channels and frame 5 is the target.
inline std::pair<Tensor<float>, Tensor<float>> random_crop_batch(const ClipDataset& ds,
                                                                 int64_t batch, int64_t crop,
                                                                 Rng& rng) {
  require(!ds.clips.empty(), "random_crop_batch: empty dataset");
  const int64_t H = ds.height(), W = ds.width();
  if (H < crop || W < crop)
    throw std::invalid_argument("random_crop_batch: clip " + std::to_string(W) + "x" +
                                std::to_string(H) + " smaller than crop " +
                                std::to_string(crop));
  Tensor<float> input(Shape{batch, 4, crop, crop});
  Tensor<float> target(Shape{batch, 1, crop, crop});
  for (int64_t b = 0; b < batch; ++b) {
    const Clip& clip = ds.clips[rng.below(ds.clips.size())];
    const int64_t y0 = static_cast<int64_t>(rng.below(H - crop + 1));
    const int64_t x0 = static_cast<int64_t>(rng.below(W - crop + 1));
    for (int64_t t = 0; t < 4; ++t)
      for (int64_t y = 0; y < crop; ++y)
        std::copy(clip.frames[t].data() + (y0 + y) * W + x0,
                  clip.frames[t].data() + (y0 + y) * W + x0 + crop,
                  input.plane(b, t) + y * crop);
    for (int64_t y = 0; y < crop; ++y)
      std::copy(clip.frames[4].data() + (y0 + y) * W + x0,
                clip.frames[4].data() + (y0 + y) * W + x0 + crop,
                target.plane(b, 0) + y * crop);
  }
  return {std::move(input), std::move(target)};
}

/// Stacks a clip's first four frames into a model input (1,4,H,W).
inline Tensor<float> clip_input(const Clip& c) {
  const int64_t H = c.height(), W = c.width();
  Tensor<float> in(Shape{1, 4, H, W});
  for (int64_t t = 0; t < 4; ++t)
    std::copy(c.frames[t].data(), c.frames[t].data() + H * W, in.plane(0, t));
  return in;
}

}  // namespace fgdfpn
