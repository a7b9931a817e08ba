#pragma once

// Raw video ingestion: Y4M (luma only, mono or 4:2:0 family) and binary PGM.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 8-bit grayscale frame.
struct Frame {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> px;

  uint8_t at(int64_t y, int64_t x) const { return px[y * w + x]; }
  uint8_t& at(int64_t y, int64_t x) { return px[y * w + x]; }
};

struct FrameSequence {
  int64_t w = 0, h = 0;
  std::vector<Frame> frames;
  std::string source;
};

inline Tensor<float> frame_to_unit(const Frame& f) {
  Tensor<float> t(Shape{f.h, f.w});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = f.px[i] / 255.f;
  return t;
}

/// round-half-up quantization to 8 bits with clamping
inline Frame unit_to_frame(const Tensor<float>& t) {
  require(t.shape().rank() == 2, "unit_to_frame: rank-2 tensor expected");
  Frame f;
  f.h = t.shape()[0];
  f.w = t.shape()[1];
  f.px.resize(f.h * f.w);
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double v = std::floor(double(t[i]) * 255.0 + 0.5);
    f.px[i] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return f;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)
// ---------------------------------------------------------------------------

inline void save_pgm(const Frame& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_pgm: cannot open '" + path + "'");
  out << "P5\n" << f.w << " " << f.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.px.data()), f.px.size());
  if (!out) throw IoError("save_pgm: write failed for '" + path + "'");
}

inline Frame load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_pgm: cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5")
    throw IoError("load_pgm: '" + path + "' is not binary PGM (P5), got magic '" + magic + "'");
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw IoError("load_pgm: truncated header in '" + path + "'");
  };
  Frame f;
  f.w = std::stoll(next_token());
  f.h = std::stoll(next_token());
  const int64_t maxval = std::stoll(next_token());
  if (maxval != 255)
    throw IoError("load_pgm: '" + path + "' has maxval " + std::to_string(maxval) +
                  ", only 255 supported");
  if (f.w < 1 || f.h < 1) throw IoError("load_pgm: bad dimensions in '" + path + "'");
  in.get();  // single whitespace after maxval
  f.px.resize(f.h * f.w);
  in.read(reinterpret_cast<char*>(f.px.data()), f.px.size());
  if (in.gcount() != static_cast<std::streamsize>(f.px.size()))
    throw IoError("load_pgm: truncated pixel data in '" + path + "'");
  return f;
}

inline FrameSequence load_pgm_sequence(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("load_pgm_sequence: '" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  FrameSequence seq;
  seq.source = dir;
  for (const auto& p : paths) {
    Frame f = load_pgm(p);
    if (seq.frames.empty()) {
      seq.w = f.w;
      seq.h = f.h;
    } else if (f.w != seq.w || f.h != seq.h) {
      throw IoError("load_pgm_sequence: '" + p + "' has mismatched dimensions");
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Y4M (YUV4MPEG2), luma plane only
// ---------------------------------------------------------------------------

inline FrameSequence load_y4m(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_y4m: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  const std::string magic = "YUV4MPEG2";
  if (data.size() < magic.size() || data.compare(0, magic.size(), magic) != 0)
    throw IoError("load_y4m: '" + path + "' bad magic at offset 0");
  size_t pos = data.find('\n');
  if (pos == std::string::npos) throw IoError("load_y4m: unterminated stream header");
  const std::string header = data.substr(magic.size(), pos - magic.size());
  ++pos;

  FrameSequence seq;
  seq.source = path;
  int64_t chroma_div = 2;  // 4:2:0 family by default
  std::istringstream hs(header);
  std::string tag;
  while (hs >> tag) {
    switch (tag[0]) {
      case 'W': seq.w = std::stoll(tag.substr(1)); break;
      case 'H': seq.h = std::stoll(tag.substr(1)); break;
      case 'C': {
        const std::string cs = tag.substr(1);
        if (cs == "mono") chroma_div = 0;
        else if (cs.rfind("420", 0) == 0) chroma_div = 2;
        else throw IoError("load_y4m: unsupported colorspace tag 'C" + cs + "' in '" + path + "'");
        break;
      }
      case 'F': case 'I': case 'A': case 'X': break;  // rate/interlace/aspect: parsed, unused
      default: break;
    }
  }
  if (seq.w < 1 || seq.h < 1)
    throw IoError("load_y4m: missing or invalid W/H tags in '" + path + "'");

  const size_t luma = static_cast<size_t>(seq.w * seq.h);
  const size_t chroma = chroma_div ? 2 * ((seq.w / 2) * (seq.h / 2)) : 0;
  while (pos < data.size()) {
    if (data.compare(pos, 5, "FRAME") != 0)
      throw IoError("load_y4m: expected FRAME marker at offset " + std::to_string(pos));
    const size_t eol = data.find('\n', pos);
    if (eol == std::string::npos)
      throw IoError("load_y4m: unterminated FRAME header at offset " + std::to_string(pos));
    pos = eol + 1;
    if (pos + luma + chroma > data.size())
      throw IoError("load_y4m: truncated frame payload at offset " + std::to_string(pos));
    Frame f;
    f.w = seq.w;
    f.h = seq.h;
    f.px.assign(data.begin() + pos, data.begin() + pos + luma);
    seq.frames.push_back(std::move(f));
    pos += luma + chroma;  // chroma planes skipped
  }
  return seq;
}

/// --input dispatch: a .y4m file or a directory of PGM frames.
inline FrameSequence load_sequence(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) return load_pgm_sequence(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".y4m") return load_y4m(path);
  throw IoError("load_sequence: '" + path + "' is neither a directory of PGM frames nor .y4m");
}

}  // namespace fgdfpn
