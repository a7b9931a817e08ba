#pragma once

// Named-tensor container: magic "FGDF", u32 version, u32 record count; per
// record a length-prefixed UTF-8 name, u8 dtype code (1=fp32, 2=fp64,
// 3=bytes), u8 rank, u32 extents and raw little-endian payload.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fgdfpn/model.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

inline constexpr char kCheckpointMagic[4] = {'F', 'G', 'D', 'F'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class CheckpointWriter {
 public:
  void add(const std::string& name, const Tensor<float>& t) { add_tensor(name, 1, t); }
  void add(const std::string& name, const Tensor<double>& t) { add_tensor(name, 2, t); }

  void add_bytes(const std::string& name, const std::string& payload) {
    Record r;
    r.name = name;
    r.dtype = 3;
    r.dims = {static_cast<uint32_t>(payload.size())};
    r.payload.assign(payload.begin(), payload.end());
    records_.push_back(std::move(r));
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
    out.write(kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(records_.size()));
    for (const auto& r : records_) {
      put_u32(out, static_cast<uint32_t>(r.name.size()));
      out.write(r.name.data(), r.name.size());
      out.put(static_cast<char>(r.dtype));
      out.put(static_cast<char>(r.dims.size()));
      for (uint32_t d : r.dims) put_u32(out, d);
      out.write(r.payload.data(), r.payload.size());
    }
    if (!out) throw CheckpointError("checkpoint: write failed for '" + path + "'");
  }

 private:
  struct Record {
    std::string name;
    uint8_t dtype = 0;
    std::vector<uint32_t> dims;
    std::vector<char> payload;
  };

  template <typename T>
  void add_tensor(const std::string& name, uint8_t dtype, const Tensor<T>& t) {
    Record r;
    r.name = name;
    r.dtype = dtype;
    const Shape& s = t.shape();
    for (int i = 0; i < s.rank(); ++i) r.dims.push_back(static_cast<uint32_t>(s[i]));
    if (s.rank() == 0) r.dims.push_back(1);
    r.payload.resize(t.numel() * sizeof(T));
    std::memcpy(r.payload.data(), t.data(), r.payload.size());
    records_.push_back(std::move(r));
  }

  static void put_u32(std::ofstream& out, uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    out.write(b, 4);
  }

  std::vector<Record> records_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    data_ = buf.str();
    parse(path);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.name);
    return out;
  }

  template <typename T>
  Tensor<T> tensor(const std::string& name) const {
    const Record& r = get(name);
    if (r.dtype == 3)
      throw CheckpointError("checkpoint: record '" + name + "' holds bytes, not a tensor");
    Shape s = shape_of(r);
    Tensor<T> out(s);
    if (r.dtype == 1) {
      const float* src = reinterpret_cast<const float*>(data_.data() + r.offset);
      for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(src[i]);
    } else {
      const double* src = reinterpret_cast<const double*>(data_.data() + r.offset);
      for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(src[i]);
    }
    return out;
  }

  /// dtype code as stored (1=fp32, 2=fp64, 3=bytes)
  int dtype(const std::string& name) const { return get(name).dtype; }

  Shape shape(const std::string& name) const { return shape_of(get(name)); }

  std::string bytes(const std::string& name) const {
    const Record& r = get(name);
    if (r.dtype != 3)
      throw CheckpointError("checkpoint: record '" + name + "' is not a byte record");
    return data_.substr(r.offset, r.dims[0]);
  }

 private:
  struct Record {
    std::string name;
    uint8_t dtype = 0;
    std::vector<uint32_t> dims;
    size_t offset = 0;
  };

  static Shape shape_of(const Record& r) {
    Shape s;
    std::initializer_list<int64_t> dummy;
    (void)dummy;
    std::vector<int64_t> dims(r.dims.begin(), r.dims.end());
    switch (dims.size()) {
      case 1:
        return Shape{dims[0]};
      case 2:
        return Shape{dims[0], dims[1]};
      case 3:
        return Shape{dims[0], dims[1], dims[2]};
      case 4:
        return Shape{dims[0], dims[1], dims[2], dims[3]};
      default:
        throw CheckpointError("checkpoint: unsupported rank " + std::to_string(dims.size()));
    }
  }

  const Record& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw CheckpointError("checkpoint: missing record '" + name + "'");
    return records_[it->second];
  }

  uint32_t take_u32(size_t& pos, const char* what) {
    if (pos + 4 > data_.size())
      throw CheckpointError(std::string("checkpoint: truncated while reading ") + what +
                            " at offset " + std::to_string(pos));
    uint32_t v = 0;
    std::memcpy(&v, data_.data() + pos, 4);
    pos += 4;
    return v;
  }

  void parse(const std::string& path) {
    size_t pos = 0;
    if (data_.size() < 4 || std::memcmp(data_.data(), kCheckpointMagic, 4) != 0)
      throw CheckpointError("checkpoint: '" + path + "' has bad magic at offset 0");
    pos = 4;
    const uint32_t version = take_u32(pos, "version");
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = take_u32(pos, "record count");
    records_.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      Record r;
      const uint32_t name_len = take_u32(pos, "name length");
      if (pos + name_len > data_.size())
        throw CheckpointError("checkpoint: truncated name at offset " + std::to_string(pos));
      r.name.assign(data_, pos, name_len);
      pos += name_len;
      if (pos + 2 > data_.size())
        throw CheckpointError("checkpoint: truncated header of '" + r.name + "'");
      r.dtype = static_cast<uint8_t>(data_[pos++]);
      const uint8_t rank = static_cast<uint8_t>(data_[pos++]);
      if (r.dtype < 1 || r.dtype > 3)
        throw CheckpointError("checkpoint: record '" + r.name + "' has unknown dtype code " +
                              std::to_string(int(r.dtype)));
      if (rank < 1 || rank > 4)
        throw CheckpointError("checkpoint: record '" + r.name + "' has unsupported rank " +
                              std::to_string(int(rank)));
      size_t numel = 1;
      for (int d = 0; d < rank; ++d) {
        r.dims.push_back(take_u32(pos, "extent"));
        numel *= r.dims.back();
      }
      const size_t elt = r.dtype == 1 ? 4 : (r.dtype == 2 ? 8 : 1);
      r.offset = pos;
      if (pos + numel * elt > data_.size())
        throw CheckpointError("checkpoint: truncated payload of '" + r.name + "'");
      pos += numel * elt;
      index_[r.name] = records_.size();
      records_.push_back(std::move(r));
    }
  }

  std::string data_;
  std::vector<Record> records_;
  std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

inline std::string serialize_config(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "base_channels = " << cfg.base_channels << "\n";
  os << "deform_groups = " << cfg.deform_groups << "\n";
  os << "blocks = " << cfg.blocks << "\n";
  os << "magnitude1 = " << cfg.magnitudes[0] << "\n";
  os << "magnitude2 = " << cfg.magnitudes[1] << "\n";
  os << "magnitude3 = " << cfg.magnitudes[2] << "\n";
  return os.str();
}

inline ModelConfig parse_config_blob(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "base_channels") cfg.base_channels = std::stoll(value);
    else if (key == "deform_groups") cfg.deform_groups = std::stoll(value);
    else if (key == "blocks") cfg.blocks = std::stoll(value);
    else if (key == "magnitude1") cfg.magnitudes[0] = std::stod(value);
    else if (key == "magnitude2") cfg.magnitudes[1] = std::stod(value);
    else if (key == "magnitude3") cfg.magnitudes[2] = std::stod(value);
    else throw CheckpointError("checkpoint: unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

template <typename T>
void add_model(CheckpointWriter& w, FGDFPN<T>& model) {
  w.add_bytes("meta/config", serialize_config(model.config()));
  for (Parameter<T>* p : model.parameters()) w.add(p->name, p->value());
}

template <typename T>
void checkpoint_save(FGDFPN<T>& model, const std::string& path) {
  CheckpointWriter w;
  add_model(w, model);
  w.write(path);
}

/// Loads every expected parameter by name, validating shapes before any
/// assignment so a failed load leaves no partial model.
template <typename T>
void load_model(FGDFPN<T>& model, const CheckpointReader& r) {
  std::vector<std::pair<Parameter<T>*, Tensor<T>>> staged;
  for (Parameter<T>* p : model.parameters()) {
    if (!r.has(p->name))
      throw CheckpointError("checkpoint: missing tensor '" + p->name + "'");
    Tensor<T> t = r.template tensor<T>(p->name);
    if (t.shape() != p->value().shape())
      throw CheckpointError("checkpoint: tensor '" + p->name + "' has shape " +
                            t.shape().str() + ", model expects " + p->value().shape().str());
    staged.emplace_back(p, std::move(t));
  }
  for (auto& [p, t] : staged) p->value() = std::move(t);
}

template <typename T>
FGDFPN<T> checkpoint_load(const std::string& path) {
  CheckpointReader r(path);
  if (!r.has("meta/config"))
    throw CheckpointError("checkpoint: missing record 'meta/config'");
  ModelConfig cfg = parse_config_blob(r.bytes("meta/config"));
  FGDFPN<T> model(cfg, /*seed=*/0);
  load_model(model, r);
  return model;
}

}  // namespace fgdfpn
