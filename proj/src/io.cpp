#include "imle/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "imle/errors.hpp"

namespace imle {

namespace {

constexpr char kCheckpointMagic[6] = {'I', 'M', 'L', 'E', 'v', '1'};
constexpr char kDatasetMagic[6] = {'I', 'M', 'L', 'D', 'v', '1'};

class Writer {
 public:
  void Bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void U8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void U32(std::uint64_t v) {
    if (v > 0xffffffffULL) throw FormatError("value does not fit in u32");
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void I32(int v) { U32(static_cast<std::uint32_t>(v)); }
  void F64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void F64s(std::span<const double> vs) {
    for (double v : vs) F64(v);
  }
  void Str(const std::string& s) {
    U32(s.size());
    buf_.append(s);
  }
  std::string Take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("file truncated");
  }
  void Expect(const char* magic, std::size_t n) {
    Need(n);
    if (std::memcmp(bytes_.data() + pos_, magic, n) != 0) {
      throw FormatError("bad magic: expected " + std::string(magic, n));
    }
    pos_ += n;
  }
  std::uint8_t U8() {
    Need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  int I32() { return static_cast<int>(U32()); }
  double F64() {
    Need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return std::bit_cast<double>(bits);
  }
  std::vector<double> F64s(std::size_t n) {
    Need(n * 8);
    std::vector<double> v(n);
    for (double& x : v) x = F64();
    return v;
  }
  std::string Str() {
    const std::uint32_t n = U32();
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void ExpectEnd() const {
    if (pos_ != bytes_.size()) throw FormatError("trailing bytes after payload");
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void WriteNormalizer(Writer& w, const Normalizer& n) {
  w.U32(n.obs_min.size());
  w.F64s(n.obs_min);
  w.F64s(n.obs_max);
  w.U32(n.act_min.size());
  w.F64s(n.act_min);
  w.F64s(n.act_max);
}

Normalizer ReadNormalizer(Reader& r) {
  Normalizer n;
  const std::uint32_t obs_dim = r.U32();
  n.obs_min = r.F64s(obs_dim);
  n.obs_max = r.F64s(obs_dim);
  const std::uint32_t act_dim = r.U32();
  n.act_min = r.F64s(act_dim);
  n.act_max = r.F64s(act_dim);
  return n;
}

}  // namespace

std::string SerializeCheckpoint(const Policy& policy) {
  const GeneratorNet& net = policy.net;
  Writer w;
  w.Bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.U8(static_cast<std::uint8_t>(net.kind()));
  w.U8(static_cast<std::uint8_t>(net.activation()));
  w.U32(net.layer_sizes().size());
  for (std::size_t s : net.layer_sizes()) w.U32(s);
  w.U32(policy.horizons.obs);
  w.U32(policy.horizons.pred);
  w.U32(policy.horizons.exec);
  w.U32(net.output_shape().action_dim);
  w.U32(static_cast<std::uint64_t>(policy.flow_steps));
  WriteNormalizer(w, policy.normalizer);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    w.F64s(net.weights(k).values());
    w.F64s(net.biases(k).values());
  }
  return w.Take();
}

Policy DeserializeCheckpoint(const std::string& bytes) {
  Reader r(bytes);
  r.Expect(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint8_t kind = r.U8();
  const std::uint8_t activation = r.U8();
  if (kind > 1) throw FormatError("unknown net kind " + std::to_string(kind));
  if (activation != 0) throw FormatError("unknown activation tag");
  const std::uint32_t n_sizes = r.U32();
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("bad layer count");
  std::vector<std::size_t> sizes(n_sizes);
  for (auto& s : sizes) s = r.U32();
  Policy p;
  p.horizons.obs = r.U32();
  p.horizons.pred = r.U32();
  p.horizons.exec = r.U32();
  const std::uint32_t action_dim = r.U32();
  p.flow_steps = static_cast<int>(r.U32());
  p.normalizer = ReadNormalizer(r);
  if (p.normalizer.action_dim() != action_dim) {
    throw FormatError("normalizer action_dim disagrees with header");
  }
  p.net = GeneratorNet(sizes, OutputShape{p.horizons.pred, action_dim},
                       static_cast<NetKind>(kind));
  for (std::size_t k = 0; k < p.net.num_layers(); ++k) {
    auto wv = r.F64s(p.net.weights(k).size());
    std::copy(wv.begin(), wv.end(), p.net.weights(k).values().begin());
    auto bv = r.F64s(p.net.biases(k).size());
    std::copy(bv.begin(), bv.end(), p.net.biases(k).values().begin());
  }
  r.ExpectEnd();
  return p;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void WriteCheckpoint(const std::filesystem::path& path, const Policy& policy) {
  WriteFileBytes(path, SerializeCheckpoint(policy));
}

Policy ReadCheckpoint(const std::filesystem::path& path) {
  return DeserializeCheckpoint(ReadFileBytes(path));
}

std::size_t Dataset::num_episodes() const {
  int n = 0;
  for (int e : episode) n = std::max(n, e + 1);
  return static_cast<std::size_t>(n);
}

std::string SerializeDataset(const Dataset& ds) {
  Writer w;
  w.Bytes(kDatasetMagic, sizeof(kDatasetMagic));
  w.Str(ds.task);
  w.Str(ds.spec_text);
  w.U32(ds.horizons.obs);
  w.U32(ds.horizons.pred);
  w.U32(ds.horizons.exec);
  w.U32(ds.obs_dim);
  w.U32(ds.action_dim);
  WriteNormalizer(w, ds.normalizer);
  w.U32(ds.demos.size());
  const std::size_t obs_len = ds.horizons.obs * ds.obs_dim;
  const std::size_t act_len = ds.horizons.pred * ds.action_dim;
  for (std::size_t i = 0; i < ds.demos.size(); ++i) {
    const Demo& d = ds.demos[i];
    if (d.observation.size() != obs_len || d.actions.size() != act_len) {
      throw DimensionError("demo " + std::to_string(i) + " does not match header");
    }
    w.I32(ds.episode.at(i));
    w.I32(ds.mode.at(i));
    w.F64s(d.observation);
    w.F64s(d.actions.values());
  }
  return w.Take();
}

Dataset DeserializeDataset(const std::string& bytes) {
  Reader r(bytes);
  r.Expect(kDatasetMagic, sizeof(kDatasetMagic));
  Dataset ds;
  ds.task = r.Str();
  ds.spec_text = r.Str();
  ds.horizons.obs = r.U32();
  ds.horizons.pred = r.U32();
  ds.horizons.exec = r.U32();
  ds.obs_dim = r.U32();
  ds.action_dim = r.U32();
  ds.normalizer = ReadNormalizer(r);
  const std::uint32_t n = r.U32();
  const std::size_t obs_len = ds.horizons.obs * ds.obs_dim;
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.episode.push_back(r.I32());
    ds.mode.push_back(r.I32());
    Demo d;
    d.observation = r.F64s(obs_len);
    d.actions = DenseArray({ds.horizons.pred, ds.action_dim},
                           r.F64s(ds.horizons.pred * ds.action_dim));
    ds.demos.push_back(std::move(d));
  }
  r.ExpectEnd();
  return ds;
}

void WriteDataset(const std::filesystem::path& path, const Dataset& ds) {
  WriteFileBytes(path, SerializeDataset(ds));
}

Dataset ReadDataset(const std::filesystem::path& path) {
  return DeserializeDataset(ReadFileBytes(path));
}

void WriteEpisodesCsv(std::ostream& os, const std::vector<Episode>& episodes) {
  const auto old_precision = os.precision(17);
  os << "episode,t,effector_x,effector_y,block_x,block_y,angle,action_x,action_y,mode\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    for (std::size_t t = 0; t < ep.states.size(); ++t) {
      const PushLiteState& s = ep.states[t];
      os << e << ',' << t << ',' << s.effector.x << ',' << s.effector.y << ','
         << s.block.x << ',' << s.block.y << ',' << s.angle << ','
         << ep.actions[t][0] << ',' << ep.actions[t][1] << ',' << ep.mode << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace imle
