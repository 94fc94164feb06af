#include "ldamend/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ldamend/errors.hpp"
#include "ldamend/experiment.hpp"

namespace ldamend {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void matrix(const MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void mlp(const Mlp<double>& net) {
    u64(net.depth());
    for (const auto& layer : net.layers()) {
      u64(static_cast<std::uint64_t>(layer.out_dim()));
      u64(static_cast<std::uint64_t>(layer.in_dim()));
      u8(static_cast<std::uint8_t>(layer.activation));
      matrix(layer.weights);
      for (Index i = 0; i < layer.bias.size(); ++i) f64(layer.bias[i]);
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) throw CheckpointError("checkpoint is truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  Index dim(const char* what) {
    const std::uint64_t v = u64();
    if (v == 0 || v > (1u << 20)) throw CheckpointError(std::string("checkpoint has an implausible ") + what);
    return static_cast<Index>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1u << 24)) throw CheckpointError("checkpoint string is implausibly long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  MatrixXd matrix(Index rows, Index cols) {
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }
  Mlp<double> mlp() {
    const Index depth = dim("layer count");
    std::vector<DenseLayer<double>> layers;
    for (Index l = 0; l < depth; ++l) {
      DenseLayer<double> layer;
      const Index out = dim("layer width");
      const Index in = dim("layer width");
      const std::uint8_t act = u8();
      if (act > 2) throw CheckpointError("checkpoint has an unknown activation");
      layer.activation = static_cast<Activation>(act);
      layer.weights = matrix(out, in);
      layer.bias = matrix(out, 1);
      layers.push_back(std::move(layer));
    }
    try {
      return Mlp<double>(std::move(layers));
    } catch (const Error& e) {
      throw CheckpointError(std::string("checkpoint network is inconsistent: ") + e.what());
    }
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(const TrainedPipeline& p, std::ostream& out) {
  Writer w(out);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const Index c = p.vocab.size();
  w.u64(static_cast<std::uint64_t>(c));
  w.u64(static_cast<std::uint64_t>(p.model.in_dim()));
  w.u64(static_cast<std::uint64_t>(p.vocab.dim()));
  w.u64(static_cast<std::uint64_t>(p.model.feature_dim()));
  for (const auto& word : p.vocab.words) w.str(word);
  w.matrix(p.vocab.vectors);
  w.mlp(p.autoencoder.encoder);
  w.mlp(p.autoencoder.decoder);
  w.mlp(p.model.backbone);
  w.mlp(p.model.head);
  w.u8(p.prototypes.mode == PrototypeMode::weighted_mean ? 0 : 1);
  for (bool v : p.prototypes.valid) w.u8(v ? 1 : 0);
  w.matrix(p.prototypes.centers);
  for (Index k = 0; k < c; ++k) w.f64(p.alpha_scale[k]);
  w.str(to_json(p.config).dump());
}

TrainedPipeline read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const Index c = r.dim("class count");
  const Index d_in = r.dim("input size");
  const Index d_sem = r.dim("semantic size");
  const Index d_f = r.dim("feature size");

  TrainedPipeline p;
  for (Index k = 0; k < c; ++k) p.vocab.words.push_back(r.str());
  p.vocab.vectors = r.matrix(c, d_sem);
  p.autoencoder.encoder = r.mlp();
  p.autoencoder.decoder = r.mlp();
  p.model.backbone = r.mlp();
  p.model.head = r.mlp();
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw CheckpointError("checkpoint has an unknown prototype mode");
  p.prototypes.mode = mode == 0 ? PrototypeMode::weighted_mean : PrototypeMode::count_scaled;
  for (Index k = 0; k < c; ++k) p.prototypes.valid.push_back(r.u8() != 0);
  p.prototypes.centers = r.matrix(c, d_f);
  p.alpha_scale.resize(c);
  for (Index k = 0; k < c; ++k) p.alpha_scale[k] = r.f64();
  try {
    p.config = engine_config_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config is unreadable: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");

  try {
    p.vocab.validate();
    p.autoencoder.validate(d_sem);
    p.model.validate();
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint dimensions disagree: ") + e.what());
  }
  if (p.autoencoder.encoder.in_dim() != d_in || p.model.in_dim() != d_in || p.model.feature_dim() != d_f ||
      p.model.num_classes() != c)
    throw CheckpointError("checkpoint dimension header does not match its networks");
  return p;
}

void save_checkpoint(const TrainedPipeline& pipeline, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) { write_checkpoint(pipeline, out); });
}

TrainedPipeline load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace ldamend
