#include "dsva/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsva/errors.hpp"
#include "dsva/ioutil.hpp"

namespace dsva {
namespace {

constexpr char kMagic[4] = {'D', 'S', 'V', 'A'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint16_t u16() {
    need(2);
    const auto b0 = static_cast<unsigned char>(buf_[pos_]);
    const auto b1 = static_cast<unsigned char>(buf_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(b0 | (b1 << 8));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size())
      throw IoError("truncated checkpoint file: " + path_);
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t TensorEntry::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const TensorEntry* CheckpointFile::find(const std::string& name) const {
  for (const auto& entry : entries)
    if (entry.name == name) return &entry;
  return nullptr;
}

void CheckpointFile::save(const std::filesystem::path& path) const {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& entry : entries) {
    if (entry.name.size() > 0xFFFF) throw ValidationError("tensor name too long");
    put_u16(out, static_cast<std::uint16_t>(entry.name.size()));
    out.append(entry.name);
    put_u32(out, static_cast<std::uint32_t>(entry.dims.size()));
    for (auto d : entry.dims) put_u32(out, d);
    if (entry.data.size() != entry.element_count())
      throw ShapeError("tensor '" + entry.name + "' payload does not match its dims");
  }
  for (const auto& entry : entries)
    for (float v : entry.data) put_f32(out, v);
  write_file_atomic(path, out);
}

CheckpointFile CheckpointFile::load(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  Reader reader(buf, path.string());
  if (reader.bytes(4) != std::string(kMagic, 4))
    throw IoError("bad magic, not a DSVA checkpoint: " + path.string());
  CheckpointFile file;
  file.version = reader.u32();
  if (file.version != 1)
    throw IoError("unsupported checkpoint version " + std::to_string(file.version));
  const std::uint32_t count = reader.u32();
  file.entries.resize(count);
  for (auto& entry : file.entries) {
    entry.name = reader.bytes(reader.u16());
    const std::uint32_t rank = reader.u32();
    if (rank > 8) throw IoError("implausible tensor rank in " + path.string());
    entry.dims.resize(rank);
    for (auto& d : entry.dims) d = reader.u32();
  }
  for (auto& entry : file.entries) {
    entry.data.resize(entry.element_count());
    for (auto& v : entry.data) v = reader.f32();
  }
  if (!reader.exhausted())
    throw IoError("trailing bytes after checkpoint payload: " + path.string());
  return file;
}

TensorEntry to_entry(const std::string& name, const Mat& m) {
  TensorEntry entry;
  entry.name = name;
  entry.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  entry.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      entry.data.push_back(static_cast<float>(m(r, c)));
  return entry;
}

TensorEntry to_entry(const std::string& name, const Vec& v) {
  TensorEntry entry;
  entry.name = name;
  entry.dims = {static_cast<std::uint32_t>(v.size())};
  entry.data.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) entry.data.push_back(static_cast<float>(v(i)));
  return entry;
}

Mat entry_to_matrix(const TensorEntry& entry) {
  if (entry.dims.size() != 2)
    throw ShapeError("tensor '" + entry.name + "' is not a matrix");
  Mat m(entry.dims[0], entry.dims[1]);
  std::size_t i = 0;
  for (std::uint32_t r = 0; r < entry.dims[0]; ++r)
    for (std::uint32_t c = 0; c < entry.dims[1]; ++c) m(r, c) = entry.data[i++];
  return m;
}

Vec entry_to_vector(const TensorEntry& entry) {
  if (entry.dims.size() != 1)
    throw ShapeError("tensor '" + entry.name + "' is not a vector");
  Vec v(entry.dims[0]);
  for (std::uint32_t i = 0; i < entry.dims[0]; ++i) v(i) = entry.data[i];
  return v;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& encoder,
                     const PrototypeBank& prototypes, int image_size) {
  CheckpointFile file;
  file.entries.push_back(to_entry("encoder.patch_proj.weight", encoder.patch_weight));
  file.entries.push_back(to_entry("encoder.patch_proj.bias", encoder.patch_bias));
  file.entries.push_back(to_entry("encoder.pos_embed", encoder.pos_embed));
  for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
    const auto& layer = encoder.layers[l];
    const std::string prefix = "encoder.layers." + std::to_string(l) + ".";
    file.entries.push_back(to_entry(prefix + "ln1.gain", layer.ln1_gain));
    file.entries.push_back(to_entry(prefix + "ln1.bias", layer.ln1_bias));
    file.entries.push_back(to_entry(prefix + "qkv.weight", layer.w_qkv));
    file.entries.push_back(to_entry(prefix + "qkv.bias", layer.b_qkv));
    file.entries.push_back(to_entry(prefix + "msa.weight", layer.w_msa));
    file.entries.push_back(to_entry(prefix + "msa.bias", layer.b_msa));
    file.entries.push_back(to_entry(prefix + "ln2.gain", layer.ln2_gain));
    file.entries.push_back(to_entry(prefix + "ln2.bias", layer.ln2_bias));
    file.entries.push_back(to_entry(prefix + "mlp1.weight", layer.w_mlp1));
    file.entries.push_back(to_entry(prefix + "mlp1.bias", layer.b_mlp1));
    file.entries.push_back(to_entry(prefix + "mlp2.weight", layer.w_mlp2));
    file.entries.push_back(to_entry(prefix + "mlp2.bias", layer.b_mlp2));
  }
  file.entries.push_back(to_entry("vam.prototypes", prototypes.prototypes));
  file.save(path);

  nlohmann::json sidecar;
  sidecar["format"] = "dsva-checkpoint";
  sidecar["version"] = 1;
  sidecar["layers"] = encoder.layers.size();
  sidecar["heads"] = encoder.heads;
  sidecar["head_dim"] = encoder.head_dim;
  sidecar["dim"] = encoder.dim();
  sidecar["grid_side"] = encoder.grid_side;
  sidecar["image_size"] = image_size;
  sidecar["patch_dim"] = encoder.patch_dim();
  sidecar["num_attributes"] = prototypes.num_attributes();
  write_file_atomic(path.string() + ".json", sidecar.dump(2) + "\n");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const CheckpointFile file = CheckpointFile::load(path);

  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse checkpoint sidecar " + path.string() + ".json: " + e.what());
  }

  ModelCheckpoint model;
  auto& hyper = model.hyper;
  try {
    hyper.layers = sidecar.at("layers").get<int>();
    hyper.heads = sidecar.at("heads").get<int>();
    hyper.head_dim = sidecar.at("head_dim").get<int>();
    hyper.dim = sidecar.at("dim").get<int>();
    hyper.grid_side = sidecar.at("grid_side").get<int>();
    hyper.image_size = sidecar.at("image_size").get<int>();
    hyper.patch_dim = sidecar.at("patch_dim").get<int>();
    hyper.num_attributes = sidecar.at("num_attributes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint sidecar missing fields: " + std::string(e.what()));
  }

  auto require = [&](const std::string& name) -> const TensorEntry& {
    const TensorEntry* entry = file.find(name);
    if (!entry) throw IoError("checkpoint missing tensor '" + name + "': " + path.string());
    return *entry;
  };

  auto& enc = model.encoder;
  enc.heads = hyper.heads;
  enc.head_dim = hyper.head_dim;
  enc.grid_side = hyper.grid_side;
  enc.patch_weight = entry_to_matrix(require("encoder.patch_proj.weight"));
  enc.patch_bias = entry_to_vector(require("encoder.patch_proj.bias"));
  enc.pos_embed = entry_to_matrix(require("encoder.pos_embed"));
  enc.layers.resize(static_cast<std::size_t>(hyper.layers));
  for (int l = 0; l < hyper.layers; ++l) {
    const std::string prefix = "encoder.layers." + std::to_string(l) + ".";
    auto& layer = enc.layers[static_cast<std::size_t>(l)];
    layer.ln1_gain = entry_to_vector(require(prefix + "ln1.gain"));
    layer.ln1_bias = entry_to_vector(require(prefix + "ln1.bias"));
    layer.w_qkv = entry_to_matrix(require(prefix + "qkv.weight"));
    layer.b_qkv = entry_to_vector(require(prefix + "qkv.bias"));
    layer.w_msa = entry_to_matrix(require(prefix + "msa.weight"));
    layer.b_msa = entry_to_vector(require(prefix + "msa.bias"));
    layer.ln2_gain = entry_to_vector(require(prefix + "ln2.gain"));
    layer.ln2_bias = entry_to_vector(require(prefix + "ln2.bias"));
    layer.w_mlp1 = entry_to_matrix(require(prefix + "mlp1.weight"));
    layer.b_mlp1 = entry_to_vector(require(prefix + "mlp1.bias"));
    layer.w_mlp2 = entry_to_matrix(require(prefix + "mlp2.weight"));
    layer.b_mlp2 = entry_to_vector(require(prefix + "mlp2.bias"));
  }
  model.prototypes.prototypes = entry_to_matrix(require("vam.prototypes"));
  enc.validate();
  return model;
}

}  // namespace dsva
