#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsva/encoder.hpp"
#include "dsva/vam.hpp"

namespace dsva {

// Checkpoint container: magic "DSVA", u32 version, a shape table
// (u32 count, then per entry u16 name length + name bytes + u32 rank +
// u32 dims), then each tensor's payload in table order as little-endian
// 32-bit floats, row-major. A JSON sidecar at <path>.json carries the
// hyperparameters.
struct TensorEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

struct CheckpointFile {
  std::uint32_t version = 1;
  std::vector<TensorEntry> entries;

  const TensorEntry* find(const std::string& name) const;
  void save(const std::filesystem::path& path) const;
  // Validates the whole file before returning; truncation never yields a
  // partial load.
  static CheckpointFile load(const std::filesystem::path& path);
};

struct CheckpointHyper {
  int layers = 0;
  int heads = 0;
  int head_dim = 0;
  int dim = 0;
  int grid_side = 0;
  int image_size = 0;
  int patch_dim = 0;
  int num_attributes = 0;
};

struct ModelCheckpoint {
  EncoderParams encoder;
  PrototypeBank prototypes;
  CheckpointHyper hyper;
};

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& encoder,
                     const PrototypeBank& prototypes, int image_size);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// Helpers shared with the pretrained-import bridge.
TensorEntry to_entry(const std::string& name, const Mat& m);
TensorEntry to_entry(const std::string& name, const Vec& v);
Mat entry_to_matrix(const TensorEntry& entry);
Vec entry_to_vector(const TensorEntry& entry);

}  // namespace dsva
