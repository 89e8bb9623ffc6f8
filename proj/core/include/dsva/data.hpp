#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsva/checkpoint.hpp"
#include "dsva/encoder.hpp"
#include "dsva/rng.hpp"
#include "dsva/types.hpp"

namespace dsva {

// Class-folder dataset: one subdirectory per class, PPM images inside.
// Image ids are "<class>/<filename>". Decoding is lazy; the index only
// records paths. Ordering is lexicographic by class then filename so a
// reload reproduces the same index.
struct DatasetIndex {
  struct Entry {
    std::string id;
    std::string class_name;
    std::filesystem::path path;
  };

  std::vector<std::string> class_names;                 // sorted
  std::map<std::string, std::vector<Entry>> by_class;   // entries sorted by filename
  int resize_target = 0;
  std::vector<std::string> warnings;  // skipped unreadable files

  const Entry& find(const std::string& id) const;  // throws InputError
  std::size_t total_images() const;
};

DatasetIndex load_dataset(const std::filesystem::path& root, int resize_target);

// Decode + square bilinear resize + [0,1] scaling.
ImageTensor load_image(const DatasetIndex& index, const std::string& id);

// Seeded random class partition into n_seen/n_unseen.
SplitSpec make_splits(const std::vector<std::string>& class_names, int n_seen, int n_unseen,
                      std::uint64_t seed);
SplitSpec make_splits_explicit(const std::vector<std::string>& seen,
                               const std::vector<std::string>& unseen);

// Fills train/test image lists: each seen class is split train_fraction /
// rest per class (seeded), unseen classes contribute test images only.
void assign_images(SplitSpec& split, const DatasetIndex& index, double train_fraction,
                   std::uint64_t seed);

// Desk-scale dataset generator. Classes are sets of attribute tokens from
// a built-in palette (colors, shapes, background textures, layout and
// object-presence markers); every token maps to a deterministic visual
// rendering, so the emitted ground-truth matrix is exact by construction.
struct SyntheticSpec {
  int image_size = 64;
  int images_per_class = 100;
  double noise = 0.05;
  std::vector<std::pair<std::string, std::vector<std::string>>> classes;  // name -> tokens
  std::vector<std::string> unseen_classes;

  static SyntheticSpec load(const std::filesystem::path& path);
  static SyntheticSpec builtin_default();
  std::string serialize() const;
};

struct SyntheticOutput {
  AttributeVocabulary vocabulary;
  ClassAttributeMatrix ground_truth;
  SplitSpec split;
  std::filesystem::path image_root;
};

// Writes images/<class>/img_NNNN.ppm, vocabulary.tsv, class_matrix.csv,
// split.json and spec.txt under out_dir. Runs the coverage audit first:
// distinct rows, no contradictory tokens, every unseen-class attribute
// present in some seen class.
SyntheticOutput generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir, std::uint64_t seed);

// Loads encoder parameters from a bridge checkpoint (same container as
// native ones). A positional table with one extra leading row is treated
// as a class token and dropped. Emits a per-tensor shape report.
EncoderParams import_pretrained(const std::filesystem::path& path, std::ostream& report);

}  // namespace dsva
