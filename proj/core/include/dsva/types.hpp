#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dsva {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// H x W x C image, channel-interleaved row-major, values in [0, 1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  static ImageTensor zeros(int height, int width, int channels);

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  // Checks value range/finiteness and, when grid_side > 0, that H and W
  // divide evenly into a grid_side x grid_side patch grid.
  void validate(int grid_side = 0) const;
};

// N = k*k patch embeddings of one image, one row per patch, row-major
// patch order (patch n sits at grid row n/k, column n%k).
struct PatchGrid {
  int k = 0;
  int dim = 0;
  Mat embeddings;  // N x dim

  int num_patches() const { return k * k; }
};

enum class AttributeGroup { Color, ObjectPresence, Material, Texture, Shape, Functions };

std::string to_string(AttributeGroup group);
AttributeGroup parse_attribute_group(const std::string& text);

// Named attributes partitioned into the six groups. Index order is the
// canonical attribute axis everywhere downstream.
struct AttributeVocabulary {
  struct Attribute {
    std::string name;
    AttributeGroup group;
    bool operator==(const Attribute&) const = default;
  };
  std::vector<Attribute> attributes;

  int size() const { return static_cast<int>(attributes.size()); }
  int index_of(const std::string& name) const;  // throws InputError

  void validate() const;

  // File format: UTF-8 lines "group<TAB>attribute-name".
  static AttributeVocabulary load_tsv(const std::filesystem::path& path);
  void save_tsv(const std::filesystem::path& path) const;

  bool operator==(const AttributeVocabulary&) const = default;
};

// Real-valued class embeddings r_A(y); one row per class, one column per
// vocabulary attribute.
struct ClassAttributeMatrix {
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;
  Mat values;  // num_classes x N_a

  int num_classes() const { return static_cast<int>(class_names.size()); }
  int num_attributes() const { return static_cast<int>(attribute_names.size()); }
  int index_of(const std::string& class_name) const;  // throws InputError

  void validate() const;

  // CSV: header "class,<attr>,...", then one row per class.
  static ClassAttributeMatrix load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;
};

// Seen/unseen class partition plus per-class train/test image ids.
struct SplitSpec {
  std::vector<std::string> seen_classes;
  std::vector<std::string> unseen_classes;
  std::map<std::string, std::vector<std::string>> train_images;  // class -> ids
  std::map<std::string, std::vector<std::string>> test_images;   // class -> ids

  bool is_seen(const std::string& class_name) const;
  bool is_unseen(const std::string& class_name) const;

  void validate() const;

  static SplitSpec load_json(const std::filesystem::path& path);
  void save_json(const std::filesystem::path& path) const;
};

}  // namespace dsva
