#include "dsva/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsva/errors.hpp"
#include "dsva/ioutil.hpp"

namespace dsva {

ImageTensor ImageTensor::zeros(int height, int width, int channels) {
  ImageTensor img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.values.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  return img;
}

void ImageTensor::validate(int grid_side) const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw ValidationError("image dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(height) * width * channels)
    throw ShapeError("image buffer size does not match H*W*C");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw ValidationError("image values must be finite and within [0, 1]");
  }
  if (grid_side > 0 && (height % grid_side != 0 || width % grid_side != 0))
    throw ShapeError("image size " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by grid side " + std::to_string(grid_side));
}

std::string to_string(AttributeGroup group) {
  switch (group) {
    case AttributeGroup::Color: return "color";
    case AttributeGroup::ObjectPresence: return "object presence";
    case AttributeGroup::Material: return "material";
    case AttributeGroup::Texture: return "texture";
    case AttributeGroup::Shape: return "shape";
    case AttributeGroup::Functions: return "functions";
  }
  return "color";
}

AttributeGroup parse_attribute_group(const std::string& text) {
  if (text == "color") return AttributeGroup::Color;
  if (text == "object presence") return AttributeGroup::ObjectPresence;
  if (text == "material") return AttributeGroup::Material;
  if (text == "texture") return AttributeGroup::Texture;
  if (text == "shape") return AttributeGroup::Shape;
  if (text == "functions") return AttributeGroup::Functions;
  throw ValidationError("unknown attribute group '" + text + "'");
}

int AttributeVocabulary::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].name == name) return static_cast<int>(i);
  throw InputError("unknown attribute '" + name + "'");
}

void AttributeVocabulary::validate() const {
  if (attributes.empty()) throw ValidationError("attribute vocabulary is empty");
  std::set<std::string> seen;
  for (const auto& attr : attributes) {
    if (attr.name.empty()) throw ValidationError("attribute with empty name");
    if (!seen.insert(attr.name).second)
      throw ValidationError("duplicate attribute name '" + attr.name + "'");
  }
}

AttributeVocabulary AttributeVocabulary::load_tsv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  AttributeVocabulary vocab;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'group<TAB>name'");
    vocab.attributes.push_back(
        {line.substr(tab + 1), parse_attribute_group(line.substr(0, tab))});
  }
  vocab.validate();
  return vocab;
}

void AttributeVocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const auto& attr : attributes)
    out << to_string(attr.group) << '\t' << attr.name << '\n';
  write_file_atomic(path, out.str());
}

int ClassAttributeMatrix::index_of(const std::string& class_name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == class_name) return static_cast<int>(i);
  throw InputError("unknown class '" + class_name + "'");
}

void ClassAttributeMatrix::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(class_names.size()))
    throw ShapeError("class matrix row count does not match class names");
  if (values.cols() != static_cast<Eigen::Index>(attribute_names.size()))
    throw ShapeError("class matrix column count does not match attribute names");
  if (!values.allFinite()) throw ValidationError("class matrix contains non-finite entries");
  std::set<std::string> seen;
  for (const auto& name : class_names)
    if (!seen.insert(name).second)
      throw ValidationError("duplicate class name '" + name + "'");
}

ClassAttributeMatrix ClassAttributeMatrix::load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty class matrix file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  ClassAttributeMatrix matrix;
  {
    std::istringstream header(line);
    std::string cell;
    bool first = true;
    while (std::getline(header, cell, ',')) {
      if (first) {
        if (cell != "class")
          throw ValidationError("class matrix header must start with 'class', got '" + cell + "'");
        first = false;
      } else {
        matrix.attribute_names.push_back(cell);
      }
    }
    if (first) throw ValidationError("class matrix header is empty");
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) continue;
    matrix.class_names.push_back(cell);
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("class matrix: cannot parse value '" + cell + "'");
      }
    }
    if (vals.size() != matrix.attribute_names.size())
      throw ShapeError("class matrix row '" + matrix.class_names.back() + "' has " +
                       std::to_string(vals.size()) + " values, expected " +
                       std::to_string(matrix.attribute_names.size()));
    rows.push_back(std::move(vals));
  }

  matrix.values.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(matrix.attribute_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  matrix.validate();
  return matrix;
}

void ClassAttributeMatrix::save_csv(const std::filesystem::path& path) const {
  validate();
  std::ostringstream out;
  out.precision(17);
  out << "class";
  for (const auto& name : attribute_names) out << ',' << name;
  out << '\n';
  for (int r = 0; r < num_classes(); ++r) {
    out << class_names[r];
    for (int c = 0; c < num_attributes(); ++c) out << ',' << values(r, c);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

bool SplitSpec::is_seen(const std::string& class_name) const {
  return std::find(seen_classes.begin(), seen_classes.end(), class_name) != seen_classes.end();
}

bool SplitSpec::is_unseen(const std::string& class_name) const {
  return std::find(unseen_classes.begin(), unseen_classes.end(), class_name) !=
         unseen_classes.end();
}

void SplitSpec::validate() const {
  for (const auto& name : seen_classes)
    if (is_unseen(name))
      throw ValidationError("class '" + name + "' is both seen and unseen");
  for (const auto& [cls, ids] : train_images) {
    (void)ids;
    if (!is_seen(cls))
      throw ValidationError("train images listed for non-seen class '" + cls + "'");
  }
  for (const auto& [cls, ids] : test_images) {
    (void)ids;
    if (!is_seen(cls) && !is_unseen(cls))
      throw ValidationError("test images listed for unknown class '" + cls + "'");
  }
}

SplitSpec SplitSpec::load_json(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("split file " + path.string() + ": " + e.what());
  }
  SplitSpec split;
  try {
    split.seen_classes = doc.at("seen").get<std::vector<std::string>>();
    split.unseen_classes = doc.at("unseen").get<std::vector<std::string>>();
    split.train_images =
        doc.at("train").get<std::map<std::string, std::vector<std::string>>>();
    split.test_images =
        doc.at("test").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("split file " + path.string() + ": " + e.what());
  }
  split.validate();
  return split;
}

void SplitSpec::save_json(const std::filesystem::path& path) const {
  validate();
  nlohmann::json doc;
  doc["seen"] = seen_classes;
  doc["unseen"] = unseen_classes;
  doc["train"] = train_images;
  doc["test"] = test_images;
  write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace dsva
