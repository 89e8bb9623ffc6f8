#include "dsva/data.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsva/errors.hpp"
#include "dsva/image_io.hpp"
#include "dsva/ioutil.hpp"

namespace dsva {
namespace {

struct PaletteToken {
  const char* name;
  AttributeGroup group;
};

// Canonical token order; it fixes the attribute axis of generated data.
constexpr PaletteToken kPalette[] = {
    {"red", AttributeGroup::Color},
    {"green", AttributeGroup::Color},
    {"blue", AttributeGroup::Color},
    {"yellow", AttributeGroup::Color},
    {"circle", AttributeGroup::Shape},
    {"square", AttributeGroup::Shape},
    {"triangle", AttributeGroup::Shape},
    {"cross", AttributeGroup::Shape},
    {"striped", AttributeGroup::Texture},
    {"checker", AttributeGroup::Texture},
    {"symmetric", AttributeGroup::Texture},
    {"paired", AttributeGroup::ObjectPresence},
    {"metallic", AttributeGroup::Material},
    {"cultivated", AttributeGroup::Functions},  // derived: green + striped
};

int palette_index(const std::string& token) {
  for (std::size_t i = 0; i < std::size(kPalette); ++i)
    if (token == kPalette[i].name) return static_cast<int>(i);
  return -1;
}

struct Rgb {
  double r, g, b;
};

Rgb token_color(const std::string& token) {
  if (token == "red") return {0.90, 0.12, 0.12};
  if (token == "green") return {0.10, 0.75, 0.18};
  if (token == "blue") return {0.15, 0.25, 0.92};
  if (token == "yellow") return {0.95, 0.88, 0.10};
  return {0.25, 0.25, 0.25};
}

bool inside_shape(const std::string& shape, double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  if (shape == "circle") return dx * dx + dy * dy <= r * r;
  if (shape == "square") return std::fabs(dx) <= r && std::fabs(dy) <= r;
  if (shape == "triangle") {
    // upward triangle: apex at cy - r, base at cy + r
    if (dy < -r || dy > r) return false;
    const double half_width = (dy + r) * 0.5;
    return std::fabs(dx) <= half_width;
  }
  if (shape == "cross") {
    return (std::fabs(dx) <= r / 3.0 && std::fabs(dy) <= r) ||
           (std::fabs(dy) <= r / 3.0 && std::fabs(dx) <= r);
  }
  return false;
}

struct ShapeInstance {
  std::string kind;
  Rgb color;
  double cx, cy, radius;
  bool metallic;
};

void draw_shape(ImageTensor& img, const ShapeInstance& s) {
  const int y_lo = std::max(0, static_cast<int>(std::floor(s.cy - s.radius)) - 1);
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(s.cy + s.radius)) + 1);
  const int x_lo = std::max(0, static_cast<int>(std::floor(s.cx - s.radius)) - 1);
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(s.cx + s.radius)) + 1);
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      if (!inside_shape(s.kind, x, y, s.cx, s.cy, s.radius)) continue;
      double gain = 1.0;
      if (s.metallic) {
        gain = 0.45 + 0.9 * (y - (s.cy - s.radius)) / (2.0 * s.radius);
        gain = std::clamp(gain, 0.35, 1.35);
      }
      img.at(y, x, 0) = std::clamp(s.color.r * gain, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(s.color.g * gain, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(s.color.b * gain, 0.0, 1.0);
    }
  }
}

ImageTensor render_class_image(const std::vector<std::string>& tokens, int size, double noise,
                               Rng& rng) {
  const auto has = [&](const char* t) {
    return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
  };

  ImageTensor img = ImageTensor::zeros(size, size, 3);
  const int band = std::max(1, size / 8);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.82;
      if (has("striped")) v = (y / band) % 2 == 0 ? 0.92 : 0.64;
      else if (has("checker")) v = ((y / band) + (x / band)) % 2 == 0 ? 0.92 : 0.64;
      img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = v;
    }
  }

  std::vector<Rgb> colors;
  for (const auto& t : tokens)
    if (t == "red" || t == "green" || t == "blue" || t == "yellow")
      colors.push_back(token_color(t));
  std::vector<std::string> shapes;
  for (const auto& t : tokens)
    if (t == "circle" || t == "square" || t == "triangle" || t == "cross") shapes.push_back(t);
  if (shapes.empty() && !colors.empty()) shapes.push_back("square");  // color needs a carrier

  const bool symmetric = has("symmetric");
  const bool metallic = has("metallic");

  std::vector<ShapeInstance> instances;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ShapeInstance s;
    s.kind = shapes[i];
    s.color = colors.empty() ? Rgb{0.25, 0.25, 0.25} : colors[i % colors.size()];
    s.radius = rng.uniform(0.17, 0.26) * size;
    s.cx = rng.uniform(0.30, 0.70) * size;
    s.cy = rng.uniform(0.30, 0.70) * size;
    s.metallic = metallic;
    instances.push_back(s);
  }
  if (has("paired") && !instances.empty()) {
    ShapeInstance s = instances.front();
    s.radius *= 0.55;
    s.cx = rng.uniform(0.15, 0.85) * size;
    s.cy = rng.uniform(0.15, 0.85) * size;
    instances.push_back(s);
  }
  if (symmetric) {
    const std::size_t count = instances.size();
    for (std::size_t i = 0; i < count; ++i) {
      ShapeInstance mirrored = instances[i];
      mirrored.cx = (size - 1) - instances[i].cx;
      instances.push_back(mirrored);
    }
  }
  for (const auto& s : instances) draw_shape(img, s);

  if (noise > 0) {
    for (auto& v : img.values) v = std::clamp(v + rng.uniform(-noise, noise), 0.0, 1.0);
  }
  return img;
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

const DatasetIndex::Entry& DatasetIndex::find(const std::string& id) const {
  const std::size_t slash = id.find('/');
  if (slash != std::string::npos) {
    const auto it = by_class.find(id.substr(0, slash));
    if (it != by_class.end()) {
      for (const auto& entry : it->second)
        if (entry.id == id) return entry;
    }
  }
  throw InputError("unknown image id '" + id + "'");
}

std::size_t DatasetIndex::total_images() const {
  std::size_t n = 0;
  for (const auto& [cls, entries] : by_class) n += entries.size();
  return n;
}

DatasetIndex load_dataset(const std::filesystem::path& root, int resize_target) {
  if (!std::filesystem::is_directory(root))
    throw IoError("dataset root is not a directory: " + root.string());
  if (resize_target < 1) throw ValidationError("resize target must be >= 1");

  DatasetIndex index;
  index.resize_target = resize_target;

  std::vector<std::string> classes;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  std::sort(classes.begin(), classes.end());

  for (const auto& cls : classes) {
    std::vector<std::string> files;
    for (const auto& f : std::filesystem::directory_iterator(root / cls))
      if (f.is_regular_file()) files.push_back(f.path().filename().string());
    std::sort(files.begin(), files.end());

    std::vector<DatasetIndex::Entry> entries;
    for (const auto& name : files) {
      const auto path = root / cls / name;
      std::error_code ec;
      const auto size = std::filesystem::file_size(path, ec);
      if (ec || size == 0) {
        index.warnings.push_back("skipping unreadable image: " + path.string());
        continue;
      }
      entries.push_back({cls + "/" + name, cls, path});
    }
    if (entries.empty())
      throw ValidationError("class '" + cls + "' contains no readable images");
    index.class_names.push_back(cls);
    index.by_class.emplace(cls, std::move(entries));
  }
  if (index.class_names.empty())
    throw ValidationError("dataset root has no class directories: " + root.string());
  return index;
}

ImageTensor load_image(const DatasetIndex& index, const std::string& id) {
  const auto& entry = index.find(id);
  ImageTensor img = read_ppm(entry.path);
  if (img.height != index.resize_target || img.width != index.resize_target)
    img = resize_bilinear(img, index.resize_target, index.resize_target);
  return img;
}

SplitSpec make_splits(const std::vector<std::string>& class_names, int n_seen, int n_unseen,
                      std::uint64_t seed) {
  if (n_seen < 1 || n_unseen < 1 ||
      n_seen + n_unseen != static_cast<int>(class_names.size()))
    throw ValidationError("split ratio " + std::to_string(n_seen) + "/" +
                          std::to_string(n_unseen) + " does not match " +
                          std::to_string(class_names.size()) + " classes");
  std::vector<std::string> shuffled = class_names;
  Rng rng(seed);
  rng.shuffle(shuffled);
  SplitSpec split;
  split.seen_classes.assign(shuffled.begin(), shuffled.begin() + n_seen);
  split.unseen_classes.assign(shuffled.begin() + n_seen, shuffled.end());
  std::sort(split.seen_classes.begin(), split.seen_classes.end());
  std::sort(split.unseen_classes.begin(), split.unseen_classes.end());
  return split;
}

SplitSpec make_splits_explicit(const std::vector<std::string>& seen,
                               const std::vector<std::string>& unseen) {
  SplitSpec split;
  split.seen_classes = seen;
  split.unseen_classes = unseen;
  split.validate();  // rejects overlap
  return split;
}

void assign_images(SplitSpec& split, const DatasetIndex& index, double train_fraction,
                   std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValidationError("train fraction must lie in (0, 1)");
  split.train_images.clear();
  split.test_images.clear();
  Rng rng(seed);
  std::uint64_t class_counter = 0;
  for (const auto& cls : index.class_names) {
    const auto& entries = index.by_class.at(cls);
    if (split.is_seen(cls)) {
      std::vector<std::string> ids;
      for (const auto& e : entries) ids.push_back(e.id);
      Rng class_rng = rng.child(class_counter);
      class_rng.shuffle(ids);
      const auto n_train = static_cast<std::size_t>(
          std::max<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(
                                          std::llround(train_fraction * ids.size()))));
      auto& train = split.train_images[cls];
      auto& test = split.test_images[cls];
      for (std::size_t i = 0; i < ids.size(); ++i)
        (i < n_train ? train : test).push_back(ids[i]);
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
    } else if (split.is_unseen(cls)) {
      auto& test = split.test_images[cls];
      for (const auto& e : entries) test.push_back(e.id);
    }
    ++class_counter;
  }
  split.validate();
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  SyntheticSpec spec;
  spec.classes.clear();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = trim_copy(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": missing '='");
    const std::string key = trim_copy(trimmed.substr(0, eq));
    const std::string value = trim_copy(trimmed.substr(eq + 1));
    try {
      if (key == "image_size") spec.image_size = std::stoi(value);
      else if (key == "images_per_class") spec.images_per_class = std::stoi(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "unseen") spec.unseen_classes = split_list(value);
      else if (key.rfind("class.", 0) == 0)
        spec.classes.emplace_back(key.substr(6), split_list(value));
      else
        throw ValidationError("unknown synthetic spec key '" + key + "'");
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": cannot parse value '" + value + "'");
    }
  }
  return spec;
}

std::string SyntheticSpec::serialize() const {
  std::ostringstream out;
  out << "image_size=" << image_size << '\n'
      << "images_per_class=" << images_per_class << '\n'
      << "noise=" << noise << '\n';
  for (const auto& [name, tokens] : classes) {
    out << "class." << name << '=';
    for (std::size_t i = 0; i < tokens.size(); ++i) out << (i ? "," : "") << tokens[i];
    out << '\n';
  }
  out << "unseen=";
  for (std::size_t i = 0; i < unseen_classes.size(); ++i)
    out << (i ? "," : "") << unseen_classes[i];
  out << '\n';
  return out.str();
}

SyntheticSpec SyntheticSpec::builtin_default() {
  SyntheticSpec spec;
  spec.image_size = 64;
  spec.images_per_class = 100;
  spec.noise = 0.05;
  spec.classes = {
      {"red-circle-striped", {"red", "circle", "striped"}},
      {"green-square-checker", {"green", "square", "checker"}},
      {"blue-triangle-plain", {"blue", "triangle"}},
      {"yellow-circle-checker", {"yellow", "circle", "checker"}},
      {"red-square-symmetric", {"red", "square", "symmetric"}},
      {"green-triangle-checker", {"green", "triangle", "checker"}},
      {"blue-square-striped", {"blue", "square", "striped"}},
      {"yellow-triangle-striped-symmetric", {"yellow", "triangle", "striped", "symmetric"}},
      {"red-triangle-checker", {"red", "triangle", "checker"}},
      {"green-circle-symmetric", {"green", "circle", "symmetric"}},
      {"blue-circle-striped", {"blue", "circle", "striped"}},
      {"yellow-square-plain", {"yellow", "square"}},
  };
  spec.unseen_classes = {"red-triangle-checker", "green-circle-symmetric", "blue-circle-striped",
                         "yellow-square-plain"};
  return spec;
}

SyntheticOutput generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir, std::uint64_t seed) {
  if (spec.image_size < 16) throw ValidationError("synthetic image_size must be >= 16");
  if (spec.images_per_class < 1)
    throw ValidationError("synthetic images_per_class must be >= 1");
  if (spec.noise < 0) throw ValidationError("synthetic noise must be >= 0");
  if (spec.classes.empty()) throw ValidationError("synthetic spec defines no classes");

  // --- audit class definitions ---
  std::set<std::string> names;
  std::set<int> used_tokens;
  for (const auto& [name, tokens] : spec.classes) {
    if (!names.insert(name).second)
      throw ValidationError("duplicate synthetic class '" + name + "'");
    if (tokens.empty())
      throw ValidationError("synthetic class '" + name + "' has no attributes");
    bool striped = false, checker = false;
    for (const auto& t : tokens) {
      const int idx = palette_index(t);
      if (idx < 0) throw ValidationError("unknown attribute token '" + t + "' in class '" + name + "'");
      if (t == "cultivated")
        throw ValidationError("'cultivated' is derived (green + striped), not assignable");
      striped |= t == "striped";
      checker |= t == "checker";
      used_tokens.insert(idx);
    }
    if (striped && checker)
      throw ValidationError("class '" + name + "' mixes striped and checker backgrounds");
  }
  for (const auto& u : spec.unseen_classes)
    if (!names.count(u))
      throw ValidationError("unseen class '" + u + "' is not defined");

  // derive the function tag where it applies
  auto derived_cultivated = [](const std::vector<std::string>& tokens) {
    const auto has = [&](const char* t) {
      return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
    };
    return has("green") && has("striped");
  };
  bool any_cultivated = false;
  for (const auto& [name, tokens] : spec.classes)
    any_cultivated |= derived_cultivated(tokens);
  if (any_cultivated) used_tokens.insert(palette_index("cultivated"));

  SyntheticOutput out;
  for (int idx : used_tokens)
    out.vocabulary.attributes.push_back(
        {kPalette[idx].name, kPalette[idx].group});
  out.vocabulary.validate();

  // ground-truth rows, exact by construction
  out.ground_truth.attribute_names.clear();
  for (const auto& attr : out.vocabulary.attributes)
    out.ground_truth.attribute_names.push_back(attr.name);
  out.ground_truth.values =
      Mat::Zero(static_cast<Eigen::Index>(spec.classes.size()), out.vocabulary.size());
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& [name, tokens] = spec.classes[c];
    out.ground_truth.class_names.push_back(name);
    for (const auto& t : tokens)
      out.ground_truth.values(static_cast<Eigen::Index>(c), out.vocabulary.index_of(t)) = 1.0;
    if (derived_cultivated(tokens))
      out.ground_truth.values(static_cast<Eigen::Index>(c),
                              out.vocabulary.index_of("cultivated")) = 1.0;
  }

  // --- coverage audit ---
  for (std::size_t a = 0; a < spec.classes.size(); ++a)
    for (std::size_t b = a + 1; b < spec.classes.size(); ++b)
      if (out.ground_truth.values.row(static_cast<Eigen::Index>(a)) ==
          out.ground_truth.values.row(static_cast<Eigen::Index>(b)))
        throw ValidationError("classes '" + spec.classes[a].first + "' and '" +
                              spec.classes[b].first + "' have identical attribute vectors");
  std::vector<std::string> seen_names;
  for (const auto& [name, tokens] : spec.classes)
    if (std::find(spec.unseen_classes.begin(), spec.unseen_classes.end(), name) ==
        spec.unseen_classes.end())
      seen_names.push_back(name);
  if (!spec.unseen_classes.empty() && seen_names.empty())
    throw ValidationError("synthetic spec leaves no seen classes");
  for (const auto& u : spec.unseen_classes) {
    const int urow = out.ground_truth.index_of(u);
    for (int a = 0; a < out.vocabulary.size(); ++a) {
      if (out.ground_truth.values(urow, a) == 0.0) continue;
      bool covered = false;
      for (const auto& s : seen_names)
        covered |= out.ground_truth.values(out.ground_truth.index_of(s), a) != 0.0;
      if (!covered)
        throw ValidationError("attribute '" + out.vocabulary.attributes[a].name +
                              "' of unseen class '" + u + "' appears in no seen class");
    }
  }

  // --- render ---
  out.image_root = out_dir / "images";
  Rng root_rng(seed);
  std::uint64_t class_counter = 0;
  for (const auto& [name, tokens] : spec.classes) {
    Rng class_rng = root_rng.child(class_counter++);
    const auto class_dir = out.image_root / name;
    std::filesystem::create_directories(class_dir);
    for (int i = 0; i < spec.images_per_class; ++i) {
      Rng image_rng = class_rng.child(static_cast<std::uint64_t>(i));
      const ImageTensor img =
          render_class_image(tokens, spec.image_size, spec.noise, image_rng);
      char file_name[32];
      std::snprintf(file_name, sizeof file_name, "img_%04d.ppm", i);
      write_ppm(img, class_dir / file_name);
    }
  }

  // --- split + metadata files ---
  out.split = make_splits_explicit(seen_names, spec.unseen_classes);
  const DatasetIndex index = load_dataset(out.image_root, spec.image_size);
  assign_images(out.split, index, 0.8, seed ^ 0x51AB7E5ULL);

  out.vocabulary.save_tsv(out_dir / "vocabulary.tsv");
  out.ground_truth.save_csv(out_dir / "class_matrix.csv");
  out.split.save_json(out_dir / "split.json");
  write_file_atomic(out_dir / "spec.txt", spec.serialize());
  return out;
}

EncoderParams import_pretrained(const std::filesystem::path& path, std::ostream& report) {
  const CheckpointFile file = CheckpointFile::load(path);

  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse checkpoint sidecar " + path.string() + ".json: " + e.what());
  }
  int layers = 0, heads = 0, head_dim = 0, dim = 0, grid_side = 0, patch_dim = 0;
  try {
    layers = sidecar.at("layers").get<int>();
    heads = sidecar.at("heads").get<int>();
    head_dim = sidecar.at("head_dim").get<int>();
    dim = sidecar.at("dim").get<int>();
    grid_side = sidecar.at("grid_side").get<int>();
    patch_dim = sidecar.at("patch_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint sidecar missing fields: " + std::string(e.what()));
  }

  const int n = grid_side * grid_side;
  const std::uint32_t sd = static_cast<std::uint32_t>(heads * head_dim);
  const auto u = [](int v) { return static_cast<std::uint32_t>(v); };

  std::ostringstream mismatches;
  auto fetch = [&](const std::string& name,
                   std::vector<std::uint32_t> expected) -> const TensorEntry* {
    const TensorEntry* entry = file.find(name);
    if (!entry) {
      mismatches << "  missing tensor '" << name << "'\n";
      return nullptr;
    }
    // the positional table may carry one class-token row; flagged by caller
    if (entry->dims != expected) {
      mismatches << "  tensor '" << name << "': expected [";
      for (std::size_t i = 0; i < expected.size(); ++i)
        mismatches << (i ? "," : "") << expected[i];
      mismatches << "], found [";
      for (std::size_t i = 0; i < entry->dims.size(); ++i)
        mismatches << (i ? "," : "") << entry->dims[i];
      mismatches << "]\n";
      return nullptr;
    }
    report << "  " << name << " [";
    for (std::size_t i = 0; i < entry->dims.size(); ++i)
      report << (i ? "," : "") << entry->dims[i];
    report << "] mapped\n";
    return entry;
  };

  report << "importing " << path.string() << '\n';

  EncoderParams params;
  params.heads = heads;
  params.head_dim = head_dim;
  params.grid_side = grid_side;

  // positional embeddings: accept N rows, or N+1 with a leading class token
  bool dropped_class_token = false;
  {
    const TensorEntry* pos = file.find("encoder.pos_embed");
    if (!pos) {
      mismatches << "  missing tensor 'encoder.pos_embed'\n";
    } else if (pos->dims == std::vector<std::uint32_t>{u(n), u(dim)}) {
      params.pos_embed = entry_to_matrix(*pos);
      report << "  encoder.pos_embed [" << n << "," << dim << "] mapped\n";
    } else if (pos->dims == std::vector<std::uint32_t>{u(n + 1), u(dim)}) {
      const Mat with_token = entry_to_matrix(*pos);
      params.pos_embed = with_token.bottomRows(n);
      dropped_class_token = true;
      report << "  encoder.pos_embed [" << n + 1 << "," << dim
             << "] mapped, class-token row dropped\n";
    } else {
      mismatches << "  tensor 'encoder.pos_embed': expected [" << n << "," << dim << "] or ["
                 << n + 1 << "," << dim << "], found [";
      for (std::size_t i = 0; i < pos->dims.size(); ++i)
        mismatches << (i ? "," : "") << pos->dims[i];
      mismatches << "]\n";
    }
  }

  if (const auto* e = fetch("encoder.patch_proj.weight", {u(patch_dim), u(dim)}))
    params.patch_weight = entry_to_matrix(*e);
  if (const auto* e = fetch("encoder.patch_proj.bias", {u(dim)}))
    params.patch_bias = entry_to_vector(*e);

  params.layers.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    const std::string prefix = "encoder.layers." + std::to_string(l) + ".";
    auto& layer = params.layers[static_cast<std::size_t>(l)];
    if (const auto* e = fetch(prefix + "ln1.gain", {u(dim)})) layer.ln1_gain = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "ln1.bias", {u(dim)})) layer.ln1_bias = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "qkv.weight", {u(dim), 3 * sd}))
      layer.w_qkv = entry_to_matrix(*e);
    if (const auto* e = fetch(prefix + "qkv.bias", {3 * sd})) layer.b_qkv = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "msa.weight", {sd, u(dim)}))
      layer.w_msa = entry_to_matrix(*e);
    if (const auto* e = fetch(prefix + "msa.bias", {u(dim)})) layer.b_msa = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "ln2.gain", {u(dim)})) layer.ln2_gain = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "ln2.bias", {u(dim)})) layer.ln2_bias = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "mlp1.weight", {u(dim), u(4 * dim)}))
      layer.w_mlp1 = entry_to_matrix(*e);
    if (const auto* e = fetch(prefix + "mlp1.bias", {u(4 * dim)}))
      layer.b_mlp1 = entry_to_vector(*e);
    if (const auto* e = fetch(prefix + "mlp2.weight", {u(4 * dim), u(dim)}))
      layer.w_mlp2 = entry_to_matrix(*e);
    if (const auto* e = fetch(prefix + "mlp2.bias", {u(dim)}))
      layer.b_mlp2 = entry_to_vector(*e);
  }

  const std::string problems = mismatches.str();
  if (!problems.empty())
    throw ShapeError("pretrained import failed for " + path.string() + ":\n" + problems);

  if (dropped_class_token) report << "  note: class token removed, N=" << n << " preserved\n";
  params.validate();
  return params;
}

}  // namespace dsva
