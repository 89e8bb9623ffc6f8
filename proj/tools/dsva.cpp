// dsva: annotate / train / eval / synth / sweep / export-* pipeline driver.
//
// Progress and metrics go to stderr as JSON lines; data products go to
// files only (written atomically), so stdout stays clean for piping.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dsva/annotator.hpp"
#include "dsva/checkpoint.hpp"
#include "dsva/config.hpp"
#include "dsva/data.hpp"
#include "dsva/errors.hpp"
#include "dsva/image_io.hpp"
#include "dsva/inference.hpp"
#include "dsva/ioutil.hpp"
#include "dsva/training.hpp"

namespace {

using namespace dsva;

void log_event(const nlohmann::json& fields) {
  std::cerr << fields.dump() << std::endl;
}

struct GlobalFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed_flag;
};

// defaults <- config file <- preset <- DSVA_SEED <- --seed
Config resolve_config(const GlobalFlags& flags) {
  Config config;
  if (!flags.config_path.empty()) config = load_config(flags.config_path);
  if (!flags.preset.empty()) {
    if (flags.preset != "tiny") throw ValidationError("unknown preset '" + flags.preset + "'");
    apply_tiny_preset(config);
  }
  if (const char* env = std::getenv("DSVA_SEED")) {
    try {
      config.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError("DSVA_SEED is not an integer: " + std::string(env));
    }
  }
  if (flags.seed_flag) config.seed = *flags.seed_flag;
  config.validate();
  return config;
}

std::vector<double> parse_gamma_grid(const std::string& csv) {
  std::vector<double> grid;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse gamma grid entry '" + item + "'");
    }
  }
  return grid;
}

// ---- annotate ----

struct BridgeEmbeddings {
  std::map<std::string, Vec> by_id;
  int dim = 0;
};

BridgeEmbeddings load_bridge_embeddings(const std::filesystem::path& path) {
  BridgeEmbeddings out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id;
    if (!std::getline(row, id, ',')) continue;
    std::vector<double> vals;
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("embeddings.csv: bad value '" + cell + "' for id " + id);
      }
    }
    if (out.dim == 0) out.dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != out.dim)
      throw ValidationError("embeddings.csv: inconsistent dimension for id " + id);
    Vec v(out.dim);
    for (int i = 0; i < out.dim; ++i) v(i) = vals[static_cast<std::size_t>(i)];
    const double n = v.norm();
    if (n > 0) v /= n;  // both sides of the dot product are unit vectors
    out.by_id.emplace(id, std::move(v));
  }
  if (out.by_id.empty()) throw ValidationError("embeddings.csv is empty: " + path.string());
  return out;
}

// Per-class probe ids: train images for seen classes, held-out test
// images for unseen classes when a split is available, otherwise the
// whole class. Sampling is seeded per class index.
std::map<std::string, std::vector<std::string>> pick_probes(const DatasetIndex& index,
                                                            const SplitSpec* split, int m,
                                                            std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> probes;
  Rng rng(seed);
  std::uint64_t class_counter = 0;
  for (const auto& cls : index.class_names) {
    std::vector<std::string> pool;
    if (split && split->is_seen(cls) && split->train_images.count(cls)) {
      pool = split->train_images.at(cls);
    } else if (split && split->is_unseen(cls) && split->test_images.count(cls)) {
      pool = split->test_images.at(cls);
    } else {
      for (const auto& entry : index.by_class.at(cls)) pool.push_back(entry.id);
    }
    if (static_cast<int>(pool.size()) < m)
      throw InputError("class '" + cls + "' has " + std::to_string(pool.size()) +
                       " candidate probe images, need m=" + std::to_string(m));
    Rng class_rng = rng.child(class_counter++);
    const auto picks = class_rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(m));
    auto& list = probes[cls];
    for (const auto p : picks) list.push_back(pool[p]);
  }
  return probes;
}

int run_annotate(const GlobalFlags& flags, const std::string& images_dir,
                 const std::string& vocab_path, const std::string& embedder_spec, int m_override,
                 const std::string& out_path, const std::string& split_path,
                 const std::string& prompt_pattern) {
  Config config = resolve_config(flags);
  if (m_override > 0) config.probe_count = m_override;
  const int m = config.probe_count;

  const AttributeVocabulary vocab = AttributeVocabulary::load_tsv(vocab_path);
  const DatasetIndex index = load_dataset(images_dir, config.image_size);

  std::optional<SplitSpec> split;
  if (!split_path.empty()) split = SplitSpec::load_json(split_path);
  log_event({{"event", "probe-source"},
             {"m", m},
             {"policy", split ? "seen:train, unseen:held-out-test" : "all-images"}});

  PromptTemplate prompt;
  if (!prompt_pattern.empty()) prompt.pattern = prompt_pattern;

  const auto probes = pick_probes(index, split ? &*split : nullptr, m, config.seed);
  const std::vector<std::string> class_names = index.class_names;

  ClassAttributeMatrix matrix;
  if (embedder_spec == "mock") {
    const auto embedder = make_mock_embedder(config.seed);
    matrix = build_class_matrix(
        vocab, class_names,
        [&](const std::string& cls) {
          std::vector<ImageTensor> images;
          for (const auto& id : probes.at(cls)) images.push_back(load_image(index, id));
          return images;
        },
        *embedder, prompt);
  } else if (embedder_spec.rfind("bridge:", 0) == 0) {
    const std::filesystem::path bridge_dir = embedder_spec.substr(7);
    const auto embeddings_path = bridge_dir / "embeddings.csv";
    if (!std::filesystem::exists(embeddings_path)) {
      // scaffold the request files and stop; an external backend fills
      // embeddings.csv with one row per manifest id and per prompt id p<k>
      std::ostringstream manifest;
      manifest << "id,path\n";
      for (const auto& cls : index.class_names)
        for (const auto& entry : index.by_class.at(cls))
          manifest << entry.id << ',' << entry.path.string() << '\n';
      write_file_atomic(bridge_dir / "manifest.csv", manifest.str());
      std::ostringstream prompts;
      for (const auto& attr : vocab.attributes) prompts << prompt.apply(attr.name) << '\n';
      write_file_atomic(bridge_dir / "prompts.txt", prompts.str());
      log_event({{"event", "bridge-request-written"},
                 {"dir", bridge_dir.string()},
                 {"next", "run the embedding backend, then re-run annotate"}});
      std::cerr << "bridge: wrote manifest.csv and prompts.txt to " << bridge_dir
                << "; embeddings.csv not found, run the backend first" << std::endl;
      return 1;
    }
    const BridgeEmbeddings bridge = load_bridge_embeddings(embeddings_path);
    std::vector<Vec> text_embeddings;
    for (int a = 0; a < vocab.size(); ++a) {
      const std::string key = "p" + std::to_string(a);
      const auto it = bridge.by_id.find(key);
      if (it == bridge.by_id.end())
        throw InputError("embeddings.csv missing prompt id '" + key + "'");
      text_embeddings.push_back(it->second);
    }
    matrix = build_class_matrix_from_embeddings(
        vocab, class_names,
        [&](const std::string& cls) {
          std::vector<Vec> vs;
          for (const auto& id : probes.at(cls)) {
            const auto it = bridge.by_id.find(id);
            if (it == bridge.by_id.end())
              throw InputError("embeddings.csv missing image id '" + id + "'");
            vs.push_back(it->second);
          }
          return vs;
        },
        text_embeddings);
  } else {
    throw ValidationError("unknown embedder '" + embedder_spec + "' (expected mock or bridge:DIR)");
  }

  matrix.save_csv(out_path);
  log_event({{"event", "annotate-done"},
             {"classes", matrix.num_classes()},
             {"attributes", matrix.num_attributes()},
             {"out", out_path}});
  return 0;
}

// ---- train ----

int run_train(const GlobalFlags& flags, const std::string& data_dir,
              const std::string& split_path, const std::string& matrix_path,
              const std::string& out_dir, const std::string& init_checkpoint,
              bool freeze_backbone) {
  Config config = resolve_config(flags);
  if (freeze_backbone) config.freeze_backbone = true;

  const DatasetIndex index = load_dataset(data_dir, config.image_size);
  const SplitSpec split = SplitSpec::load_json(split_path);
  const ClassAttributeMatrix matrix = ClassAttributeMatrix::load_csv(matrix_path);

  std::optional<EncoderParams> init;
  if (!init_checkpoint.empty()) {
    std::ostringstream report;
    init = import_pretrained(init_checkpoint, report);
    std::cerr << report.str();
  }

  const TrainState state = train(index, split, matrix, config, out_dir, nullptr, &std::cerr,
                                 init ? &*init : nullptr);
  log_event({{"event", "train-done"},
             {"epochs", state.epoch},
             {"checkpoint", (std::filesystem::path(out_dir) / "final.dsva").string()}});
  return 0;
}

// ---- eval / sweep ----

struct LoadedModel {
  ModelCheckpoint model;
  DatasetIndex index;
  SplitSpec split;
  ClassAttributeMatrix normalized;
};

LoadedModel load_for_eval(const Config& config, const std::string& checkpoint_path,
                          const std::string& data_dir, const std::string& split_path,
                          const std::string& matrix_path) {
  LoadedModel out{load_checkpoint(checkpoint_path),
                  load_dataset(data_dir, 0 /*replaced below*/), SplitSpec{},
                  ClassAttributeMatrix{}};
  out.index = load_dataset(data_dir, out.model.hyper.image_size);
  out.split = SplitSpec::load_json(split_path);
  const ClassAttributeMatrix raw = ClassAttributeMatrix::load_csv(matrix_path);
  if (raw.num_attributes() != out.model.prototypes.num_attributes())
    throw ShapeError("class matrix has " + std::to_string(raw.num_attributes()) +
                     " attributes but the checkpoint prototype bank has " +
                     std::to_string(out.model.prototypes.num_attributes()));
  out.normalized = normalize_class_matrix(raw, config.class_norm);
  return out;
}

int run_eval(const GlobalFlags& flags, const std::string& checkpoint_path,
             const std::string& data_dir, const std::string& split_path,
             const std::string& matrix_path, double gamma_flag, bool gamma_set,
             const std::string& report_path) {
  const Config config = resolve_config(flags);
  const double gamma = gamma_set ? gamma_flag : config.gamma_calibration;
  const LoadedModel loaded =
      load_for_eval(config, checkpoint_path, data_dir, split_path, matrix_path);

  const ScoredDataset scored = score_test_images(loaded.index, loaded.split, loaded.normalized,
                                                 loaded.model.encoder, loaded.model.prototypes);
  const EvalReport report =
      evaluate(scored.scores, scored.labels, gamma, config.zsl_accuracy, config.gzsl_accuracy);
  write_file_atomic(report_path, report.to_json());
  log_event({{"event", "eval-done"},
             {"zsl_top1", report.zsl_top1},
             {"gzsl_seen", report.gzsl_seen},
             {"gzsl_unseen", report.gzsl_unseen},
             {"harmonic", report.harmonic},
             {"report", report_path}});
  return 0;
}

int run_sweep(const GlobalFlags& flags, const std::string& checkpoint_path,
              const std::string& data_dir, const std::string& split_path,
              const std::string& matrix_path, const std::string& grid_csv,
              const std::string& report_path) {
  const Config config = resolve_config(flags);
  const LoadedModel loaded =
      load_for_eval(config, checkpoint_path, data_dir, split_path, matrix_path);
  const std::vector<double> grid = parse_gamma_grid(grid_csv);

  const ScoredDataset scored = score_test_images(loaded.index, loaded.split, loaded.normalized,
                                                 loaded.model.encoder, loaded.model.prototypes);
  const SweepResult sweep = calibration_sweep(scored.scores, scored.labels, grid,
                                              config.zsl_accuracy, config.gzsl_accuracy);

  nlohmann::json doc;
  doc["gamma_grid"] = grid;
  doc["best_gamma"] = grid[sweep.best_index];
  doc["best_harmonic"] = sweep.reports[sweep.best_index].harmonic;
  auto& reports = doc["reports"] = nlohmann::json::array();
  for (const auto& r : sweep.reports) reports.push_back(nlohmann::json::parse(r.to_json()));
  write_file_atomic(report_path, doc.dump(2) + "\n");
  log_event({{"event", "sweep-done"},
             {"best_gamma", grid[sweep.best_index]},
             {"best_harmonic", sweep.reports[sweep.best_index].harmonic},
             {"report", report_path}});
  return 0;
}

// ---- exports ----

ImageTensor load_single_image(const std::filesystem::path& path, int image_size) {
  ImageTensor img = read_ppm(path);
  if (img.height != image_size || img.width != image_size)
    img = resize_bilinear(img, image_size, image_size);
  return img;
}

std::string grid_csv(const Mat& grid) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) out << (c ? "," : "") << grid(r, c);
    out << '\n';
  }
  return out.str();
}

int run_export_attn(const GlobalFlags&, const std::string& image_path,
                    const std::string& checkpoint_path, const std::string& out_dir) {
  const ModelCheckpoint model = load_checkpoint(checkpoint_path);
  const ImageTensor img = load_single_image(image_path, model.hyper.image_size);
  const PatchGrid grid = encode(img, model.encoder);
  const AttentionMapStack stack = attention_maps(grid, model.prototypes);

  const std::filesystem::path dir = out_dir;
  std::filesystem::create_directories(dir);
  const int k = stack.k;
  for (int i = 0; i < stack.num_attributes(); ++i) {
    Mat map(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) map(r, c) = stack.at(i, r, c);
    char name[32];
    std::snprintf(name, sizeof name, "map_%03d.csv", i);
    write_file_atomic(dir / name, grid_csv(map));
  }
  write_file_atomic(dir / "mean_attention.csv", grid_csv(mean_attention(stack)));
  log_event({{"event", "export-attn-done"}, {"maps", stack.num_attributes()}, {"out", out_dir}});
  return 0;
}

int run_export_crop(const GlobalFlags&, const std::string& image_path,
                    const std::string& checkpoint_path, const std::string& out_dir) {
  const ModelCheckpoint model = load_checkpoint(checkpoint_path);
  const ImageTensor img = load_single_image(image_path, model.hyper.image_size);
  const PatchGrid grid = encode(img, model.encoder);
  const AttentionMapStack stack = attention_maps(grid, model.prototypes);
  const ConcentrationMask mask = concentration_mask(mean_attention(stack));
  const CropBox box = crop_box(mask);
  const ImageTensor crop = crop_and_resize(img, box, model.encoder.grid_side);

  const std::filesystem::path dir = out_dir;
  std::filesystem::create_directories(dir);
  write_ppm(crop, dir / "crop.ppm");
  Mat mask_grid(mask.k, mask.k);
  for (int r = 0; r < mask.k; ++r)
    for (int c = 0; c < mask.k; ++c) mask_grid(r, c) = mask.mask(r, c);
  write_file_atomic(dir / "mask.csv", grid_csv(mask_grid));
  nlohmann::json box_doc{{"row_min", box.row_min},
                         {"row_max", box.row_max},
                         {"col_min", box.col_min},
                         {"col_max", box.col_max},
                         {"threshold", mask.threshold}};
  write_file_atomic(dir / "box.json", box_doc.dump(2) + "\n");
  log_event({{"event", "export-crop-done"}, {"out", out_dir}});
  return 0;
}

int run_export_embeddings(const GlobalFlags&, const std::string& data_dir,
                          const std::string& checkpoint_path, const std::string& out_path) {
  const ModelCheckpoint model = load_checkpoint(checkpoint_path);
  const DatasetIndex index = load_dataset(data_dir, model.hyper.image_size);

  std::ostringstream out;
  out.precision(17);
  out << "id";
  for (int a = 0; a < model.prototypes.num_attributes(); ++a) out << ",f" << a;
  out << '\n';
  for (const auto& cls : index.class_names) {
    for (const auto& entry : index.by_class.at(cls)) {
      const ImageTensor img = load_image(index, entry.id);
      const PatchGrid grid = encode(img, model.encoder);
      const AttributePrediction pred = predict_attributes(attention_maps(grid, model.prototypes));
      out << entry.id;
      for (Eigen::Index i = 0; i < pred.values.size(); ++i) out << ',' << pred.values(i);
      out << '\n';
    }
  }
  write_file_atomic(out_path, out.str());
  log_event({{"event", "export-embeddings-done"},
             {"rows", static_cast<long long>(index.total_images())},
             {"out", out_path}});
  return 0;
}

// ---- synth ----

int run_synth(const GlobalFlags& flags, const std::string& spec_path, const std::string& out_dir) {
  const Config config = resolve_config(flags);
  const SyntheticSpec spec = (spec_path.empty() || spec_path == "default")
                                 ? SyntheticSpec::builtin_default()
                                 : SyntheticSpec::load(spec_path);
  const SyntheticOutput out = generate_synthetic(spec, out_dir, config.seed);
  log_event({{"event", "synth-done"},
             {"classes", out.ground_truth.num_classes()},
             {"attributes", out.vocabulary.size()},
             {"images_per_class", spec.images_per_class},
             {"out", out_dir}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsva: attribute annotation and zero-shot scene classification"};
  app.require_subcommand(1);
  // let global flags (--seed, --config, --preset) appear after the subcommand
  app.fallthrough();

  GlobalFlags flags;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides DSVA_SEED)");
  app.add_option("--config", flags.config_path, "Key=value config file");
  app.add_option("--preset", flags.preset, "Named preset (tiny)");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Build a class-attribute matrix");
  std::string images_dir, vocab_path, embedder_spec = "mock", out_matrix, split_path, prompt;
  int m_override = 0;
  annotate->add_option("--images", images_dir, "Class-folder image directory")->required();
  annotate->add_option("--vocab", vocab_path, "Vocabulary TSV (group<TAB>name)")->required();
  annotate->add_option("--embedder", embedder_spec, "mock | bridge:DIR");
  annotate->add_option("--m", m_override, "Probe images per class");
  annotate->add_option("--out", out_matrix, "Output matrix CSV")->required();
  annotate->add_option("--split", split_path, "Optional split JSON for probe purity");
  annotate->add_option("--prompt", prompt, "Prompt pattern with one {attribute} slot");

  // train
  auto* train_cmd = app.add_subcommand("train", "Two-phase training run");
  std::string train_data, train_split, train_matrix, train_out, init_ckpt;
  bool freeze_backbone = false;
  train_cmd->add_option("--data", train_data, "Class-folder image directory")->required();
  train_cmd->add_option("--split", train_split, "Split JSON")->required();
  train_cmd->add_option("--class-matrix", train_matrix, "Class-attribute matrix CSV")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--init-checkpoint", init_ckpt, "Encoder checkpoint to start from");
  train_cmd->add_flag("--freeze-backbone", freeze_backbone,
                      "Keep the encoder fixed in the main phase too");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "ZSL/GZSL evaluation report");
  std::string eval_ckpt, eval_data, eval_split, eval_matrix, eval_report = "report.json";
  double gamma_flag = 0.0;
  bool gzsl = true;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "Class-folder image directory")->required();
  eval_cmd->add_option("--split", eval_split, "Split JSON")->required();
  eval_cmd->add_option("--class-matrix", eval_matrix, "Class-attribute matrix CSV")->required();
  auto* gamma_opt = eval_cmd->add_option("--gamma", gamma_flag, "Calibrated-stacking constant");
  eval_cmd->add_flag("--gzsl", gzsl, "Include GZSL metrics (always on; kept for scripts)");
  eval_cmd->add_option("--report", eval_report, "Output report JSON");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Calibration sweep over gamma");
  std::string sweep_ckpt, sweep_data, sweep_split, sweep_matrix, sweep_report = "sweep.json";
  std::string gamma_grid = "0,1e-5,1e-4,1e-3,1e-2";
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "Model checkpoint")->required();
  sweep_cmd->add_option("--data", sweep_data, "Class-folder image directory")->required();
  sweep_cmd->add_option("--split", sweep_split, "Split JSON")->required();
  sweep_cmd->add_option("--class-matrix", sweep_matrix, "Class-attribute matrix CSV")->required();
  sweep_cmd->add_option("--gamma-grid", gamma_grid, "Comma-separated ascending gammas");
  sweep_cmd->add_option("--report", sweep_report, "Output report JSON");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic dataset");
  std::string synth_spec, synth_out;
  synth_cmd->add_option("--spec", synth_spec, "Synthetic spec file (or 'default')");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // exports
  auto* attn_cmd = app.add_subcommand("export-attn", "Write per-attribute attention maps as CSV");
  std::string attn_image, attn_ckpt, attn_out = ".";
  attn_cmd->add_option("--image", attn_image, "Input PPM image")->required();
  attn_cmd->add_option("--checkpoint", attn_ckpt, "Model checkpoint")->required();
  attn_cmd->add_option("--out", attn_out, "Output directory");

  auto* crop_cmd = app.add_subcommand("export-crop", "Write the concentration crop and mask");
  std::string crop_image, crop_ckpt, crop_out = ".";
  crop_cmd->add_option("--image", crop_image, "Input PPM image")->required();
  crop_cmd->add_option("--checkpoint", crop_ckpt, "Model checkpoint")->required();
  crop_cmd->add_option("--out", crop_out, "Output directory");

  auto* emb_cmd = app.add_subcommand("export-embeddings",
                                     "Dump predicted attribute rows for every image");
  std::string emb_data, emb_ckpt, emb_out = "embeddings.csv";
  emb_cmd->add_option("--data", emb_data, "Class-folder image directory")->required();
  emb_cmd->add_option("--checkpoint", emb_ckpt, "Model checkpoint")->required();
  emb_cmd->add_option("--out", emb_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints usage, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (seed_opt->count() > 0) flags.seed_flag = seed_value;

  try {
    if (*annotate)
      return run_annotate(flags, images_dir, vocab_path, embedder_spec, m_override, out_matrix,
                          split_path, prompt);
    if (*train_cmd)
      return run_train(flags, train_data, train_split, train_matrix, train_out, init_ckpt,
                       freeze_backbone);
    if (*eval_cmd)
      return run_eval(flags, eval_ckpt, eval_data, eval_split, eval_matrix, gamma_flag,
                      gamma_opt->count() > 0, eval_report);
    if (*sweep_cmd)
      return run_sweep(flags, sweep_ckpt, sweep_data, sweep_split, sweep_matrix, gamma_grid,
                       sweep_report);
    if (*synth_cmd) return run_synth(flags, synth_spec, synth_out);
    if (*attn_cmd) return run_export_attn(flags, attn_image, attn_ckpt, attn_out);
    if (*crop_cmd) return run_export_crop(flags, crop_image, crop_ckpt, crop_out);
    if (*emb_cmd) return run_export_embeddings(flags, emb_data, emb_ckpt, emb_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
