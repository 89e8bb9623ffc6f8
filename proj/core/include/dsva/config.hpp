#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dsva {

enum class ClassNorm { L2, None, ZScore };
enum class AccuracyMode { Overall, PerClassMean };

std::string to_string(ClassNorm norm);
std::string to_string(AccuracyMode mode);
ClassNorm parse_class_norm(std::string_view text);
AccuracyMode parse_accuracy_mode(std::string_view text);

// All run-time knobs, with defaults matching the reference training recipe.
// Files are flat UTF-8 key=value lines; '#' starts a comment.
struct Config {
  // loss scaling and calibration
  double lambda_scale = 0.08;
  double gamma_calibration = 1e-4;
  int probe_count = 10;        // m, probe images per class for annotation
  double tau_init = 0.07;      // contrastive temperature; optimized as log(tau)
  int batch_size = 32;

  // encoder geometry
  int layers = 12;
  int heads = 12;
  int dim = 768;
  int head_dim = 0;            // 0 = derive dim / heads
  int grid_side = 7;           // k; patch side = image_size / k
  int image_size = 224;

  // optimizer and two-phase schedule
  double beta1 = 0.5;
  double beta2 = 0.999;
  int warmup_epochs = 4;
  double warmup_lr = 1e-4;
  int main_epochs = 26;
  double main_lr = 1e-6;

  std::uint64_t seed = 0;
  bool freeze_backbone = false;
  ClassNorm class_norm = ClassNorm::L2;
  AccuracyMode zsl_accuracy = AccuracyMode::Overall;
  AccuracyMode gzsl_accuracy = AccuracyMode::PerClassMean;

  int qkv_dim() const { return head_dim > 0 ? head_dim : dim / heads; }
  int patch_side() const { return image_size / grid_side; }
  int patch_dim() const { return patch_side() * patch_side() * 3; }
  int num_patches() const { return grid_side * grid_side; }

  // Throws ValidationError on any broken invariant.
  void validate() const;

  bool operator==(const Config&) const = default;
};

// Desk-scale preset: L=2, D=32, s=4, k=4, 64x64 images.
void apply_tiny_preset(Config& config);

Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
std::string serialize_config(const Config& config);

}  // namespace dsva
