#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpd/tensor.hpp"

namespace cpd {

struct Sample {
  Tensor image;  ///< (1,3,H,W) in [0,1]
  Tensor mask;   ///< (1,1,H,W) in {0,1}
  std::string id;
};

enum class ShapeKind { kEllipse, kRectangle, kTriangle };

struct SceneConfig {
  std::size_t side = 64;
  std::size_t min_objects = 1;
  std::size_t max_objects = 2;
  std::vector<ShapeKind> shapes{ShapeKind::kEllipse, ShapeKind::kRectangle, ShapeKind::kTriangle};
  /// Minimum distance between mean foreground and mean background colour
  /// (Euclidean over RGB in [0,1]).
  double min_contrast = 0.25;
  double max_contrast = 1.0;
  std::size_t noise_octaves = 3;
  /// Amplitude of the value-noise texture added to both regions.
  double noise_amplitude = 0.25;
  bool allow_occlusion = true;
  double min_area = 0.02;
  double max_area = 0.60;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on bad ranges.
  void validate() const;
};

/// Raised when 100 attempts fail to meet the scene constraints.
class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic in (cfg.seed, index).
Sample synth_sample(const SceneConfig& cfg, std::uint64_t index);

// --- PPM / PGM ---------------------------------------------------------------

class ImageFormatError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadHeader, kShortData };
  ImageFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Binary P6, maxval 255, byte = round(v * 255) after clamping to [0,1].
void write_ppm(const std::filesystem::path& path, const Tensor& image);
/// (1,3,H,W) with v = byte / 255.
Tensor read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Tensor& map);
/// (1,1,H,W) with v = byte / 255.
Tensor read_pgm(const std::filesystem::path& path);

// --- manifests ---------------------------------------------------------------

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::size_t line = 0;
  std::function<Sample()> load;  ///< reads both files; masks thresholded at 0.5
};

/// Rows "image<TAB>mask", paths relative to the manifest's directory. Blank
/// lines are skipped. Missing files are reported with their line number.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

/// Loads every entry, resizing to `side` (0 keeps the native size). Masks
/// are re-thresholded after resizing.
std::vector<Sample> load_dataset(const std::filesystem::path& manifest, std::size_t side = 0);

/// Writes count samples as NNNNN.ppm / NNNNN.pgm plus manifest.tsv.
void write_dataset(const std::filesystem::path& dir, const SceneConfig& cfg, std::size_t count);

/// Bilinear resize of every channel to (h, w); no autodiff.
Tensor resize_bilinear(const Tensor& x, std::size_t h, std::size_t w);

}  // namespace cpd
