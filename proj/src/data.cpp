#include "cpd/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace cpd {

void SceneConfig::validate() const {
  if (side < 8) throw std::invalid_argument("scene side must be at least 8");
  if (min_objects < 1) throw std::invalid_argument("scenes need at least one object");
  if (max_objects < min_objects) {
    throw std::invalid_argument("object range " + std::to_string(min_objects) + ".." + std::to_string(max_objects) +
                                " is empty");
  }
  if (shapes.empty()) throw std::invalid_argument("shape set is empty");
  if (!(min_contrast >= 0.0) || !(max_contrast >= min_contrast) || min_contrast > std::sqrt(3.0)) {
    throw std::invalid_argument("contrast range is invalid");
  }
  if (!(min_area > 0.0) || !(max_area >= min_area) || max_area > 1.0) {
    throw std::invalid_argument("area range is invalid");
  }
  if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("noise amplitude must be >= 0");
}

namespace {

// Distributions from <random> are implementation-defined; these keep the
// generator byte-stable across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

using Rgb = std::array<double, 3>;

double distance(const Rgb& a, const Rgb& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Sum of octaves of lattice noise with smoothstep interpolation, roughly
/// in [-1, 1].
std::vector<double> value_noise(std::size_t side, std::size_t octaves, Rng& rng) {
  std::vector<double> out(side * side, 0.0);
  double amp = 1.0, total = 0.0;
  for (std::size_t o = 0; o < octaves; ++o) {
    const std::size_t cells = std::size_t{4} << o;
    std::vector<double> lattice((cells + 1) * (cells + 1));
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    const double scale = static_cast<double>(cells) / static_cast<double>(side);
    for (std::size_t y = 0; y < side; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) * scale;
      const auto y0 = std::min(static_cast<std::size_t>(fy), cells - 1);
      double ty = fy - static_cast<double>(y0);
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (std::size_t x = 0; x < side; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) * scale;
        const auto x0 = std::min(static_cast<std::size_t>(fx), cells - 1);
        double tx = fx - static_cast<double>(x0);
        tx = tx * tx * (3.0 - 2.0 * tx);
        const double* r0 = &lattice[y0 * (cells + 1) + x0];
        const double* r1 = r0 + cells + 1;
        const double top = r0[0] + tx * (r0[1] - r0[0]);
        const double bot = r1[0] + tx * (r1[1] - r1[0]);
        out[y * side + x] += amp * (top + ty * (bot - top));
      }
    }
    total += amp;
    amp *= 0.5;
  }
  if (total > 0.0)
    for (double& v : out) v /= total;
  return out;
}

struct Shape2d {
  ShapeKind kind;
  double cx, cy;
  double a, b;     // half extents (ellipse radii, rectangle half sides)
  double angle;
  std::array<double, 6> tri;  // vertices for triangles

  bool contains(double x, double y) const {
    if (kind == ShapeKind::kTriangle) {
      auto edge = [&](int i, int j) {
        return (tri[2 * j] - tri[2 * i]) * (y - tri[2 * i + 1]) - (tri[2 * j + 1] - tri[2 * i + 1]) * (x - tri[2 * i]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (x - cx) * c + (y - cy) * s;
    const double v = -(x - cx) * s + (y - cy) * c;
    if (kind == ShapeKind::kEllipse) return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    return std::abs(u) <= a && std::abs(v) <= b;
  }
};

Shape2d random_shape(const SceneConfig& cfg, Rng& rng) {
  const double side = static_cast<double>(cfg.side);
  Shape2d s{};
  s.kind = cfg.shapes[rng.below(cfg.shapes.size())];
  s.cx = rng.uniform(0.2, 0.8) * side;
  s.cy = rng.uniform(0.2, 0.8) * side;
  s.a = rng.uniform(0.08, 0.35) * side;
  s.b = rng.uniform(0.08, 0.35) * side;
  s.angle = rng.uniform(0.0, std::numbers::pi);
  if (s.kind == ShapeKind::kTriangle) {
    const double r = std::max(s.a, s.b) * 1.2;
    const double base = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < 3; ++i) {
      const double t = base + 2.0 * std::numbers::pi * i / 3.0 + rng.uniform(-0.4, 0.4);
      s.tri[2 * i] = s.cx + r * std::cos(t);
      s.tri[2 * i + 1] = s.cy + r * std::sin(t);
    }
  }
  return s;
}

Rgb random_colour(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

}  // namespace

Sample synth_sample(const SceneConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng(cfg.seed, index);
  const std::size_t side = cfg.side;
  const std::size_t plane = side * side;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Rgb bg = random_colour(rng);
    const std::size_t count = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);

    std::vector<int> owner(plane, -1);  // index of the topmost object per pixel
    std::vector<Rgb> colours;
    bool ok = true;
    for (std::size_t k = 0; k < count && ok; ++k) {
      Rgb fg{};
      bool found = false;
      for (int tries = 0; tries < 100 && !found; ++tries) {
        fg = random_colour(rng);
        const double d = distance(fg, bg);
        found = d >= cfg.min_contrast && d <= cfg.max_contrast;
      }
      if (!found) {
        ok = false;
        break;
      }
      const Shape2d shape = random_shape(cfg, rng);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          if (!shape.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
          int& o = owner[y * side + x];
          if (o >= 0 && !cfg.allow_occlusion) ok = false;
          o = static_cast<int>(k);
        }
      }
      colours.push_back(fg);
    }
    if (!ok) continue;

    std::size_t area = 0;
    for (int o : owner) area += o >= 0;
    const double frac = static_cast<double>(area) / static_cast<double>(plane);
    if (frac < cfg.min_area || frac > cfg.max_area) continue;

    const std::vector<double> bg_noise = value_noise(side, cfg.noise_octaves, rng);
    const std::vector<double> fg_noise = value_noise(side, cfg.noise_octaves, rng);
    Sample s{Tensor(Shape{1, 3, side, side}), Tensor(Shape{1, 1, side, side}), std::to_string(index)};
    Rgb fg_mean{}, bg_mean{};
    for (std::size_t i = 0; i < plane; ++i) {
      const bool fg = owner[i] >= 0;
      const Rgb& base = fg ? colours[static_cast<std::size_t>(owner[i])] : bg;
      const double n = cfg.noise_amplitude * (fg ? fg_noise[i] : bg_noise[i]);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(base[c] + n, 0.0, 1.0);
        s.image.ptr()[c * plane + i] = static_cast<float>(v);
        (fg ? fg_mean : bg_mean)[c] += v;
      }
      s.mask.ptr()[i] = fg ? 1.0f : 0.0f;
    }
    for (std::size_t c = 0; c < 3; ++c) {
      fg_mean[c] /= static_cast<double>(area);
      bg_mean[c] /= static_cast<double>(plane - area);
    }
    if (distance(fg_mean, bg_mean) < cfg.min_contrast) continue;
    return s;
  }
  throw SynthError("could not satisfy scene constraints for sample " + std::to_string(index) +
                   " after 100 attempts");
}

// --- PPM / PGM ---------------------------------------------------------------

namespace {

using Kind = ImageFormatError::Kind;

void write_netpbm(const std::filesystem::path& path, const Tensor& t, std::size_t channels, const char* magic) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != channels) {
    throw ShapeError(std::string("expected shape (1,") + std::to_string(channels) + ",H,W), got " + s.str());
  }
  const std::size_t plane = s.plane();
  std::string bytes = std::string(magic) + "\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + plane * channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = std::clamp(static_cast<double>(t.ptr()[c * plane + i]), 0.0, 1.0);
      bytes[header + i * channels + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageFormatError(Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageFormatError(Kind::kIo, "failed writing " + path.string());
}

Tensor read_netpbm(const std::filesystem::path& path, std::size_t channels, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageFormatError(Kind::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw ImageFormatError(Kind::kBadMagic, where + "expected magic " + magic);
  }
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    const std::size_t before = pos;
    skip_space();
    if (pos == before) throw ImageFormatError(Kind::kBadHeader, where + "missing whitespace before " + what);
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (++digits > 9) throw ImageFormatError(Kind::kBadHeader, where + std::string(what) + " is too large");
    }
    if (digits == 0) throw ImageFormatError(Kind::kBadHeader, where + "malformed " + what);
    return v;
  };
  const std::size_t w = number("width");
  const std::size_t h = number("height");
  const std::size_t maxval = number("maxval");
  if (w == 0 || h == 0) throw ImageFormatError(Kind::kBadHeader, where + "zero image size");
  if (maxval != 255) throw ImageFormatError(Kind::kBadHeader, where + "maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ImageFormatError(Kind::kBadHeader, where + "missing whitespace after maxval");
  }
  ++pos;
  const std::size_t plane = w * h;
  if (bytes.size() - pos < plane * channels) {
    throw ImageFormatError(Kind::kShortData, where + "expected " + std::to_string(plane * channels) +
                                                 " data bytes, found " + std::to_string(bytes.size() - pos));
  }
  Tensor t(Shape{1, channels, h, w});
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      t.ptr()[c * plane + i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i * channels + c])) / 255.0f;
  return t;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_netpbm(path, image, 3, "P6"); }
Tensor read_ppm(const std::filesystem::path& path) { return read_netpbm(path, 3, "P6"); }
void write_pgm(const std::filesystem::path& path, const Tensor& map) { write_netpbm(path, map, 1, "P5"); }
Tensor read_pgm(const std::filesystem::path& path) { return read_netpbm(path, 1, "P5"); }

// --- manifests ---------------------------------------------------------------

namespace {

void threshold(Tensor& mask) {
  for (float& v : mask.data()) v = v >= 0.5f ? 1.0f : 0.0f;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const std::filesystem::path dir = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    const std::string where = path.string() + ":" + std::to_string(number) + ": ";
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ManifestError(where + "expected 2 tab-separated fields, got " + std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.image = dir / fields[0];
    e.mask = dir / fields[1];
    e.line = number;
    for (const auto& p : {e.image, e.mask}) {
      if (!std::filesystem::exists(p)) throw ManifestError(where + "missing file " + p.string());
    }
    e.load = [image = e.image, mask = e.mask, id = std::filesystem::path(fields[0]).stem().string()] {
      Sample s{read_ppm(image), read_pgm(mask), id};
      threshold(s.mask);
      if (s.image.shape().h != s.mask.shape().h || s.image.shape().w != s.mask.shape().w) {
        throw ShapeError(image.string() + " and " + mask.string() + " differ in size");
      }
      return s;
    };
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest, std::size_t side) {
  std::vector<Sample> out;
  for (const auto& e : load_manifest(manifest)) {
    Sample s = e.load();
    if (side != 0 && (s.image.shape().h != side || s.image.shape().w != side)) {
      s.image = resize_bilinear(s.image, side, side);
      s.mask = resize_bilinear(s.mask, side, side);
      threshold(s.mask);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SceneConfig& cfg, std::size_t count) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw ImageFormatError(Kind::kIo, "cannot write " + (dir / "manifest.tsv").string());
  for (std::size_t i = 0; i < count; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%05zu", i);
    const Sample s = synth_sample(cfg, i);
    write_ppm(dir / (std::string(stem) + ".ppm"), s.image);
    write_pgm(dir / (std::string(stem) + ".pgm"), s.mask);
    manifest << stem << ".ppm\t" << stem << ".pgm\n";
  }
  if (!manifest) throw ImageFormatError(Kind::kIo, "failed writing manifest in " + dir.string());
}

Tensor resize_bilinear(const Tensor& x, std::size_t h, std::size_t w) {
  const Shape& s = x.shape();
  if (h == 0 || w == 0) throw ShapeError("resize_bilinear: zero target size");
  struct Tap {
    std::size_t i0, i1;
    float t;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      const double src = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(src);
      v[d] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - static_cast<double>(i0))};
    }
    return v;
  };
  const auto ty = taps(s.h, h);
  const auto tx = taps(s.w, w);
  Tensor out(Shape{s.n, s.c, h, w});
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const float* src = x.ptr() + p * s.plane();
    float* dst = out.ptr() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      const float* r0 = src + ty[y].i0 * s.w;
      const float* r1 = src + ty[y].i1 * s.w;
      for (std::size_t xx = 0; xx < w; ++xx) {
        const float a = r0[tx[xx].i0] + tx[xx].t * (r0[tx[xx].i1] - r0[tx[xx].i0]);
        const float b = r1[tx[xx].i0] + tx[xx].t * (r1[tx[xx].i1] - r1[tx[xx].i0]);
        dst[y * w + xx] = a + ty[y].t * (b - a);
      }
    }
  }
  return out;
}

}  // namespace cpd
