#pragma once

// Simulated image acquisition: Lambertian rendering of a surface patch under a
// set of point-light directions, sensor noise, 16-bit quantization, and the
// per-image translation a hand-held capture introduces. `align` is the
// preprocessing step that undoes that translation.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "normpuf/core.hpp"
#include "normpuf/surfacegen.hpp"

namespace normpuf {

enum class CaptureMode { scanner, mobile };

inline constexpr std::string_view to_string(CaptureMode m) noexcept {
  return m == CaptureMode::scanner ? "scanner" : "mobile";
}

/// Default irradiance scale: a flat patch of mean albedo lit at 45° lands
/// near half of the 16-bit range.
inline constexpr double kDefaultIntensity = 58982.0;
inline constexpr double kLightElevationDeg = 45.0;

inline Vec3 light_from_angles(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

struct LightConfig {
  std::vector<Vec3> directions;
  double intensity = kDefaultIntensity;
  CaptureMode mode = CaptureMode::scanner;

  /// Four scans rotated by 0°, 90°, 180°, 270° under a fixed 45° lamp.
  static LightConfig scanner(double intensity = kDefaultIntensity) {
    LightConfig c;
    c.intensity = intensity;
    c.mode = CaptureMode::scanner;
    for (int k = 0; k < 4; ++k) c.directions.push_back(light_from_angles(90.0 * k, kLightElevationDeg));
    return c;
  }

  /// k flash positions; k ≥ 5 puts one light at the zenith and spreads the
  /// rest uniformly in azimuth on the 45° cone.
  static LightConfig mobile(int k, double intensity = kDefaultIntensity) {
    if (k < 3) throw Error(Errc::invalid_param, "mobile capture needs at least 3 lights");
    LightConfig c;
    c.intensity = intensity;
    c.mode = CaptureMode::mobile;
    const int cone = k >= 5 ? k - 1 : k;
    for (int i = 0; i < cone; ++i) c.directions.push_back(light_from_angles(360.0 * i / cone, kLightElevationDeg));
    if (k >= 5) c.directions.push_back({0.0, 0.0, 1.0});
    return c;
  }

  std::size_t count() const noexcept { return directions.size(); }

  void validate() const {
    if (directions.size() < 3) throw Error(Errc::invalid_param, "need at least 3 light directions");
    if (!(intensity > 0.0)) throw Error(Errc::invalid_param, "light intensity must be positive");
    for (const auto& d : directions) {
      if (std::abs(d.norm() - 1.0) > 1e-9 || !(d.z > 0.0))
        throw Error(Errc::invalid_param, "light direction must be unit length with positive z");
    }
    if (mode == CaptureMode::scanner) {
      if (directions.size() != 4) throw Error(Errc::invalid_param, "scanner mode uses exactly 4 directions");
      for (std::size_t k = 0; k < 4; ++k) {
        const auto expect = light_from_angles(90.0 * static_cast<double>(k), std::asin(directions[0].z) * 180.0 / std::numbers::pi);
        if ((directions[k] - expect).norm() > 1e-9)
          throw Error(Errc::invalid_param, "scanner directions must sit at azimuths 0/90/180/270 with one elevation");
      }
    }
  }
};

/// Optional Phong-style lobe w·I·max(0, r·v)^p, viewer at the zenith.
struct SpecularModel {
  double weight = 0.0;
  double exponent = 20.0;
};

struct RenderOptions {
  double noise_sigma = 0.0;
  /// Largest per-image translation in mobile mode, pixels. Ignored for scanners.
  int max_shift = 4;
  bool quantize = true;
  SpecularModel specular{};
};

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  friend bool operator==(const Image&, const Image&) = default;
};

struct CaptureSet {
  std::vector<Image> images;
  LightConfig lights;
  /// Translation applied to each image at capture time (image 0 is the
  /// reference frame and is never moved).
  std::vector<Offset> misalignment;
  /// Correction applied by `align`, per image.
  std::vector<Offset> recovered;
  /// Lowest best-offset NCC seen by `align`; 1 when nothing was aligned.
  double alignment_ncc = 1.0;
  double noise_sigma = 0.0;
  int max_shift = 0;
  bool aligned = true;

  int width() const { return images.empty() ? 0 : images.front().width; }
  int height() const { return images.empty() ? 0 : images.front().height; }
};

/// Circular translation: out(c, r) = in(c - dx, r - dy).
inline Image translate(const Image& in, Offset off) {
  if (off.dx == 0 && off.dy == 0) return in;
  Image out{in.width, in.height, std::vector<double>(in.pixels.size())};
  const int w = in.width, h = in.height;
  for (int r = 0; r < h; ++r) {
    const int sr = (((r - off.dy) % h) + h) % h;
    for (int c = 0; c < w; ++c) {
      const int sc = (((c - off.dx) % w) + w) % w;
      out.pixels[static_cast<std::size_t>(r) * w + c] = in.pixels[static_cast<std::size_t>(sr) * w + sc];
    }
  }
  return out;
}

inline double shade(const Vec3& n, const Vec3& l, double albedo, double intensity, const SpecularModel& spec) {
  const double ndotl = n.dot(l);
  double v = intensity * albedo * std::max(0.0, ndotl);
  if (spec.weight > 0.0 && ndotl > 0.0) {
    // reflection of l about n; viewer along +z
    const double rz = 2.0 * ndotl * n.z - l.z;
    v += spec.weight * intensity * std::pow(std::max(0.0, rz), spec.exponent);
  }
  return v;
}

inline CaptureSet render(const SurfacePatch& patch, const LightConfig& lights, const RenderOptions& opt,
                         std::uint64_t seed) {
  lights.validate();
  if (!(opt.noise_sigma >= 0.0)) throw Error(Errc::invalid_param, "noise_sigma must be non-negative");
  if (opt.max_shift < 0) throw Error(Errc::invalid_param, "max_shift must be non-negative");
  const int w = patch.width(), h = patch.height();
  const bool mobile = lights.mode == CaptureMode::mobile;
  const int max_shift = mobile ? opt.max_shift : 0;
  if (2 * max_shift >= std::min(w, h)) throw Error(Errc::invalid_param, "max_shift too large for patch");

  CaptureSet cap;
  cap.lights = lights;
  cap.noise_sigma = opt.noise_sigma;
  cap.max_shift = max_shift;

  for (std::size_t k = 0; k < lights.count(); ++k) {
    Rng rng(derive_seed(seed, {0x52454e444552ULL, k}));
    Image img{w, h, std::vector<double>(patch.size())};
    const Vec3& l = lights.directions[k];
    for (std::size_t i = 0; i < patch.size(); ++i)
      img.pixels[i] = shade(patch.normals()[i], l, patch.albedo()[i], lights.intensity, opt.specular);

    Offset off{};
    if (max_shift > 0 && k > 0) {
      std::uniform_int_distribution<int> shift(-max_shift, max_shift);
      off.dx = shift(rng);
      off.dy = shift(rng);
      img = translate(img, off);
    }
    cap.misalignment.push_back(off);

    if (opt.noise_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, opt.noise_sigma);
      for (auto& p : img.pixels) p += noise(rng);
    }
    if (opt.quantize) {
      for (auto& p : img.pixels) p = std::clamp(std::round(p), 0.0, kFullScale);
    }
    cap.images.push_back(std::move(img));
  }
  cap.recovered.assign(lights.count(), Offset{});
  cap.aligned = max_shift == 0;
  return cap;
}

// ---------------------------------------------------------------------------
// Alignment

inline constexpr double kMinAlignmentNcc = 0.2;

namespace detail {

struct Centered {
  std::vector<double> values;
  double norm = 0.0;
};

inline Centered center(const Image& img) {
  Centered c{img.pixels, 0.0};
  double mean = 0.0;
  for (double v : c.values) mean += v;
  mean /= static_cast<double>(c.values.size());
  for (auto& v : c.values) {
    v -= mean;
    c.norm += v * v;
  }
  c.norm = std::sqrt(c.norm);
  return c;
}

/// NCC between `ref` and `mov` translated by `off` (circular).
inline double ncc_at(const Centered& ref, const Centered& mov, int w, int h, Offset off) {
  double s = 0.0;
  for (int r = 0; r < h; ++r) {
    const int sr = (((r - off.dy) % h) + h) % h;
    const double* mrow = mov.values.data() + static_cast<std::size_t>(sr) * w;
    const double* rrow = ref.values.data() + static_cast<std::size_t>(r) * w;
    for (int c = 0; c < w; ++c) {
      const int sc = (((c - off.dx) % w) + w) % w;
      s += rrow[c] * mrow[sc];
    }
  }
  return s / (ref.norm * mov.norm);
}

}  // namespace detail

/// Registers every image onto image 0 by exhaustive integer-offset search
/// within ±max_shift, maximizing normalized cross-correlation. Images with no
/// texture (zero variance) cannot be registered and are left in place.
inline CaptureSet align(const CaptureSet& capture, std::optional<int> max_shift_override = std::nullopt) {
  CaptureSet out = capture;
  const int shift = max_shift_override.value_or(capture.max_shift);
  out.recovered.assign(capture.images.size(), Offset{});
  out.alignment_ncc = 1.0;
  if (capture.images.empty() || shift == 0) {
    out.aligned = true;
    return out;
  }
  const int w = capture.width(), h = capture.height();
  const auto ref = detail::center(capture.images[0]);
  for (std::size_t k = 1; k < capture.images.size(); ++k) {
    const auto mov = detail::center(capture.images[k]);
    if (ref.norm == 0.0 || mov.norm == 0.0) continue;
    Offset best{};
    double best_ncc = -2.0;
    for (int dy = -shift; dy <= shift; ++dy)
      for (int dx = -shift; dx <= shift; ++dx) {
        const double v = detail::ncc_at(ref, mov, w, h, {dx, dy});
        if (v > best_ncc) {
          best_ncc = v;
          best = {dx, dy};
        }
      }
    out.alignment_ncc = std::min(out.alignment_ncc, best_ncc);
    if (best_ncc < kMinAlignmentNcc)
      throw Error(Errc::alignment_failed, "image " + std::to_string(k) + " best NCC " + std::to_string(best_ncc) +
                                              " below " + std::to_string(kMinAlignmentNcc));
    out.recovered[k] = best;
    out.images[k] = translate(capture.images[k], best);
  }
  out.aligned = true;
  return out;
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 65535, big-endian samples)

inline void write_pgm(std::ostream& os, const Image& img) {
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (double p : img.pixels) {
    const auto v = static_cast<std::uint16_t>(std::clamp(std::round(p), 0.0, kFullScale));
    const unsigned char b[2] = {static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!os) throw Error(Errc::storage_failure, "write_pgm failed");
}

inline Image read_pgm(std::istream& is) {
  auto token = [&]() {
    std::string t;
    char ch;
    while (is.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(is, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(ch);
    }
    return t;
  };
  if (token() != "P5") throw Error(Errc::format_error, "not a binary PGM");
  Image img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 65535) throw Error(Errc::format_error, "PGM maxval must be 65535");
  } catch (const std::logic_error&) {
    throw Error(Errc::format_error, "malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0) throw Error(Errc::format_error, "bad PGM dimensions");
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& p : img.pixels) {
    unsigned char b[2];
    io::read_exact(is, b, 2);
    p = static_cast<double>((b[0] << 8) | b[1]);
  }
  return img;
}

inline void save_pgm(const std::filesystem::path& p, const Image& img) {
  auto os = io::open_out(p);
  write_pgm(os, img);
}

inline Image load_pgm(const std::filesystem::path& p) {
  auto is = io::open_in(p);
  return read_pgm(is);
}

}  // namespace normpuf
