#pragma once

// On-disk capture sets: a directory holding img_NN.pgm files plus
// capture.json with the lighting and alignment metadata.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "normpuf/core.hpp"
#include "normpuf/optics.hpp"

namespace normpuf {

inline std::string capture_image_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%02zu.pgm", k);
  return buf;
}

inline void save_capture(const std::filesystem::path& dir, const CaptureSet& cap) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::storage_failure, "cannot create capture directory " + dir.string());
  nlohmann::json j;
  j["version"] = 1;
  j["mode"] = std::string(to_string(cap.lights.mode));
  j["intensity"] = cap.lights.intensity;
  j["noise_sigma"] = cap.noise_sigma;
  j["max_shift"] = cap.max_shift;
  j["aligned"] = cap.aligned;
  j["alignment_ncc"] = cap.alignment_ncc;
  auto offsets = [](const std::vector<Offset>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& o : v) a.push_back({o.dx, o.dy});
    return a;
  };
  j["misalignment"] = offsets(cap.misalignment);
  j["recovered"] = offsets(cap.recovered);
  j["lights"] = nlohmann::json::array();
  j["images"] = nlohmann::json::array();
  for (std::size_t k = 0; k < cap.images.size(); ++k) {
    const auto& d = cap.lights.directions[k];
    j["lights"].push_back({d.x, d.y, d.z});
    j["images"].push_back(capture_image_name(k));
    save_pgm(dir / capture_image_name(k), cap.images[k]);
  }
  std::ofstream os(dir / "capture.json", std::ios::trunc);
  os << j.dump(2) << '\n';
  if (!os) throw Error(Errc::storage_failure, "cannot write capture.json");
}

inline CaptureSet load_capture(const std::filesystem::path& dir) {
  std::ifstream is(dir / "capture.json");
  if (!is) throw Error(Errc::storage_failure, "missing capture.json in " + dir.string());
  try {
    const auto j = nlohmann::json::parse(is);
    CaptureSet cap;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "scanner")
      cap.lights.mode = CaptureMode::scanner;
    else if (mode == "mobile")
      cap.lights.mode = CaptureMode::mobile;
    else
      throw Error(Errc::format_error, "unknown capture mode " + mode);
    cap.lights.intensity = j.at("intensity").get<double>();
    for (const auto& l : j.at("lights")) cap.lights.directions.push_back({l.at(0), l.at(1), l.at(2)});
    cap.noise_sigma = j.at("noise_sigma").get<double>();
    cap.max_shift = j.at("max_shift").get<int>();
    cap.aligned = j.at("aligned").get<bool>();
    cap.alignment_ncc = j.value("alignment_ncc", 1.0);
    for (const auto& o : j.at("misalignment")) cap.misalignment.push_back({o.at(0), o.at(1)});
    for (const auto& o : j.at("recovered")) cap.recovered.push_back({o.at(0), o.at(1)});
    for (const auto& name : j.at("images")) cap.images.push_back(load_pgm(dir / name.get<std::string>()));
    if (cap.images.size() != cap.lights.count()) throw Error(Errc::format_error, "image and light counts differ");
    return cap;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format_error, std::string("capture.json: ") + e.what());
  }
}

}  // namespace normpuf
