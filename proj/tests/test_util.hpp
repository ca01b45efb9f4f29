#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "neurocount/image.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("neurocount_" + tag + "_" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline neurocount::RgbSlide random_slide(int w, int h, std::mt19937_64& rng) {
  neurocount::RgbSlide s(w, h);
  std::uniform_int_distribution<int> v(0, 255);
  for (auto& p : s.data()) p = static_cast<std::uint8_t>(v(rng));
  return s;
}

inline neurocount::LabelMask random_labels(int w, int h, int max_label, double density, std::mt19937_64& rng) {
  neurocount::LabelMask m(w, h);
  std::uniform_int_distribution<int> v(1, max_label);
  std::bernoulli_distribution on(density);
  for (auto& p : m.data()) p = on(rng) ? static_cast<std::uint16_t>(v(rng)) : 0;
  return m;
}

}  // namespace testutil
