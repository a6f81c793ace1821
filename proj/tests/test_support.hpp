#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "rdest/rdest.hpp"

namespace rdest::testing {

inline std::filesystem::path data_dir() { return RDEST_TEST_DATA; }
inline std::filesystem::path image_dir() { return data_dir() / "images"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rdest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<ImageSource> natural_images() {
  std::vector<ImageSource> out;
  for (const auto& e : std::filesystem::directory_iterator(image_dir()))
    if (is_supported_image(e.path())) out.push_back({e.path().filename().string(), e.path()});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

// Patches of the given size cropped from the natural test images.
inline std::vector<Frame> natural_patches(std::uint32_t size, std::uint32_t stride = 0) {
  const auto r = ingest_and_crop(natural_images(), size, stride);
  std::vector<Frame> out;
  for (std::uint32_t i = 0; i < r.store.patches.size(); ++i) out.push_back(r.store.frame(i));
  return out;
}

inline Frame random_frame(std::size_t w, std::size_t h, std::uint64_t seed, int bitdepth = 8) {
  Frame f(w, h, bitdepth);
  Rng rng(seed);
  for (auto& s : f.samples) s = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(f.max_value()) + 1));
  return f;
}

// In-memory dataset over the given square patches, split and with ground truth.
inline Dataset make_dataset(const std::vector<Frame>& patches, const std::vector<int>& qps, SplitSpec spec = {}) {
  Dataset d;
  d.store.patch_size = static_cast<std::uint32_t>(patches.front().width);
  d.manifest.patch_size = d.manifest.stride = d.store.patch_size;
  d.manifest.qps = qps;
  for (std::uint32_t i = 0; i < patches.size(); ++i) {
    d.manifest.entries.push_back({i, "synthetic", 0, 0, SplitTag::Unassigned});
    d.store.patches.emplace_back(patches[i].samples.begin(), patches[i].samples.end());
  }
  split(d.manifest, spec);
  d.truth = generate_ground_truth(d.manifest, d.store, qps);
  return d;
}

// Every patch tagged with the same split.
inline Dataset make_dataset_all(const std::vector<Frame>& patches, const std::vector<int>& qps, SplitTag tag) {
  Dataset d;
  d.store.patch_size = static_cast<std::uint32_t>(patches.front().width);
  d.manifest.patch_size = d.manifest.stride = d.store.patch_size;
  d.manifest.qps = qps;
  for (std::uint32_t i = 0; i < patches.size(); ++i) {
    d.manifest.entries.push_back({i, "synthetic", 0, 0, tag});
    d.store.patches.emplace_back(patches[i].samples.begin(), patches[i].samples.end());
  }
  d.truth = generate_ground_truth(d.manifest, d.store, qps);
  return d;
}

inline void write_pgm(const std::filesystem::path& path, const Frame& f) { save_pgm(f, path); }

}  // namespace rdest::testing
