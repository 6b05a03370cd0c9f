#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace tumorseg {

enum class Modality { FLAIR, T1, T1CE, T2 };

const char* modality_suffix(Modality m);  // "flair", "t1", "t1ce", "t2"

// One case directory discovered on disk: <root>/<case_id>/<case_id>_<suffix>.nii(.gz)
// with suffix in {flair, t1, t1ce, t2, seg}.
struct CaseRef {
  std::string case_id;
  std::filesystem::path root_path;
  std::set<Modality> available_modalities;
  bool has_segmentation = false;

  bool has(Modality m) const { return available_modalities.count(m) != 0; }
};

// One modality's scalar grid. Intensities are raw scanner units (non-negative,
// up to 16-bit range). Voxel (y, x, z) maps to data[x + width*(y + height*z)].
struct Volume {
  int height = 0;
  int width = 0;
  int depth = 0;
  Modality modality = Modality::FLAIR;
  std::vector<float> data;

  float at(int y, int x, int z) const {
    return data[static_cast<std::size_t>(x) +
                static_cast<std::size_t>(width) * (y + static_cast<std::size_t>(height) * z)];
  }
  float& at(int y, int x, int z) {
    return data[static_cast<std::size_t>(x) +
                static_cast<std::size_t>(width) * (y + static_cast<std::size_t>(height) * z)];
  }
};

// Segmentation grid with values in {0, 1, 2, 4}.
struct LabelVolume {
  int height = 0;
  int width = 0;
  int depth = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int y, int x, int z) const {
    return data[static_cast<std::size_t>(x) +
                static_cast<std::size_t>(width) * (y + static_cast<std::size_t>(height) * z)];
  }
  std::uint8_t& at(int y, int x, int z) {
    return data[static_cast<std::size_t>(x) +
                static_cast<std::size_t>(width) * (y + static_cast<std::size_t>(height) * z)];
  }
};

// Scans root for case subdirectories holding at least one recognized modality
// file. Result is sorted by case_id so repeat runs see the same order.
std::vector<CaseRef> discover_cases(const std::filesystem::path& root);

// Builds a CaseRef for a single case directory (used by `predict`).
CaseRef case_from_dir(const std::filesystem::path& dir);

Volume load_modality(const CaseRef& c, Modality m);
LabelVolume load_segmentation(const CaseRef& c);

void write_volume(const std::filesystem::path& path, const Volume& v);
void write_label_volume(const std::filesystem::path& path, const LabelVolume& v);

// Writes a synthetic case (FLAIR + T1CE + segmentation) into out_dir, which
// becomes the case directory. The segmentation is a set of concentric
// ellipsoid shells (enhancing 4 core, necrotic 1 shell, edema 2 rim over
// background 0) so every class is present; modality intensities are
// label-correlated bands plus seeded noise. Deterministic for a fixed seed.
CaseRef generate_synthetic_case(std::uint64_t seed, const std::filesystem::path& out_dir,
                                int height, int width, int depth);

}  // namespace tumorseg
