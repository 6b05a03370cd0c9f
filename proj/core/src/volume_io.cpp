#include "tumorseg/volume_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tumorseg/errors.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/rng.hpp"

namespace fs = std::filesystem;

namespace tumorseg {

namespace {

constexpr std::array<Modality, 4> kAllModalities = {Modality::FLAIR, Modality::T1,
                                                    Modality::T1CE, Modality::T2};

// Returns the existing volume file for a case/suffix, preferring .nii over
// .nii.gz when both are present. Empty path if neither exists.
fs::path find_suffix_file(const fs::path& dir, const std::string& case_id,
                          const std::string& suffix) {
  const fs::path plain = dir / (case_id + "_" + suffix + ".nii");
  if (fs::exists(plain)) return plain;
  const fs::path gz = dir / (case_id + "_" + suffix + ".nii.gz");
  if (fs::exists(gz)) return gz;
  return {};
}

CaseRef scan_case_dir(const fs::path& dir) {
  CaseRef c;
  c.case_id = dir.filename().string();
  c.root_path = dir;
  for (Modality m : kAllModalities) {
    if (!find_suffix_file(dir, c.case_id, modality_suffix(m)).empty()) {
      c.available_modalities.insert(m);
    }
  }
  c.has_segmentation = !find_suffix_file(dir, c.case_id, "seg").empty();
  return c;
}

Volume volume_from_nifti(const NiftiImage& img, Modality m) {
  Volume v;
  v.width = img.nx;
  v.height = img.ny;
  v.depth = img.nz;
  v.modality = m;
  v.data = img.data;
  return v;
}

}  // namespace

const char* modality_suffix(Modality m) {
  switch (m) {
    case Modality::FLAIR:
      return "flair";
    case Modality::T1:
      return "t1";
    case Modality::T1CE:
      return "t1ce";
    case Modality::T2:
      return "t2";
  }
  return "";
}

std::vector<CaseRef> discover_cases(const fs::path& root) {
  if (!fs::exists(root) || !fs::is_directory(root)) {
    throw MissingRootError(root.string());
  }
  std::vector<CaseRef> cases;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    CaseRef c = scan_case_dir(entry.path());
    // a case needs at least one modality file; a stray seg alone does not count
    if (!c.available_modalities.empty()) {
      cases.push_back(std::move(c));
    }
  }
  if (cases.empty()) throw EmptyDatasetError(root.string());
  std::sort(cases.begin(), cases.end(),
            [](const CaseRef& a, const CaseRef& b) { return a.case_id < b.case_id; });
  return cases;
}

CaseRef case_from_dir(const fs::path& dir) {
  if (!fs::exists(dir) || !fs::is_directory(dir)) {
    throw MissingRootError(dir.string());
  }
  CaseRef c = scan_case_dir(dir);
  if (c.available_modalities.empty() && !c.has_segmentation) {
    throw EmptyDatasetError(dir.string());
  }
  return c;
}

Volume load_modality(const CaseRef& c, Modality m) {
  const fs::path file = find_suffix_file(c.root_path, c.case_id, modality_suffix(m));
  if (file.empty()) throw ModalityMissingError(c.case_id, modality_suffix(m));
  NiftiImage img = nifti_read(file);
  for (float v : img.data) {
    if (v < 0.0f) {
      throw CorruptFileError("negative intensity in " + file.string());
    }
  }
  return volume_from_nifti(img, m);
}

LabelVolume load_segmentation(const CaseRef& c) {
  const fs::path file = find_suffix_file(c.root_path, c.case_id, "seg");
  if (file.empty()) throw SegmentationMissingError(c.case_id);
  NiftiImage img = nifti_read(file);
  LabelVolume lv;
  lv.width = img.nx;
  lv.height = img.ny;
  lv.depth = img.nz;
  lv.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const long long value = std::llround(img.data[i]);
    if (std::fabs(img.data[i] - static_cast<float>(value)) > 1e-4f ||
        (value != 0 && value != 1 && value != 2 && value != 4)) {
      throw InvalidLabelError(static_cast<int>(value));
    }
    lv.data[i] = static_cast<std::uint8_t>(value);
  }
  return lv;
}

void write_volume(const fs::path& path, const Volume& v) {
  NiftiImage img;
  img.nx = v.width;
  img.ny = v.height;
  img.nz = v.depth;
  img.dtype = NiftiDtype::u16;
  img.data = v.data;
  nifti_write(path, img);
}

void write_label_volume(const fs::path& path, const LabelVolume& v) {
  NiftiImage img;
  img.nx = v.width;
  img.ny = v.height;
  img.nz = v.depth;
  img.dtype = NiftiDtype::u8;
  img.data.assign(v.data.begin(), v.data.end());
  nifti_write(path, img);
}

CaseRef generate_synthetic_case(std::uint64_t seed, const fs::path& out_dir, int height,
                                int width, int depth) {
  if (height < 8 || width < 8 || depth < 8) {
    throw ConfigInvalidError("synthetic case dimensions must be >= 8");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create case directory: " + out_dir.string());
  }

  LabelVolume seg;
  seg.height = height;
  seg.width = width;
  seg.depth = depth;
  seg.data.assign(static_cast<std::size_t>(height) * width * depth, 0);

  const double cy = (height - 1) / 2.0;
  const double cx = (width - 1) / 2.0;
  const double cz = (depth - 1) / 2.0;
  // Ellipsoid semi-axes at 42.5% of each extent; shell boundaries at 1/3 and
  // 2/3 of the normalized radius keep all four labels present for dims >= 8.
  const double ay = 0.425 * height;
  const double ax = 0.425 * width;
  const double az = 0.425 * depth;
  for (int z = 0; z < depth; ++z) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double u = (y - cy) / ay;
        const double v = (x - cx) / ax;
        const double w = (z - cz) / az;
        const double r = std::sqrt(u * u + v * v + w * w);
        std::uint8_t label = 0;
        if (r < 1.0 / 3.0) {
          label = 4;  // enhancing core
        } else if (r < 2.0 / 3.0) {
          label = 1;  // necrotic / non-enhancing shell
        } else if (r < 1.0) {
          label = 2;  // edema rim
        }
        seg.at(y, x, z) = label;
      }
    }
  }

  // Label-indexed intensity bands (16-bit scale), separated well beyond the
  // noise amplitude so classes stay distinguishable after normalization.
  const auto band = [](Modality m, std::uint8_t label) -> double {
    if (m == Modality::FLAIR) {
      switch (label) {
        case 0: return 420.0;
        case 1: return 7200.0;
        case 2: return 15300.0;
        default: return 24100.0;  // label 4
      }
    }
    switch (label) {
      case 0: return 380.0;
      case 1: return 16400.0;
      case 2: return 6100.0;
      default: return 26500.0;  // label 4
    }
  };

  const std::string case_id = out_dir.filename().string();
  for (Modality m : {Modality::FLAIR, Modality::T1CE}) {
    Volume vol;
    vol.height = height;
    vol.width = width;
    vol.depth = depth;
    vol.modality = m;
    vol.data.resize(seg.data.size());
    Rng rng(Rng::mix(seed, m == Modality::FLAIR ? 1 : 2));
    for (std::size_t i = 0; i < seg.data.size(); ++i) {
      const double base = band(m, seg.data[i]);
      const double noisy = base + rng.uniform(-1200.0, 1200.0);
      vol.data[i] = static_cast<float>(
          std::llround(std::clamp(noisy, 0.0, 65535.0)));
    }
    write_volume(out_dir / (case_id + "_" + std::string(modality_suffix(m)) + ".nii.gz"),
                 vol);
  }
  write_label_volume(out_dir / (case_id + "_seg.nii.gz"), seg);
  return scan_case_dir(out_dir);
}

}  // namespace tumorseg
