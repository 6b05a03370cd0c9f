#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tumorseg {

// On-disk sample types supported for NIfTI-1 volumes. Values are the codes
// from the format's datatype field.
enum class NiftiDtype : std::int16_t {
  u8 = 2,
  i16 = 4,
  i32 = 8,
  f32 = 16,
  f64 = 64,
  u16 = 512,
};

// A single-file NIfTI-1 volume ("n+1" magic), decoded to float. Voxels are
// stored x-fastest: data[x + nx*(y + ny*z)]. Reading handles plain .nii and
// gzip-compressed .nii.gz transparently, applies scl_slope/scl_inter when
// set, and byte-swaps opposite-endian files.
struct NiftiImage {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  NiftiDtype dtype = NiftiDtype::f32;
  float pixdim[3] = {1.0f, 1.0f, 1.0f};
  std::vector<float> data;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
};

NiftiImage nifti_read(const std::filesystem::path& path);

// Writes a 3D volume. Compression is chosen from the file extension
// (.gz suffix => gzip). Values are rounded when the dtype is integral.
void nifti_write(const std::filesystem::path& path, const NiftiImage& img);

}  // namespace tumorseg
