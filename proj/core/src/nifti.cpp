#include "tumorseg/nifti.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

// nifti-1 header, 348 bytes. Field offsets follow the published layout; the
// struct is naturally packed on every platform we target.
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
static_assert(sizeof(Nifti1Header) == 348, "nifti-1 header must be 348 bytes");

class GzFile {
 public:
  GzFile(const std::filesystem::path& path, const char* mode) {
    f_ = gzopen(path.string().c_str(), mode);
  }
  ~GzFile() {
    if (f_) gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  bool ok() const { return f_ != nullptr; }

  bool read_exact(void* buf, std::size_t n) {
    return gzread(f_, buf, static_cast<unsigned>(n)) == static_cast<int>(n);
  }
  bool write_exact(const void* buf, std::size_t n) {
    return gzwrite(f_, buf, static_cast<unsigned>(n)) == static_cast<int>(n);
  }
  bool skip(std::size_t n) {
    std::array<char, 4096> scratch;
    while (n > 0) {
      const std::size_t chunk = std::min(n, scratch.size());
      if (!read_exact(scratch.data(), chunk)) return false;
      n -= chunk;
    }
    return true;
  }

 private:
  gzFile f_ = nullptr;
};

template <typename T>
void swap_bytes(T& value) {
  auto* p = reinterpret_cast<unsigned char*>(&value);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
}

int dtype_size(NiftiDtype t) {
  switch (t) {
    case NiftiDtype::u8:
      return 1;
    case NiftiDtype::i16:
    case NiftiDtype::u16:
      return 2;
    case NiftiDtype::i32:
    case NiftiDtype::f32:
      return 4;
    case NiftiDtype::f64:
      return 8;
  }
  return 0;
}

template <typename T>
void decode(const std::vector<char>& raw, bool swapped, std::vector<float>& out) {
  const std::size_t n = raw.size() / sizeof(T);
  out.resize(n);
  const T* src = reinterpret_cast<const T*>(raw.data());
  for (std::size_t i = 0; i < n; ++i) {
    T v = src[i];
    if (swapped && sizeof(T) > 1) swap_bytes(v);
    out[i] = static_cast<float>(v);
  }
}

template <typename T>
void encode(const std::vector<float>& data, std::vector<char>& raw, bool integral) {
  raw.resize(data.size() * sizeof(T));
  T* dst = reinterpret_cast<T*>(raw.data());
  for (std::size_t i = 0; i < data.size(); ++i) {
    dst[i] = integral ? static_cast<T>(std::llround(data[i])) : static_cast<T>(data[i]);
  }
}

}  // namespace

NiftiImage nifti_read(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("volume file not found: " + path.string());
  }
  GzFile f(path, "rb");
  if (!f.ok()) throw IoError("cannot open volume file: " + path.string());

  Nifti1Header h{};
  if (!f.read_exact(&h, sizeof(h))) {
    throw CorruptFileError("truncated header: " + path.string());
  }
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    std::int32_t sw = h.sizeof_hdr;
    swap_bytes(sw);
    if (sw != 348) throw CorruptFileError("not a NIfTI-1 file: " + path.string());
    swapped = true;
    swap_header(h);
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0) {
    throw CorruptFileError("unsupported NIfTI magic (need single-file n+1): " +
                           path.string());
  }
  if (h.dim[0] < 3 || h.dim[0] > 7) {
    throw CorruptFileError("expected a 3D volume: " + path.string());
  }
  for (int d = 4; d <= h.dim[0]; ++d) {
    if (h.dim[d] > 1) {
      throw CorruptFileError("volume has more than 3 non-trivial dimensions: " +
                             path.string());
    }
  }
  NiftiImage img;
  img.nx = h.dim[1];
  img.ny = h.dim[2];
  img.nz = h.dim[3];
  if (img.nx < 1 || img.ny < 1 || img.nz < 1) {
    throw CorruptFileError("non-positive volume dimensions: " + path.string());
  }
  for (int i = 0; i < 3; ++i) img.pixdim[i] = h.pixdim[i + 1];

  switch (h.datatype) {
    case static_cast<std::int16_t>(NiftiDtype::u8):
    case static_cast<std::int16_t>(NiftiDtype::i16):
    case static_cast<std::int16_t>(NiftiDtype::i32):
    case static_cast<std::int16_t>(NiftiDtype::f32):
    case static_cast<std::int16_t>(NiftiDtype::f64):
    case static_cast<std::int16_t>(NiftiDtype::u16):
      img.dtype = static_cast<NiftiDtype>(h.datatype);
      break;
    default:
      throw CorruptFileError("unsupported NIfTI datatype code " +
                             std::to_string(h.datatype) + ": " + path.string());
  }

  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  if (offset < sizeof(h)) {
    throw CorruptFileError("invalid vox_offset: " + path.string());
  }
  if (!f.skip(offset - sizeof(h))) {
    throw CorruptFileError("truncated file before voxel data: " + path.string());
  }

  const std::size_t nbytes = img.voxel_count() * dtype_size(img.dtype);
  std::vector<char> raw(nbytes);
  if (!f.read_exact(raw.data(), nbytes)) {
    throw CorruptFileError("truncated voxel data: " + path.string());
  }

  switch (img.dtype) {
    case NiftiDtype::u8:
      decode<std::uint8_t>(raw, swapped, img.data);
      break;
    case NiftiDtype::i16:
      decode<std::int16_t>(raw, swapped, img.data);
      break;
    case NiftiDtype::u16:
      decode<std::uint16_t>(raw, swapped, img.data);
      break;
    case NiftiDtype::i32:
      decode<std::int32_t>(raw, swapped, img.data);
      break;
    case NiftiDtype::f32:
      decode<float>(raw, swapped, img.data);
      break;
    case NiftiDtype::f64:
      decode<double>(raw, swapped, img.data);
      break;
  }

  // scl_slope == 0 means "no scaling" per the format.
  if (h.scl_slope != 0.0f && (h.scl_slope != 1.0f || h.scl_inter != 0.0f)) {
    for (auto& v : img.data) v = v * h.scl_slope + h.scl_inter;
  }
  return img;
}

void nifti_write(const std::filesystem::path& path, const NiftiImage& img) {
  if (img.data.size() != img.voxel_count()) {
    throw ShapeMismatchError("NIfTI data size does not match dimensions");
  }
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(img.nx);
  h.dim[2] = static_cast<std::int16_t>(img.ny);
  h.dim[3] = static_cast<std::int16_t>(img.nz);
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = static_cast<std::int16_t>(img.dtype);
  h.bitpix = static_cast<std::int16_t>(8 * dtype_size(img.dtype));
  h.pixdim[0] = 1.0f;
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = img.pixdim[i];
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  std::strncpy(h.descrip, "tumorseg", sizeof(h.descrip) - 1);
  std::memcpy(h.magic, "n+1", 4);

  std::vector<char> raw;
  switch (img.dtype) {
    case NiftiDtype::u8:
      encode<std::uint8_t>(img.data, raw, true);
      break;
    case NiftiDtype::i16:
      encode<std::int16_t>(img.data, raw, true);
      break;
    case NiftiDtype::u16:
      encode<std::uint16_t>(img.data, raw, true);
      break;
    case NiftiDtype::i32:
      encode<std::int32_t>(img.data, raw, true);
      break;
    case NiftiDtype::f32:
      encode<float>(img.data, raw, false);
      break;
    case NiftiDtype::f64:
      encode<double>(img.data, raw, false);
      break;
  }

  const bool gz = path.extension() == ".gz";
  // "T" stores the stream without gzip framing, i.e. a plain file.
  GzFile f(path, gz ? "wb6" : "wbT");
  if (!f.ok()) throw IoError("cannot open for writing: " + path.string());

  const char extension_flag[4] = {0, 0, 0, 0};
  if (!f.write_exact(&h, sizeof(h)) || !f.write_exact(extension_flag, 4) ||
      !f.write_exact(raw.data(), raw.size())) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace tumorseg
