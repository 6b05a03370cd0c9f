#include "tumorseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

// Corner-aligned source coordinate for output index i; singleton outputs
// sample the center.
inline double src_coord(int i, int out_n, int in_n) {
  if (out_n == 1) return (in_n - 1) * 0.5;
  return static_cast<double>(i) * (in_n - 1) / (out_n - 1);
}

void check_resize_target(int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw InvalidTargetError("resize target must be at least 1x1, got " +
                             std::to_string(out_h) + "x" + std::to_string(out_w));
  }
}

}  // namespace

void validate_window(const SliceWindow& w, int depth) {
  if (w.start < 0 || w.length < 1 || w.start + w.length > depth) {
    throw WindowOutOfBoundsError(w.start, w.length, depth);
  }
}

Tensor slice_at(const Volume& vol, int z) {
  Tensor s({vol.height, vol.width});
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      s(y, x) = vol.at(y, x, z);
    }
  }
  return s;
}

LabelImage slice_at(const LabelVolume& vol, int z) {
  LabelImage s;
  s.height = vol.height;
  s.width = vol.width;
  s.v.resize(static_cast<std::size_t>(vol.height) * vol.width);
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      s.at(y, x) = vol.at(y, x, z);
    }
  }
  return s;
}

std::vector<Tensor> extract_slices(const Volume& vol, const SliceWindow& w) {
  validate_window(w, vol.depth);
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(w.length));
  for (int z = w.start; z < w.start + w.length; ++z) out.push_back(slice_at(vol, z));
  return out;
}

std::vector<LabelImage> extract_slices(const LabelVolume& vol, const SliceWindow& w) {
  validate_window(w, vol.depth);
  std::vector<LabelImage> out;
  out.reserve(static_cast<std::size_t>(w.length));
  for (int z = w.start; z < w.start + w.length; ++z) out.push_back(slice_at(vol, z));
  return out;
}

Tensor resize_slice(const Tensor& slice, int out_h, int out_w) {
  if (slice.rank() != 2 || slice.size() == 0) {
    throw ShapeMismatchError("resize expects a non-empty 2D slice");
  }
  check_resize_target(out_h, out_w);
  const int in_h = slice.dim(0);
  const int in_w = slice.dim(1);
  Tensor out({out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = src_coord(oy, out_h, in_h);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = src_coord(ox, out_w, in_w);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      out(oy, ox) = (1 - fy) * ((1 - fx) * slice(y0, x0) + fx * slice(y0, x1)) +
                    fy * ((1 - fx) * slice(y1, x0) + fx * slice(y1, x1));
    }
  }
  return out;
}

LabelImage resize_slice(const LabelImage& slice, int out_h, int out_w) {
  if (slice.height < 1 || slice.width < 1) {
    throw ShapeMismatchError("resize expects a non-empty label slice");
  }
  check_resize_target(out_h, out_w);
  LabelImage out;
  out.height = out_h;
  out.width = out_w;
  out.v.resize(static_cast<std::size_t>(out_h) * out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const int sy = std::clamp(
        static_cast<int>(std::lround(src_coord(oy, out_h, slice.height))), 0,
        slice.height - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const int sx = std::clamp(
          static_cast<int>(std::lround(src_coord(ox, out_w, slice.width))), 0,
          slice.width - 1);
      out.at(oy, ox) = slice.at(sy, sx);
    }
  }
  return out;
}

Tensor normalize_minmax(const Tensor& slice) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < slice.size(); ++i) {
    lo = std::min(lo, slice[i]);
    hi = std::max(hi, slice[i]);
  }
  Tensor out(slice.shape());
  if (hi == lo) return out;  // constant slice: all zeros
  const double scale = 1.0 / (hi - lo);
  for (std::int64_t i = 0; i < slice.size(); ++i) out[i] = (slice[i] - lo) * scale;
  return out;
}

LabelImage remap_labels(const LabelImage& labels) {
  LabelImage out = labels;
  for (auto& v : out.v) {
    if (v == 4) {
      v = 3;
    } else if (v > 2) {
      throw InvalidLabelError(v);
    }
  }
  return out;
}

LabelImage remap_labels_inverse(const LabelImage& classes) {
  LabelImage out = classes;
  for (auto& v : out.v) {
    if (v > 3) throw ClassOutOfRangeError(v, 4);
    if (v == 3) v = 4;
  }
  return out;
}

Tensor one_hot(const LabelImage& classes, int num_classes) {
  Tensor out({classes.height, classes.width, num_classes});
  for (int y = 0; y < classes.height; ++y) {
    for (int x = 0; x < classes.width; ++x) {
      const int c = classes.at(y, x);
      if (c >= num_classes) throw ClassOutOfRangeError(c, num_classes);
      out(y, x, c) = 1.0;
    }
  }
  return out;
}

Tensor stack_input_channels(const Tensor& flair, const Tensor& t1ce) {
  if (!flair.same_shape(t1ce) || flair.rank() != 2) {
    throw ShapeMismatchError("input channels must be equal-size 2D slices");
  }
  Tensor out({flair.dim(0), flair.dim(1), 2});
  for (int y = 0; y < flair.dim(0); ++y) {
    for (int x = 0; x < flair.dim(1); ++x) {
      out(y, x, 0) = flair(y, x);
      out(y, x, 1) = t1ce(y, x);
    }
  }
  return out;
}

SliceSample build_sample_from(const Volume& flair, const Volume& t1ce,
                              const LabelVolume& seg, const std::string& case_id,
                              int slice_index, const SliceWindow& w,
                              std::pair<int, int> target_size) {
  if (flair.height != t1ce.height || flair.width != t1ce.width ||
      flair.depth != t1ce.depth || flair.height != seg.height ||
      flair.width != seg.width || flair.depth != seg.depth) {
    throw CorruptFileError("case " + case_id + ": modality and segmentation shapes differ");
  }
  validate_window(w, flair.depth);
  if (!w.contains(slice_index)) {
    throw WindowOutOfBoundsError(slice_index, 1, w.start + w.length);
  }
  const auto [th, tw] = target_size;

  const Tensor f = normalize_minmax(resize_slice(slice_at(flair, slice_index), th, tw));
  const Tensor t = normalize_minmax(resize_slice(slice_at(t1ce, slice_index), th, tw));

  SliceSample s;
  s.input = stack_input_channels(f, t);
  s.target = one_hot(remap_labels(resize_slice(slice_at(seg, slice_index), th, tw)));
  s.case_id = case_id;
  s.slice_index = slice_index;
  return s;
}

SliceSample build_sample(const CaseRef& c, int slice_index, const SliceWindow& w,
                         std::pair<int, int> target_size) {
  const Volume flair = load_modality(c, Modality::FLAIR);
  const Volume t1ce = load_modality(c, Modality::T1CE);
  const LabelVolume seg = load_segmentation(c);
  return build_sample_from(flair, t1ce, seg, c.case_id, slice_index, w, target_size);
}

}  // namespace tumorseg
