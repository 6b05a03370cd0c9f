#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tumorseg/tensor.hpp"
#include "tumorseg/volume_io.hpp"

namespace tumorseg {

// Axial sub-range of a volume. The defaults keep 100 central slices of a
// 155-slice scan, skipping the near-empty extremes.
struct SliceWindow {
  int start = 22;
  int length = 100;

  bool contains(int slice_index) const {
    return slice_index >= start && slice_index < start + length;
  }
};

struct LabelImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> v;

  std::uint8_t at(int y, int x) const {
    return v[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int y, int x) {
    return v[static_cast<std::size_t>(y) * width + x];
  }
};

// One training example: inputs are min-max normalized (FLAIR, T1CE) channels,
// target is the one-hot encoding of the remapped labels.
struct SliceSample {
  Tensor input;   // (h, w, 2) in [0, 1]
  Tensor target;  // (h, w, 4) one-hot
  std::string case_id;
  int slice_index = 0;
};

void validate_window(const SliceWindow& w, int depth);

std::vector<Tensor> extract_slices(const Volume& vol, const SliceWindow& w);
std::vector<LabelImage> extract_slices(const LabelVolume& vol, const SliceWindow& w);

Tensor slice_at(const Volume& vol, int z);
LabelImage slice_at(const LabelVolume& vol, int z);

// Corner-aligned bilinear resampling; a singleton output dimension samples
// the input's center.
Tensor resize_slice(const Tensor& slice, int out_h, int out_w);
// Nearest-neighbor variant for labels; never invents values absent from the
// input.
LabelImage resize_slice(const LabelImage& slice, int out_h, int out_w);

// (x - min) / (max - min); a constant slice maps to all zeros.
Tensor normalize_minmax(const Tensor& slice);

// {0,1,2,4} -> {0,1,2,3} and back.
LabelImage remap_labels(const LabelImage& labels);
LabelImage remap_labels_inverse(const LabelImage& classes);

Tensor one_hot(const LabelImage& classes, int num_classes = 4);

Tensor stack_input_channels(const Tensor& flair, const Tensor& t1ce);

SliceSample build_sample(const CaseRef& c, int slice_index, const SliceWindow& w,
                         std::pair<int, int> target_size = {128, 128});

// Same chain with pre-loaded volumes; the batch generator uses this to avoid
// re-reading files for every slice.
SliceSample build_sample_from(const Volume& flair, const Volume& t1ce,
                              const LabelVolume& seg, const std::string& case_id,
                              int slice_index, const SliceWindow& w,
                              std::pair<int, int> target_size = {128, 128});

}  // namespace tumorseg
