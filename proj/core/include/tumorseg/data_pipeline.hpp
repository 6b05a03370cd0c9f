#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tumorseg/preprocess.hpp"
#include "tumorseg/tensor.hpp"
#include "tumorseg/volume_io.hpp"

namespace tumorseg {

// Case-level partition of a dataset. Partitions are pairwise disjoint and
// cover the input set.
struct DatasetSplit {
  std::vector<CaseRef> train;
  std::vector<CaseRef> validation;
  std::vector<CaseRef> test;
  std::uint64_t seed = 0;
};

// Seeded shuffle, then floor(r_train*N) / floor(r_val*N) / remainder.
DatasetSplit split_cases(std::vector<CaseRef> cases, std::array<double, 3> ratios,
                         std::uint64_t seed);

struct Batch {
  Tensor inputs;   // (B, h, w, 2)
  Tensor targets;  // (B, h, w, 4)
  std::vector<std::pair<std::string, int>> provenance;  // (case_id, slice_index)

  int size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

// Streams (case, slice) samples in batches, building them lazily so only one
// batch is materialized at a time. The most recently used case's volumes are
// kept loaded; nothing else is cached.
class BatchGenerator {
 public:
  BatchGenerator(std::vector<CaseRef> cases, SliceWindow window, int batch_size,
                 bool shuffle, std::uint64_t seed,
                 std::pair<int, int> target_size = {128, 128});

  // Rebuilds the epoch plan (one entry per case x in-window slice). With
  // shuffling enabled the order is a seeded permutation that varies by epoch.
  void begin_epoch(int epoch);

  std::optional<Batch> next();

  int num_samples() const;
  int batches_per_epoch() const;
  // Number of samples constructed so far; lets tests verify the one-batch
  // memory contract.
  long long samples_built() const { return samples_built_; }

 private:
  struct LoadedCase {
    int case_index = -1;
    Volume flair;
    Volume t1ce;
    LabelVolume seg;
  };

  const LoadedCase& load_case(int case_index);
  SliceSample make_sample(int case_index, int slice_index);

  std::vector<CaseRef> cases_;
  SliceWindow window_;
  int batch_size_;
  bool shuffle_;
  std::uint64_t seed_;
  std::pair<int, int> target_size_;

  std::vector<std::pair<int, int>> plan_;  // (case index, absolute slice index)
  std::size_t cursor_ = 0;
  LoadedCase cache_;
  long long samples_built_ = 0;
};

}  // namespace tumorseg
