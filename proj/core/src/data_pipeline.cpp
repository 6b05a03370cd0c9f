#include "tumorseg/data_pipeline.hpp"

#include <cmath>
#include <cstring>

#include "tumorseg/errors.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

DatasetSplit split_cases(std::vector<CaseRef> cases, std::array<double, 3> ratios,
                         std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw BadRatiosError("split ratios must be positive");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw BadRatiosError("split ratios must sum to 1, got " + std::to_string(sum));
  }
  if (cases.size() < 3) throw TooFewCasesError(cases.size());

  Rng rng(seed);
  rng.shuffle(cases);

  const std::size_t n = cases.size();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(ratios[0] * n));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios[1] * n));

  DatasetSplit split;
  split.seed = seed;
  split.train.assign(cases.begin(), cases.begin() + n_train);
  split.validation.assign(cases.begin() + n_train, cases.begin() + n_train + n_val);
  split.test.assign(cases.begin() + n_train + n_val, cases.end());
  return split;
}

BatchGenerator::BatchGenerator(std::vector<CaseRef> cases, SliceWindow window,
                               int batch_size, bool shuffle, std::uint64_t seed,
                               std::pair<int, int> target_size)
    : cases_(std::move(cases)),
      window_(window),
      batch_size_(batch_size),
      shuffle_(shuffle),
      seed_(seed),
      target_size_(target_size) {
  if (batch_size_ < 1) throw ConfigInvalidError("batch size must be >= 1");
  if (cases_.empty()) throw EmptyDatasetError("batch generator given no cases");
  if (window_.start < 0 || window_.length < 1) {
    throw WindowOutOfBoundsError(window_.start, window_.length, 0);
  }
  begin_epoch(0);
}

void BatchGenerator::begin_epoch(int epoch) {
  plan_.clear();
  plan_.reserve(cases_.size() * static_cast<std::size_t>(window_.length));
  for (int ci = 0; ci < static_cast<int>(cases_.size()); ++ci) {
    for (int k = 0; k < window_.length; ++k) {
      plan_.emplace_back(ci, window_.start + k);
    }
  }
  if (shuffle_) {
    Rng rng(Rng::mix(seed_, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(plan_);
  }
  cursor_ = 0;
}

int BatchGenerator::num_samples() const {
  return static_cast<int>(cases_.size()) * window_.length;
}

int BatchGenerator::batches_per_epoch() const {
  return (num_samples() + batch_size_ - 1) / batch_size_;
}

const BatchGenerator::LoadedCase& BatchGenerator::load_case(int case_index) {
  if (cache_.case_index != case_index) {
    const CaseRef& c = cases_[static_cast<std::size_t>(case_index)];
    cache_.flair = load_modality(c, Modality::FLAIR);
    cache_.t1ce = load_modality(c, Modality::T1CE);
    cache_.seg = load_segmentation(c);
    cache_.case_index = case_index;
  }
  return cache_;
}

SliceSample BatchGenerator::make_sample(int case_index, int slice_index) {
  const CaseRef& c = cases_[static_cast<std::size_t>(case_index)];
  try {
    const LoadedCase& lc = load_case(case_index);
    SliceSample s = build_sample_from(lc.flair, lc.t1ce, lc.seg, c.case_id, slice_index,
                                      window_, target_size_);
    ++samples_built_;
    return s;
  } catch (const DataError& e) {
    throw DataError("case " + c.case_id + " slice " + std::to_string(slice_index) +
                    ": " + e.what());
  }
}

std::optional<Batch> BatchGenerator::next() {
  if (cursor_ >= plan_.size()) return std::nullopt;
  const int b = static_cast<int>(
      std::min<std::size_t>(batch_size_, plan_.size() - cursor_));

  Batch batch;
  const auto [h, w] = target_size_;
  batch.inputs = Tensor({b, h, w, 2});
  batch.targets = Tensor({b, h, w, 4});
  batch.provenance.reserve(static_cast<std::size_t>(b));

  const std::int64_t in_stride = static_cast<std::int64_t>(h) * w * 2;
  const std::int64_t tg_stride = static_cast<std::int64_t>(h) * w * 4;
  for (int i = 0; i < b; ++i) {
    const auto [ci, z] = plan_[cursor_ + static_cast<std::size_t>(i)];
    SliceSample s = make_sample(ci, z);
    std::memcpy(batch.inputs.data() + i * in_stride, s.input.data(),
                sizeof(double) * static_cast<std::size_t>(in_stride));
    std::memcpy(batch.targets.data() + i * tg_stride, s.target.data(),
                sizeof(double) * static_cast<std::size_t>(tg_stride));
    batch.provenance.emplace_back(s.case_id, s.slice_index);
  }
  cursor_ += static_cast<std::size_t>(b);
  return batch;
}

}  // namespace tumorseg
