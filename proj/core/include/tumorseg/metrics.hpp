#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tumorseg/tensor.hpp"

namespace tumorseg {

// How a probability map is turned into per-class decisions.
enum class Decision { argmax, threshold };

// Whether dice values are soft (computed on probabilities) or hard (computed
// on argmax decisions).
enum class DiceMode { soft, hard };

enum class DiceClass { all, necrotic, edema, enhancing };

// One-vs-rest confusion counts per class. For each class,
// tp + fp + fn + tn equals the total pixel count.
struct ConfusionCounts {
  int num_classes = 0;
  std::vector<long long> tp, fp, fn, tn;

  explicit ConfusionCounts(int classes = 4)
      : num_classes(classes), tp(classes, 0), fp(classes, 0), fn(classes, 0), tn(classes, 0) {}

  long long total() const {
    return num_classes ? tp[0] + fp[0] + fn[0] + tn[0] : 0;
  }
};

struct PixelMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// The ten report quantities (the columns of the history CSV minus epoch and
// seconds).
struct MetricValues {
  double loss = 0.0;
  double accuracy = 0.0;
  double mean_iou = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double dice = 0.0;
  double dice_necrotic = 0.0;
  double dice_edema = 0.0;
  double dice_enhancing = 0.0;

  double by_name(const std::string& name) const;  // UnknownMetricError
  static const std::vector<std::string>& names();
};

// target: one-hot (..., C); probs: probabilities (..., C).
// argmax mode assigns each pixel the highest-probability class (ties to the
// lowest index); threshold mode binarizes each channel independently.
ConfusionCounts confusion_counts(const Tensor& target, const Tensor& probs,
                                 Decision mode, double threshold = 0.5);

// Soft dice (2*sum(t*p) + eps) / (sum(t^2) + sum(p^2) + eps). Class filters
// restrict to one channel: necrotic=1, edema=2, enhancing=3; `all` pools the
// channels jointly. Hard dice is this function applied to one-hot decisions.
double dice(const Tensor& target, const Tensor& probs, DiceClass filter = DiceClass::all,
            double eps = 1e-6);

// Per-class IoU tp/(tp+fp+fn) under argmax decisions, classes with an empty
// union scoring 1, averaged over classes.
double mean_iou(const Tensor& target, const Tensor& probs, int num_classes = 4);
double mean_iou(const ConfusionCounts& counts);

// Micro-averaged over classes; 0/0 ratios are defined as 1.
PixelMetrics pixel_metrics(const ConfusionCounts& counts);

// Mean over pixels of -sum_c t_c*log(p_c), probabilities clipped to
// [1e-7, 1 - 1e-7] before the log.
double categorical_cross_entropy(const Tensor& target, const Tensor& probs);

// Streaming accumulator used by the trainer and the evaluator: pools argmax
// and threshold confusion counts, per-class soft dice sums, and the loss over
// every (target, probs) pair it sees.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(int num_classes = 4, double soft_eps = 1e-6,
                             double threshold = 0.5);

  void add(const Tensor& target, const Tensor& probs);

  MetricValues values(DiceMode mode) const;
  std::array<double, 4> dice_values(DiceMode mode) const;  // joint + 3 tumor classes
  long long pixel_count() const { return pixels_; }
  const ConfusionCounts& argmax_counts() const { return argmax_; }

 private:
  int num_classes_;
  double eps_;
  double threshold_;
  ConfusionCounts argmax_;
  ConfusionCounts thresh_;
  std::vector<double> soft_tp_, soft_t2_, soft_p2_;
  double cce_sum_ = 0.0;
  long long pixels_ = 0;
};

}  // namespace tumorseg
