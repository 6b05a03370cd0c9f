#include "tumorseg/metrics.hpp"

#include <cmath>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

constexpr double kProbClip = 1e-7;

struct Flattened {
  long long pixels = 0;
  int channels = 0;
};

Flattened check_pair(const Tensor& target, const Tensor& probs) {
  if (!target.same_shape(probs) || target.rank() < 1) {
    throw ShapeMismatchError("target shape " + target.shape_str() +
                             " does not match probabilities shape " + probs.shape_str());
  }
  Flattened f;
  f.channels = target.dim(target.rank() - 1);
  if (f.channels < 2) throw ShapeMismatchError("need a trailing class dimension");
  f.pixels = target.size() / f.channels;
  return f;
}

void check_one_hot(const Tensor& target, const Flattened& f) {
  const double* t = target.data();
  for (long long p = 0; p < f.pixels; ++p) {
    double sum = 0.0;
    for (int c = 0; c < f.channels; ++c) {
      const double v = t[p * f.channels + c];
      if (v != 0.0 && v != 1.0) {
        throw InvalidTargetError("target is not one-hot (value found: " +
                                 std::to_string(v) + ")");
      }
      sum += v;
    }
    if (sum != 1.0) {
      throw InvalidTargetError("target pixel channel sum is not 1");
    }
  }
}

int argmax_channel(const double* p, int channels) {
  int best = 0;
  for (int c = 1; c < channels; ++c) {
    if (p[c] > p[best]) best = c;  // ties resolve to the lowest index
  }
  return best;
}

double ratio_or_one(double num, double den) { return den == 0.0 ? 1.0 : num / den; }

}  // namespace

double MetricValues::by_name(const std::string& name) const {
  if (name == "loss") return loss;
  if (name == "accuracy") return accuracy;
  if (name == "mean_iou") return mean_iou;
  if (name == "precision") return precision;
  if (name == "sensitivity") return sensitivity;
  if (name == "specificity") return specificity;
  if (name == "dice") return dice;
  if (name == "dice_necrotic") return dice_necrotic;
  if (name == "dice_edema") return dice_edema;
  if (name == "dice_enhancing") return dice_enhancing;
  throw UnknownMetricError(name);
}

const std::vector<std::string>& MetricValues::names() {
  static const std::vector<std::string> kNames = {
      "loss",        "accuracy",    "mean_iou",      "precision",
      "sensitivity", "specificity", "dice",          "dice_necrotic",
      "dice_edema",  "dice_enhancing"};
  return kNames;
}

ConfusionCounts confusion_counts(const Tensor& target, const Tensor& probs,
                                 Decision mode, double threshold) {
  const Flattened f = check_pair(target, probs);
  check_one_hot(target, f);
  ConfusionCounts counts(f.channels);
  const double* t = target.data();
  const double* p = probs.data();
  for (long long i = 0; i < f.pixels; ++i) {
    const double* tp = t + i * f.channels;
    const double* pp = p + i * f.channels;
    if (mode == Decision::argmax) {
      const int pred = argmax_channel(pp, f.channels);
      for (int c = 0; c < f.channels; ++c) {
        const bool truth = tp[c] != 0.0;
        const bool chosen = (c == pred);
        if (truth && chosen) {
          ++counts.tp[c];
        } else if (!truth && chosen) {
          ++counts.fp[c];
        } else if (truth && !chosen) {
          ++counts.fn[c];
        } else {
          ++counts.tn[c];
        }
      }
    } else {
      for (int c = 0; c < f.channels; ++c) {
        const bool truth = tp[c] != 0.0;
        const bool chosen = pp[c] > threshold;
        if (truth && chosen) {
          ++counts.tp[c];
        } else if (!truth && chosen) {
          ++counts.fp[c];
        } else if (truth && !chosen) {
          ++counts.fn[c];
        } else {
          ++counts.tn[c];
        }
      }
    }
  }
  return counts;
}

double dice(const Tensor& target, const Tensor& probs, DiceClass filter, double eps) {
  const Flattened f = check_pair(target, probs);
  if (eps <= 0.0) throw ConfigInvalidError("dice eps must be positive");
  int lo = 0;
  int hi = f.channels;
  switch (filter) {
    case DiceClass::all:
      break;
    case DiceClass::necrotic:
      lo = 1, hi = 2;
      break;
    case DiceClass::edema:
      lo = 2, hi = 3;
      break;
    case DiceClass::enhancing:
      lo = 3, hi = 4;
      break;
  }
  if (hi > f.channels) throw ShapeMismatchError("class filter out of range");
  const double* t = target.data();
  const double* p = probs.data();
  double s_tp = 0.0, s_t2 = 0.0, s_p2 = 0.0;
  for (long long i = 0; i < f.pixels; ++i) {
    for (int c = lo; c < hi; ++c) {
      const double tv = t[i * f.channels + c];
      const double pv = p[i * f.channels + c];
      s_tp += tv * pv;
      s_t2 += tv * tv;
      s_p2 += pv * pv;
    }
  }
  return (2.0 * s_tp + eps) / (s_t2 + s_p2 + eps);
}

double mean_iou(const ConfusionCounts& counts) {
  double sum = 0.0;
  for (int c = 0; c < counts.num_classes; ++c) {
    const long long uni = counts.tp[c] + counts.fp[c] + counts.fn[c];
    sum += uni == 0 ? 1.0 : static_cast<double>(counts.tp[c]) / uni;
  }
  return sum / counts.num_classes;
}

double mean_iou(const Tensor& target, const Tensor& probs, int num_classes) {
  const Flattened f = check_pair(target, probs);
  if (f.channels != num_classes) {
    throw ShapeMismatchError("channel count does not match num_classes");
  }
  return mean_iou(confusion_counts(target, probs, Decision::argmax));
}

PixelMetrics pixel_metrics(const ConfusionCounts& counts) {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  for (int c = 0; c < counts.num_classes; ++c) {
    tp += counts.tp[c];
    fp += counts.fp[c];
    fn += counts.fn[c];
    tn += counts.tn[c];
  }
  PixelMetrics m;
  m.accuracy = ratio_or_one(static_cast<double>(tp + tn),
                            static_cast<double>(tp + fp + fn + tn));
  m.precision = ratio_or_one(static_cast<double>(tp), static_cast<double>(tp + fp));
  m.sensitivity = ratio_or_one(static_cast<double>(tp), static_cast<double>(tp + fn));
  m.specificity = ratio_or_one(static_cast<double>(tn), static_cast<double>(tn + fp));
  return m;
}

double categorical_cross_entropy(const Tensor& target, const Tensor& probs) {
  const Flattened f = check_pair(target, probs);
  const double* t = target.data();
  const double* p = probs.data();
  double sum = 0.0;
  for (long long i = 0; i < f.pixels * f.channels; ++i) {
    if (t[i] != 0.0) {
      const double clipped = std::min(std::max(p[i], kProbClip), 1.0 - kProbClip);
      sum -= t[i] * std::log(clipped);
    }
  }
  return sum / static_cast<double>(f.pixels);
}

MetricAccumulator::MetricAccumulator(int num_classes, double soft_eps, double threshold)
    : num_classes_(num_classes),
      eps_(soft_eps),
      threshold_(threshold),
      argmax_(num_classes),
      thresh_(num_classes),
      soft_tp_(num_classes, 0.0),
      soft_t2_(num_classes, 0.0),
      soft_p2_(num_classes, 0.0) {}

void MetricAccumulator::add(const Tensor& target, const Tensor& probs) {
  const Flattened f = check_pair(target, probs);
  if (f.channels != num_classes_) {
    throw ShapeMismatchError("accumulator expects " + std::to_string(num_classes_) +
                             " classes, got " + std::to_string(f.channels));
  }
  const double* t = target.data();
  const double* p = probs.data();
  for (long long i = 0; i < f.pixels; ++i) {
    const double* tp = t + i * f.channels;
    const double* pp = p + i * f.channels;
    const int pred = argmax_channel(pp, f.channels);
    for (int c = 0; c < f.channels; ++c) {
      const bool truth = tp[c] != 0.0;
      // argmax counts
      if (c == pred) {
        truth ? ++argmax_.tp[c] : ++argmax_.fp[c];
      } else {
        truth ? ++argmax_.fn[c] : ++argmax_.tn[c];
      }
      // threshold counts
      if (pp[c] > threshold_) {
        truth ? ++thresh_.tp[c] : ++thresh_.fp[c];
      } else {
        truth ? ++thresh_.fn[c] : ++thresh_.tn[c];
      }
      // soft dice sums
      soft_tp_[c] += tp[c] * pp[c];
      soft_t2_[c] += tp[c] * tp[c];
      soft_p2_[c] += pp[c] * pp[c];
      // loss
      if (truth) {
        const double clipped = std::min(std::max(pp[c], kProbClip), 1.0 - kProbClip);
        cce_sum_ -= tp[c] * std::log(clipped);
      }
    }
  }
  pixels_ += f.pixels;
}

std::array<double, 4> MetricAccumulator::dice_values(DiceMode mode) const {
  std::array<double, 4> out{};
  if (mode == DiceMode::soft) {
    double a_tp = 0.0, a_t2 = 0.0, a_p2 = 0.0;
    for (int c = 0; c < num_classes_; ++c) {
      a_tp += soft_tp_[c];
      a_t2 += soft_t2_[c];
      a_p2 += soft_p2_[c];
    }
    out[0] = (2.0 * a_tp + eps_) / (a_t2 + a_p2 + eps_);
    for (int k = 1; k < 4; ++k) {
      const int c = k;  // necrotic=1, edema=2, enhancing=3
      out[k] = (2.0 * soft_tp_[c] + eps_) / (soft_t2_[c] + soft_p2_[c] + eps_);
    }
  } else {
    long long a_tp = 0, a_fp = 0, a_fn = 0;
    for (int c = 0; c < num_classes_; ++c) {
      a_tp += argmax_.tp[c];
      a_fp += argmax_.fp[c];
      a_fn += argmax_.fn[c];
    }
    out[0] = (2.0 * a_tp + eps_) / (2.0 * a_tp + a_fp + a_fn + eps_);
    for (int k = 1; k < 4; ++k) {
      const int c = k;
      out[k] = (2.0 * argmax_.tp[c] + eps_) /
               (2.0 * argmax_.tp[c] + argmax_.fp[c] + argmax_.fn[c] + eps_);
    }
  }
  return out;
}

MetricValues MetricAccumulator::values(DiceMode mode) const {
  MetricValues v;
  v.loss = pixels_ ? cce_sum_ / pixels_ : 0.0;
  const PixelMetrics pm = pixel_metrics(thresh_);
  // accuracy is the plain per-pixel argmax accuracy (each correct pixel is
  // exactly one argmax true positive); the other three are micro-averaged
  // threshold counts.
  long long correct = 0;
  for (int c = 0; c < num_classes_; ++c) correct += argmax_.tp[c];
  v.accuracy = pixels_ ? static_cast<double>(correct) / static_cast<double>(pixels_) : 1.0;
  v.precision = pm.precision;
  v.sensitivity = pm.sensitivity;
  v.specificity = pm.specificity;
  v.mean_iou = mean_iou(argmax_);
  const auto d = dice_values(mode);
  v.dice = d[0];
  v.dice_necrotic = d[1];
  v.dice_edema = d[2];
  v.dice_enhancing = d[3];
  return v;
}

}  // namespace tumorseg
