#pragma once

#include <array>
#include <string>
#include <vector>

#include "tumorseg/data_pipeline.hpp"
#include "tumorseg/metrics.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/unet.hpp"

namespace tumorseg {

enum class Partition { train, validation, test, all };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);  // ConfigError
DiceMode decision_mode_from_name(const std::string& name);
const char* decision_mode_name(DiceMode m);

// The ten report quantities for one dataset/partition. `values` carries dice
// in `decision_mode`; `other_dice` holds the same four dice figures computed
// in the opposite mode so reports can print both.
struct MetricsReport {
  std::string dataset_label;
  Partition partition = Partition::all;
  DiceMode decision_mode = DiceMode::hard;
  MetricValues values;
  std::array<double, 4> other_dice{};  // joint, necrotic, edema, enhancing
  int n_cases = 0;
  int n_slices = 0;
};

// Streams every in-window slice of every case, pooling confusion counts and
// soft-dice sums globally (pixel-pooled, not per-slice averaged).
MetricsReport evaluate(const Predictor& model, const std::vector<CaseRef>& cases,
                       const SliceWindow& window, DiceMode mode = DiceMode::hard,
                       const std::string& dataset_label = "dataset",
                       Partition partition = Partition::all, int batch_size = 1);

struct ComparisonTable {
  std::vector<std::string> columns;  // metric column names, CSV contract order
  std::vector<MetricsReport> rows;
  // best_flags[row][col]: true when the row holds the column's best value
  // (lowest for loss, highest otherwise); ties flag every holder.
  std::vector<std::vector<bool>> best_flags;
};

ComparisonTable compare_reports(const std::vector<MetricsReport>& reports);

std::string render_comparison_text(const ComparisonTable& table);
std::string comparison_to_csv(const ComparisonTable& table);

// Runs the model over the window, argmax-decides, maps classes back to raw
// labels {0,1,2,4}, and rescales to the case's native in-plane size. Slices
// outside the window stay background.
LabelVolume predict_case(const Predictor& model, const CaseRef& c, const SliceWindow& window,
                         int batch_size = 1);

}  // namespace tumorseg
