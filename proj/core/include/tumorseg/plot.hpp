#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tumorseg {

// A parsed history CSV, validated against the exact training-log column
// contract.
struct HistoryCsv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;  // InconsistentColumns
};

HistoryCsv parse_history_csv(const std::filesystem::path& file);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Deterministic standalone SVG line chart.
std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<Series>& series);

// Emits the three training-curve images (loss, accuracy, dice vs epoch).
// One CSV: train and validation series overlaid per chart. Several CSVs:
// per-dataset comparison charts overlaying each log's validation series.
// Returns the written file paths.
std::vector<std::filesystem::path> write_history_plots(
    const std::vector<std::filesystem::path>& csv_files,
    const std::filesystem::path& out_dir);

}  // namespace tumorseg
