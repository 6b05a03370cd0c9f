#include "tumorseg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tumorseg/errors.hpp"
#include "tumorseg/trainer.hpp"

namespace tumorseg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

constexpr int kWidth = 800;
constexpr int kHeight = 500;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 160;
constexpr int kMarginTop = 50;
constexpr int kMarginBottom = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::vector<double> HistoryCsv::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw InconsistentColumnsError("history csv is missing column: " + name);
  }
  const std::size_t idx = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[idx]);
  return out;
}

HistoryCsv parse_history_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open csv: " + file.string());
  std::string line;
  if (!std::getline(is, line)) {
    throw InconsistentColumnsError("empty csv: " + file.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  HistoryCsv csv;
  csv.columns = split_csv_line(line);
  const auto& expected = history_csv_columns();
  for (const auto& col : expected) {
    if (std::find(csv.columns.begin(), csv.columns.end(), col) == csv.columns.end()) {
      throw InconsistentColumnsError("history csv is missing column: " + col + " (" +
                                     file.string() + ")");
    }
  }
  for (const auto& col : csv.columns) {
    if (std::find(expected.begin(), expected.end(), col) == expected.end()) {
      throw InconsistentColumnsError("history csv has unexpected column: " + col + " (" +
                                     file.string() + ")");
    }
  }

  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != csv.columns.size()) {
      throw InconsistentColumnsError("csv row " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(csv.columns.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(f, &pos);
        if (pos != f.size()) throw std::invalid_argument(f);
        row.push_back(v);
      } catch (const std::exception&) {
        throw InconsistentColumnsError("csv row " + std::to_string(line_no) +
                                       " has a non-numeric field: '" + f + "'");
      }
    }
    csv.rows.push_back(std::move(row));
  }
  if (csv.rows.empty()) {
    throw InconsistentColumnsError("csv has no data rows: " + file.string());
  }
  return csv;
}

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<Series>& series) {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        first = false;
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto px = [&](double x) {
    return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w;
  };
  const auto py = [&](double y) {
    return kMarginTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"18\">" << title << "</text>\n";

  // axes
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
     << kMarginLeft << "\" y2=\"" << kMarginTop + plot_h
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
     << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (int t = 0; t <= 5; ++t) {
    const double fx = x_lo + (x_hi - x_lo) * t / 5.0;
    const double fy = y_lo + (y_hi - y_lo) * t / 5.0;
    os << "<line x1=\"" << px(fx) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
       << px(fx) << "\" y2=\"" << kMarginTop + plot_h + 5
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    os << "<text x=\"" << px(fx) << "\" y=\"" << kMarginTop + plot_h + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << fmt(fx) << "</text>\n";
    os << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << py(fy) << "\" x2=\""
       << kMarginLeft << "\" y2=\"" << py(fy)
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    os << "<text x=\"" << kMarginLeft - 9 << "\" y=\"" << py(fy) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fy)
       << "</text>\n";
  }
  os << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
     << "transform=\"rotate(-90 18 " << kMarginTop + plot_h / 2 << ")\">" << y_label
     << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (i) os << ' ';
      os << fmt(px(series[s].x[i])) << ',' << fmt(py(series[s].y[i]));
    }
    os << "\"/>\n";
    const double ly = kMarginTop + 16.0 * (static_cast<double>(s) + 1.0);
    os << "<line x1=\"" << kMarginLeft + plot_w + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
       << kMarginLeft + plot_w + 34 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kMarginLeft + plot_w + 40 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> write_history_plots(
    const std::vector<std::filesystem::path>& csv_files,
    const std::filesystem::path& out_dir) {
  if (csv_files.empty()) throw ConfigInvalidError("no csv files to plot");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create plot output directory: " + out_dir.string());
  }

  std::vector<HistoryCsv> logs;
  std::vector<std::string> labels;
  for (const auto& f : csv_files) {
    logs.push_back(parse_history_csv(f));
    std::string stem = f.stem().string();
    labels.push_back(stem.empty() ? f.string() : stem);
  }

  const std::vector<std::string> metrics = {"loss", "accuracy", "dice"};
  std::vector<std::filesystem::path> written;
  for (const auto& metric : metrics) {
    std::vector<Series> series;
    std::filesystem::path file;
    if (logs.size() == 1) {
      const auto epochs = logs[0].column("epoch");
      series.push_back({"train", epochs, logs[0].column(metric)});
      series.push_back({"validation", epochs, logs[0].column("val_" + metric)});
      file = out_dir / (metric + ".svg");
    } else {
      for (std::size_t i = 0; i < logs.size(); ++i) {
        series.push_back(
            {labels[i], logs[i].column("epoch"), logs[i].column("val_" + metric)});
      }
      file = out_dir / (metric + "_comparison.svg");
    }
    const std::string svg =
        render_line_chart_svg(metric + " vs epoch", "epoch", metric, series);
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw IoError("cannot write plot: " + file.string());
    os << svg;
    if (!os) throw IoError("plot write failed: " + file.string());
    written.push_back(file);
  }
  return written;
}

}  // namespace tumorseg
