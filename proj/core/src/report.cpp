#include "tumorseg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train:
      return "train";
    case Partition::validation:
      return "validation";
    case Partition::test:
      return "test";
    case Partition::all:
      return "all";
  }
  return "all";
}

Partition partition_from_name(const std::string& name) {
  if (name == "train") return Partition::train;
  if (name == "validation" || name == "val") return Partition::validation;
  if (name == "test") return Partition::test;
  if (name == "all") return Partition::all;
  throw ConfigError("unknown partition: " + name);
}

DiceMode decision_mode_from_name(const std::string& name) {
  if (name == "soft") return DiceMode::soft;
  if (name == "hard") return DiceMode::hard;
  throw ConfigError("unknown decision mode: " + name);
}

const char* decision_mode_name(DiceMode m) {
  return m == DiceMode::soft ? "soft" : "hard";
}

MetricsReport evaluate(const Predictor& model, const std::vector<CaseRef>& cases,
                       const SliceWindow& window, DiceMode mode,
                       const std::string& dataset_label, Partition partition,
                       int batch_size) {
  BatchGenerator gen(cases, window, batch_size, /*shuffle=*/false, 0, model.input_size());
  gen.begin_epoch(0);
  MetricAccumulator acc(model.num_classes());
  while (auto batch = gen.next()) {
    acc.add(batch->targets, model.predict(batch->inputs));
  }

  MetricsReport report;
  report.dataset_label = dataset_label;
  report.partition = partition;
  report.decision_mode = mode;
  report.values = acc.values(mode);
  report.other_dice =
      acc.dice_values(mode == DiceMode::hard ? DiceMode::soft : DiceMode::hard);
  report.n_cases = static_cast<int>(cases.size());
  report.n_slices = gen.num_samples();
  return report;
}

ComparisonTable compare_reports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ConfigInvalidError("no reports to compare");
  for (const auto& r : reports) {
    if (r.decision_mode != reports.front().decision_mode) {
      throw InconsistentColumnsError(
          "cannot compare reports with different decision modes");
    }
  }
  ComparisonTable table;
  table.columns = MetricValues::names();
  table.rows = reports;
  table.best_flags.assign(reports.size(),
                          std::vector<bool>(table.columns.size(), false));
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool lower = table.columns[c] == "loss";
    double best = reports[0].values.by_name(table.columns[c]);
    for (const auto& r : reports) {
      const double v = r.values.by_name(table.columns[c]);
      best = lower ? std::min(best, v) : std::max(best, v);
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].values.by_name(table.columns[c]) == best) {
        table.best_flags[i][c] = true;
      }
    }
  }
  return table;
}

std::string render_comparison_text(const ComparisonTable& table) {
  std::ostringstream os;
  const int label_w = 24;
  os << std::string("dataset (partition)").append(label_w - 19, ' ');
  for (const auto& col : table.columns) {
    os << ' ' << col;
    const int pad = std::max<int>(0, 15 - static_cast<int>(col.size()));
    os << std::string(static_cast<std::size_t>(pad), ' ');
  }
  os << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    std::string label = r.dataset_label + " (" + partition_name(r.partition) + ")";
    if (label.size() > static_cast<std::size_t>(label_w)) {
      label.resize(static_cast<std::size_t>(label_w));
    }
    label.append(static_cast<std::size_t>(label_w) - label.size(), ' ');
    os << label;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      std::string cell = fmt(r.values.by_name(table.columns[c]));
      if (table.best_flags[i][c]) cell += '*';
      const int pad = std::max<int>(0, 15 - static_cast<int>(cell.size()));
      os << ' ' << cell << std::string(static_cast<std::size_t>(pad), ' ');
    }
    os << '\n';
  }
  os << "(dice mode: " << decision_mode_name(table.rows.front().decision_mode)
     << "; * marks the best value per column; accuracy/precision/sensitivity/"
        "specificity are micro-averaged at threshold 0.5)\n";
  for (const auto& r : table.rows) {
    os << r.dataset_label << " " << decision_mode_name(r.decision_mode == DiceMode::hard
                                                           ? DiceMode::soft
                                                           : DiceMode::hard)
       << " dice (joint/necrotic/edema/enhancing): " << fmt(r.other_dice[0]) << " / "
       << fmt(r.other_dice[1]) << " / " << fmt(r.other_dice[2]) << " / "
       << fmt(r.other_dice[3]) << '\n';
  }
  return os.str();
}

std::string comparison_to_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "dataset,partition,decision_mode,n_cases,n_slices";
  for (const auto& col : table.columns) os << ',' << col;
  os << '\n';
  for (const auto& r : table.rows) {
    os << r.dataset_label << ',' << partition_name(r.partition) << ','
       << decision_mode_name(r.decision_mode) << ',' << r.n_cases << ',' << r.n_slices;
    for (const auto& col : table.columns) os << ',' << fmt_csv(r.values.by_name(col));
    os << '\n';
  }
  return os.str();
}

LabelVolume predict_case(const Predictor& model, const CaseRef& c, const SliceWindow& window,
                         int batch_size) {
  const Volume flair = load_modality(c, Modality::FLAIR);
  const Volume t1ce = load_modality(c, Modality::T1CE);
  if (flair.height != t1ce.height || flair.width != t1ce.width ||
      flair.depth != t1ce.depth) {
    throw CorruptFileError("case " + c.case_id + ": modality shapes differ");
  }
  validate_window(window, flair.depth);
  const auto [mh, mw] = model.input_size();

  LabelVolume out;
  out.height = flair.height;
  out.width = flair.width;
  out.depth = flair.depth;
  out.data.assign(static_cast<std::size_t>(flair.height) * flair.width * flair.depth, 0);

  const int classes = model.num_classes();
  for (int base = 0; base < window.length; base += batch_size) {
    const int b = std::min(batch_size, window.length - base);
    Tensor inputs({b, mh, mw, 2});
    for (int i = 0; i < b; ++i) {
      const int z = window.start + base + i;
      const Tensor f = normalize_minmax(resize_slice(slice_at(flair, z), mh, mw));
      const Tensor t = normalize_minmax(resize_slice(slice_at(t1ce, z), mh, mw));
      const Tensor stacked = stack_input_channels(f, t);
      std::copy(stacked.data(), stacked.data() + stacked.size(),
                inputs.data() + static_cast<std::int64_t>(i) * mh * mw * 2);
    }
    const Tensor probs = model.predict(inputs);
    for (int i = 0; i < b; ++i) {
      const int z = window.start + base + i;
      LabelImage decided;
      decided.height = mh;
      decided.width = mw;
      decided.v.resize(static_cast<std::size_t>(mh) * mw);
      for (int y = 0; y < mh; ++y) {
        for (int x = 0; x < mw; ++x) {
          int best = 0;
          for (int k = 1; k < classes; ++k) {
            if (probs(i, y, x, k) > probs(i, y, x, best)) best = k;
          }
          decided.at(y, x) = static_cast<std::uint8_t>(best);
        }
      }
      const LabelImage native =
          resize_slice(remap_labels_inverse(decided), out.height, out.width);
      for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
          out.at(y, x, z) = native.at(y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace tumorseg
