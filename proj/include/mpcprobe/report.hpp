#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/evaluation.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

struct Report {
  std::vector<AccuracyCell> accuracy;
  std::vector<GapEntry> gaps;
  SliceTable degree_slices;
  SliceTable wavg_slices;
};

/// Aggregates are computed once from the same record set.
inline Report build_report(const std::vector<EvalRecord>& records) {
  Report r;
  r.accuracy = accuracy_table(records);
  r.gaps = gap_table(r.accuracy);
  r.degree_slices = structural_slices(records, SliceKey::kDegree);
  r.wavg_slices = structural_slices(records, SliceKey::kAvgOutgoingWeightRounded);
  return r;
}

inline std::string format_accuracy(double a) { return format_fixed(a, 3); }

inline std::string format_gap_percent(double gap_rel) { return format_fixed(gap_rel * 100.0, 1); }

inline constexpr std::string_view kCsvHeader = "dataset,task,combination,scheme,metric,value,n";

/// Rows: accuracy per cell, gap_rel (percent, scheme column = best scheme),
/// then structural buckets as `acc@deg=K` / `acc@wavg=K`. A `#` footer lists
/// bucket coverage.
inline std::string emit_csv(const Report& rep) {
  std::string out(kCsvHeader);
  out += '\n';
  auto row = [&](const std::string& dataset, Task t, Combination c, Scheme s, const std::string& metric,
                 const std::string& value, std::int64_t n) {
    out += dataset + "," + std::string(to_string(t)) + "," + std::string(to_string(c)) + "," +
           std::string(to_string(s)) + "," + metric + "," + value + "," + std::to_string(n) + "\n";
  };
  for (const auto& a : rep.accuracy) {
    row(a.dataset, a.task, a.combination, a.scheme, "accuracy", format_accuracy(a.reported()), a.n);
  }
  for (const auto& g : rep.gaps) {
    row(g.dataset, g.task, g.combination, g.best_scheme, "gap_rel", format_gap_percent(g.gap_rel), g.n);
  }
  for (const SliceTable* t : {&rep.degree_slices, &rep.wavg_slices}) {
    for (const auto& b : t->buckets) {
      row(b.dataset, b.task, b.combination, b.scheme,
          "acc@" + std::string(to_string(b.key)) + "=" + std::to_string(b.value), format_accuracy(b.accuracy()), b.n);
    }
  }
  for (const SliceTable* t : {&rep.degree_slices, &rep.wavg_slices}) {
    for (const auto& c : t->coverage) {
      std::vector<std::string> present, empty;
      for (auto v : c.present) present.push_back(std::to_string(v));
      for (auto v : c.empty) empty.push_back(std::to_string(v));
      out += "# coverage dataset=" + c.dataset + " task=" + std::string(to_string(c.task)) +
             " combination=" + std::string(to_string(c.combination)) + " scheme=" + std::string(to_string(c.scheme)) +
             " key=" + std::string(to_string(c.key)) + " present=" + join(present, ";") +
             " empty=" + (empty.empty() ? std::string("-") : join(empty, ";")) + "\n";
    }
  }
  return out;
}

inline nlohmann::ordered_json emit_json(const Report& rep) {
  nlohmann::ordered_json acc = nlohmann::ordered_json::array();
  for (const auto& a : rep.accuracy) {
    acc.push_back({{"dataset", a.dataset},
                   {"task", std::string(to_string(a.task))},
                   {"combination", std::string(to_string(a.combination))},
                   {"scheme", std::string(to_string(a.scheme))},
                   {"accuracy", a.reported()},
                   {"correct", a.correct},
                   {"n", a.n}});
  }
  nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
  for (const auto& g : rep.gaps) {
    gaps.push_back({{"dataset", g.dataset},
                    {"task", std::string(to_string(g.task))},
                    {"combination", std::string(to_string(g.combination))},
                    {"best", g.best},
                    {"average", g.average},
                    {"gap_rel", g.gap_rel},
                    {"gap_rel_percent", format_gap_percent(g.gap_rel)},
                    {"best_scheme", std::string(to_string(g.best_scheme))}});
  }
  auto slices = [](const SliceTable& t) {
    nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
    for (const auto& b : t.buckets) {
      buckets.push_back({{"dataset", b.dataset},
                         {"task", std::string(to_string(b.task))},
                         {"combination", std::string(to_string(b.combination))},
                         {"scheme", std::string(to_string(b.scheme))},
                         {"value", b.value},
                         {"accuracy", b.accuracy()},
                         {"correct", b.correct},
                         {"n", b.n}});
    }
    nlohmann::ordered_json coverage = nlohmann::ordered_json::array();
    for (const auto& c : t.coverage) {
      coverage.push_back({{"dataset", c.dataset},
                          {"task", std::string(to_string(c.task))},
                          {"combination", std::string(to_string(c.combination))},
                          {"scheme", std::string(to_string(c.scheme))},
                          {"present", c.present},
                          {"empty", c.empty}});
    }
    return nlohmann::ordered_json{{"buckets", buckets}, {"coverage", coverage}};
  };
  return {{"accuracy", acc},
          {"gaps", gaps},
          {"slices", {{"deg", slices(rep.degree_slices)}, {"wavg", slices(rep.wavg_slices)}}}};
}

// ---------------------------------------------------------------------------
// SVG plots

namespace svg {

inline constexpr std::string_view kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, accuracy)
};

struct Frame {
  double width = 640, height = 400, left = 60, right = 170, top = 40, bottom = 50;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

inline std::string open(const Frame& f, std::string_view title) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(f.width, 0) + "\" height=\"" +
                    format_fixed(f.height, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + format_fixed(f.width / 2, 1) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  // y axis 0..1 with gridlines
  for (int k = 0; k <= 5; ++k) {
    const double y = f.top + f.plot_h() * (1.0 - k / 5.0);
    out += "<line x1=\"" + format_fixed(f.left, 1) + "\" y1=\"" + format_fixed(y, 1) + "\" x2=\"" +
           format_fixed(f.left + f.plot_w(), 1) + "\" y2=\"" + format_fixed(y, 1) + "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + format_fixed(f.left - 6, 1) + "\" y=\"" + format_fixed(y + 4, 1) +
           "\" text-anchor=\"end\">" + format_fixed(k / 5.0, 1) + "</text>\n";
  }
  out += "<line x1=\"" + format_fixed(f.left, 1) + "\" y1=\"" + format_fixed(f.top, 1) + "\" x2=\"" +
         format_fixed(f.left, 1) + "\" y2=\"" + format_fixed(f.top + f.plot_h(), 1) + "\" stroke=\"black\"/>\n";
  return out;
}

inline std::string line_chart(std::string_view title, std::string_view x_label, const std::vector<Series>& series) {
  Frame f;
  double x_min = 0, x_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, _] : s.points) {
      if (first) {
        x_min = x_max = x;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
  }
  if (x_max == x_min) {
    x_min -= 1;
    x_max += 1;
  }
  auto px = [&](double x) { return f.left + (x - x_min) / (x_max - x_min) * f.plot_w(); };
  auto py = [&](double y) { return f.top + (1.0 - y) * f.plot_h(); };

  std::string out = open(f, title);
  for (auto x = static_cast<std::int64_t>(std::ceil(x_min)); x <= static_cast<std::int64_t>(std::floor(x_max)); ++x) {
    out += "<text x=\"" + format_fixed(px(static_cast<double>(x)), 1) + "\" y=\"" +
           format_fixed(f.top + f.plot_h() + 18, 1) + "\" text-anchor=\"middle\">" + std::to_string(x) + "</text>\n";
  }
  out += "<text x=\"" + format_fixed(f.left + f.plot_w() / 2, 1) + "\" y=\"" + format_fixed(f.height - 8, 1) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto color = std::string(kPalette[i % std::size(kPalette)]);
    std::string pts;
    for (const auto& [x, y] : series[i].points) pts += format_fixed(px(x), 1) + "," + format_fixed(py(y), 1) + " ";
    out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + std::string(trim(pts)) +
           "\"/>\n";
    for (const auto& [x, y] : series[i].points) {
      out += "<circle cx=\"" + format_fixed(px(x), 1) + "\" cy=\"" + format_fixed(py(y), 1) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
    }
    const double ly = f.top + 14.0 * static_cast<double>(i);
    out += "<rect x=\"" + format_fixed(f.left + f.plot_w() + 12, 1) + "\" y=\"" + format_fixed(ly, 1) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + format_fixed(f.left + f.plot_w() + 26, 1) + "\" y=\"" + format_fixed(ly + 9, 1) + "\">" +
           escape(series[i].name) + "</text>\n";
  }
  return out + "</svg>\n";
}

inline std::string bar_chart(std::string_view title, const std::vector<std::pair<std::string, double>>& bars) {
  Frame f;
  f.right = 20;
  f.bottom = 90;
  std::string out = open(f, title);
  const double slot = bars.empty() ? f.plot_w() : f.plot_w() / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = bars[i].second * f.plot_h();
    const double x = f.left + slot * static_cast<double>(i) + slot * 0.15;
    out += "<rect x=\"" + format_fixed(x, 1) + "\" y=\"" + format_fixed(f.top + f.plot_h() - h, 1) + "\" width=\"" +
           format_fixed(slot * 0.7, 1) + "\" height=\"" + format_fixed(h, 1) + "\" fill=\"" +
           std::string(kPalette[i % std::size(kPalette)]) + "\"/>\n";
    out += "<text x=\"" + format_fixed(x + slot * 0.35, 1) + "\" y=\"" + format_fixed(f.top + f.plot_h() - h - 4, 1) +
           "\" text-anchor=\"middle\">" + format_accuracy(bars[i].second) + "</text>\n";
    const double lx = x + slot * 0.35;
    const double ly = f.top + f.plot_h() + 14;
    out += "<text x=\"" + format_fixed(lx, 1) + "\" y=\"" + format_fixed(ly, 1) + "\" text-anchor=\"end\" transform=\"rotate(-35 " +
           format_fixed(lx, 1) + " " + format_fixed(ly, 1) + ")\">" + escape(bars[i].first) + "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace svg

/// Macro bar chart per (dataset, task) using each combination's best scheme,
/// and accuracy-vs-metric line charts per (dataset, task, key).
inline std::vector<std::filesystem::path> emit_plots(const Report& rep, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  // Cells without all three schemes have no GapEntry; fall back to the best scheme present.
  std::map<std::tuple<std::string, Task, Combination>, Scheme> best;
  std::map<std::tuple<std::string, Task, Combination>, double> best_acc;
  for (const auto& a : rep.accuracy) {
    auto key = std::make_tuple(a.dataset, a.task, a.combination);
    if (!best_acc.count(key) || a.reported() > best_acc[key]) {
      best_acc[key] = a.reported();
      best[key] = a.scheme;
    }
  }

  std::map<std::pair<std::string, Task>, std::vector<std::pair<std::string, double>>> bars;
  for (const auto& [key, acc] : best_acc) {
    bars[{std::get<0>(key), std::get<1>(key)}].emplace_back(std::string(to_string(std::get<2>(key))), acc);
  }
  for (const auto& [key, b] : bars) {
    const auto path = dir / ("macro_" + key.first + "_" + std::string(to_string(key.second)) + ".svg");
    write_file_atomic(path, svg::bar_chart("Best macro accuracy: " + key.first + " " + std::string(to_string(key.second)), b));
    written.push_back(path);
  }

  for (const SliceTable* t : {&rep.degree_slices, &rep.wavg_slices}) {
    std::map<std::pair<std::string, Task>, std::map<Combination, svg::Series>> series;
    std::string key_name;
    for (const auto& b : t->buckets) {
      key_name = to_string(b.key);
      const auto cell = std::make_tuple(b.dataset, b.task, b.combination);
      if (best.at(cell) != b.scheme) continue;
      auto& s = series[{b.dataset, b.task}][b.combination];
      s.name = std::string(to_string(b.combination)) + " (" + std::string(to_string(b.scheme)) + ")";
      s.points.emplace_back(static_cast<double>(b.value), b.accuracy());
    }
    for (const auto& [key, by_combo] : series) {
      std::vector<svg::Series> lines;
      for (const auto& [_, s] : by_combo) lines.push_back(s);
      const auto path =
          dir / ("slice_" + key_name + "_" + key.first + "_" + std::string(to_string(key.second)) + ".svg");
      const std::string x_label = key_name == "deg" ? "deg(u)" : "rounded average outgoing weight of u";
      write_file_atomic(path, svg::line_chart("Accuracy by " + x_label + ": " + key.first + " " +
                                                  std::string(to_string(key.second)),
                                              x_label, lines));
      written.push_back(path);
    }
  }
  return written;
}

/// Writes report.csv and report.json (and SVG plots when asked) into `dir`.
inline void emit_report(const Report& rep, const std::filesystem::path& dir, bool plots) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(Errc::kIoError, "cannot create " + dir.string());
  write_file_atomic(dir / "report.csv", emit_csv(rep));
  write_file_atomic(dir / "report.json", emit_json(rep).dump(2) + "\n");
  if (plots) emit_plots(rep, dir / "plots");
}

}  // namespace mpcprobe
