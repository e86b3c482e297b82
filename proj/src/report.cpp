#include "biasprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace biasprobe {

using nlohmann::json;

namespace {

constexpr int kWidth = 1200;
constexpr int kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 120;

std::vector<std::size_t> by_total(const ContingencyTable& t) {
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (t.column_total(a) != t.column_total(b)) return t.column_total(a) > t.column_total(b);
    return t.categories[a] < t.categories[b];
  });
  return order;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
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

// Round axis maximum up to 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
  if (v <= 0) return 1;
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (const double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= v) return m * mag;
  }
  return 10 * mag;
}

}  // namespace

std::string counts_csv(const ContingencyTable& table) {
  std::ostringstream out;
  out << "label," << table.groups[0] << "," << table.groups[1] << "\n";
  for (const auto c : by_total(table)) {
    out << table.categories[c] << "," << table.counts[0][c] << "," << table.counts[1][c] << "\n";
  }
  out << "total," << table.row_total(0) << "," << table.row_total(1) << "\n";
  return out.str();
}

std::string counts_markdown(const ContingencyTable& table) {
  std::ostringstream out;
  out << "| object | " << table.groups[0] << " | " << table.groups[1] << " |\n";
  out << "|---|---:|---:|\n";
  for (const auto c : by_total(table)) {
    out << "| " << table.categories[c] << " | " << table.counts[0][c] << " | " << table.counts[1][c] << " |\n";
  }
  out << "| **total** | " << table.row_total(0) << " | " << table.row_total(1) << " |\n";
  return out.str();
}

ContingencyTable parse_counts_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    return f;
  };
  if (!std::getline(in, line)) throw StatsError("counts CSV is empty");
  const auto header = split(line);
  if (header.size() != 3 || header[0] != "label") throw StatsError("counts CSV header must be label,<a>,<b>");
  ContingencyTable t;
  t.groups = {header[1], header[2]};
  bool saw_total = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw StatsError("counts CSV row needs 3 fields: '" + line + "'");
    const auto a = std::stoll(f[1]);
    const auto b = std::stoll(f[2]);
    if (f[0] == "total") {
      saw_total = true;
      if (a != t.row_total(0) || b != t.row_total(1)) throw StatsError("counts CSV totals row disagrees");
      continue;
    }
    t.categories.push_back(f[0]);
    t.counts[0].push_back(a);
    t.counts[1].push_back(b);
  }
  if (!saw_total) throw StatsError("counts CSV lacks a totals row");
  t.validate();
  return t;
}

json chart_data(const ContingencyTable& table, const FilterSpec& spec, const ReportStyle& style) {
  const auto kept = apply_filter(table, spec);
  json categories = json::array();
  json a = json::array();
  json b = json::array();
  for (const auto c : by_total(kept)) {
    categories.push_back(kept.categories[c]);
    a.push_back(kept.counts[0][c]);
    b.push_back(kept.counts[1][c]);
  }
  json data{{"v", 1},
            {"filter", spec},
            {"categories", categories},
            {"series",
             {{{"group", table.groups[0]}, {"color", style.color_a}, {"values", a}},
              {{"group", table.groups[1]}, {"color", style.color_b}, {"values", b}}}}};
  if (categories.empty()) data["warning"] = "no categories survive the filter";
  return data;
}

std::string chart_svg(const json& data) {
  const auto& categories = data.at("categories");
  const auto& series = data.at("series");
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::int64_t max_value = 0;
  for (const auto& s : series) {
    for (const auto& v : s.at("values")) max_value = std::max(max_value, v.get<std::int64_t>());
  }
  const double y_max = nice_ceiling(static_cast<double>(max_value));

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes and y ticks.
  const auto x0 = fmt("%.2f", kLeft);
  const auto y0 = fmt("%.2f", kTop + plot_h);
  out << "<line x1=\"" << x0 << "\" y1=\"" << fmt("%.2f", kTop) << "\" x2=\"" << x0 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << fmt("%.2f", kLeft + plot_w) << "\" y2=\""
      << y0 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y_max * i / 5.0;
    const double y = kTop + plot_h - plot_h * i / 5.0;
    out << "<text x=\"" << fmt("%.2f", kLeft - 6) << "\" y=\"" << fmt("%.2f", y + 4)
        << "\" text-anchor=\"end\">" << fmt("%g", v) << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << fmt("%.2f", kTop + plot_h / 2) << "\" transform=\"rotate(-90 16 "
      << fmt("%.2f", kTop + plot_h / 2) << ")\" text-anchor=\"middle\">count</text>\n";

  if (categories.empty()) {
    out << "<text x=\"" << fmt("%.2f", kLeft + plot_w / 2) << "\" y=\"" << fmt("%.2f", kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" fill=\"#666\">no categories pass the filter</text>\n";
  } else {
    const double group_w = plot_w / static_cast<double>(categories.size());
    const double bar_w = group_w * 0.38;
    for (std::size_t c = 0; c < categories.size(); ++c) {
      const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.12;
      for (std::size_t s = 0; s < series.size(); ++s) {
        const auto value = series[s].at("values")[c].get<std::int64_t>();
        const double h = plot_h * static_cast<double>(value) / y_max;
        out << "<rect x=\"" << fmt("%.2f", gx + bar_w * static_cast<double>(s)) << "\" y=\""
            << fmt("%.2f", kTop + plot_h - h) << "\" width=\"" << fmt("%.2f", bar_w) << "\" height=\""
            << fmt("%.2f", h) << "\" fill=\"" << xml_escape(series[s].at("color").get<std::string>())
            << "\"><title>" << xml_escape(series[s].at("group").get<std::string>()) << " "
            << xml_escape(categories[c].get<std::string>()) << ": " << value << "</title></rect>\n";
      }
      const double lx = kLeft + group_w * (static_cast<double>(c) + 0.5);
      const double ly = kTop + plot_h + 12;
      out << "<text x=\"" << fmt("%.2f", lx) << "\" y=\"" << fmt("%.2f", ly) << "\" transform=\"rotate(-45 "
          << fmt("%.2f", lx) << " " << fmt("%.2f", ly) << ")\" text-anchor=\"end\">"
          << xml_escape(categories[c].get<std::string>()) << "</text>\n";
    }
  }

  // Legend.
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double lx = kWidth - kRight - 160 + 80.0 * static_cast<double>(s);
    out << "<rect x=\"" << fmt("%.2f", lx) << "\" y=\"12\" width=\"12\" height=\"12\" fill=\""
        << xml_escape(series[s].at("color").get<std::string>()) << "\"/>\n";
    out << "<text x=\"" << fmt("%.2f", lx + 16) << "\" y=\"22\">"
        << xml_escape(series[s].at("group").get<std::string>()) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string format_p_value(double p) {
  auto s = fmt("%.6f", p);
  if (p > 0 && p < 5e-7) s += " (" + fmt("%.2e", p) + ")";
  return s;
}

std::string summary_markdown(const Analysis& a, std::size_t top_n) {
  std::ostringstream out;
  out << "# Object association summary";
  if (!a.title.empty()) out << ": " << a.title;
  out << "\n\n";

  if (a.manifest.is_object() && a.manifest.contains("run_id")) {
    const auto& m = a.manifest;
    out << "## Run\n\n";
    out << "- run id: " << m.value("run_id", "") << "\n";
    out << "- experiment seed: " << m.value("experiment_seed", std::uint64_t{0}) << "\n";
    out << "- corpus hash: " << m.value("corpus_hash", "") << "\n";
    if (m.contains("confidence_threshold")) {
      out << "- confidence threshold: " << fmt("%.3f", m["confidence_threshold"].get<double>()) << "\n";
    }
    if (m.contains("generator")) {
      out << "- generator: " << m["generator"]["descriptor"].value("id", "") << " ("
          << m["generator"].value("endpoint", "") << ", deterministic="
          << (m["generator"]["descriptor"].value("deterministic", false) ? "true" : "false") << ")\n";
      out << "- detector: " << m["detector"]["descriptor"].value("id", "") << " ("
          << m["detector"].value("endpoint", "") << ")\n";
    }
    out << "- created: " << m.value("created_at", "") << "\n\n";
  }
  if (a.total_instances > 0) {
    out << "Instances: " << a.total_instances << " planned, " << a.failed_instances
        << " failed and excluded from the counts.\n\n";
  }

  out << "## Chi-squared tests (" << a.table.groups[0] << " vs " << a.table.groups[1] << ")\n\n";
  out << "| variant | statistic | df | p-value |\n|---|---:|---:|---:|\n";
  for (const auto& o : a.outcomes) {
    if (o.result) {
      out << "| " << o.result->variant << " | " << fmt("%.6f", o.result->statistic) << " | " << o.result->df
          << " | " << format_p_value(o.result->p_value) << " |\n";
    } else {
      out << "| " << o.id << " | n/a | n/a | " << o.error << " |\n";
    }
  }
  out << "\n";

  auto list = [&](const std::string& group, bool positive) {
    out << "## Most " << group << "-skewed objects\n\n";
    std::size_t n = 0;
    for (const auto& d : a.ranking) {
      if (n == top_n) break;
      if ((positive && d.delta > 0) || (!positive && d.delta < 0)) {
        out << ++n << ". " << d.label << " (" << (d.delta > 0 ? "+" : "") << d.delta << ")\n";
      }
    }
    if (n == 0) out << "(none)\n";
    out << "\n";
  };
  list(a.table.groups[0], true);
  list(a.table.groups[1], false);
  return out.str();
}

bool emit_counts_table(const ContingencyTable& table, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "counts.csv", counts_csv(table));
  write_text(out_dir / "counts.md", counts_markdown(table));
  return true;
}

bool emit_bar_chart(const ContingencyTable& table, const FilterSpec& spec,
                    const std::filesystem::path& out_dir, const ReportStyle& style) {
  std::filesystem::create_directories(out_dir);
  const auto data = chart_data(table, spec, style);
  write_text(out_dir / "chart_data.json", data.dump(2) + "\n");
  write_text(out_dir / "chart.svg", chart_svg(data));
  return !data.contains("warning");
}

void emit_summary(const Analysis& analysis, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "summary.md", summary_markdown(analysis));
}

bool emit_report(const Analysis& analysis, const std::filesystem::path& out_dir, const ReportStyle& style) {
  emit_counts_table(analysis.table, out_dir);
  const bool chart_ok = emit_bar_chart(analysis.table, analysis.filter, out_dir, style);
  emit_summary(analysis, out_dir);
  return chart_ok;
}

}  // namespace biasprobe
