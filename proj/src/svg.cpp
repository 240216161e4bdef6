#include "ckpt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ckpt::svg {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 70;

constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double nice_max(double v) {
  if (!(v > 0)) return 1;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10 * p;
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
}

void y_axis(std::ostringstream& out, double y_max, const std::string& label) {
  const double plot_h = kHeight - kTop - kBottom;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y_max * i / 5.0;
    const double y = kHeight - kBottom - plot_h * i / 5.0;
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft << "\" y2=\"" << num(y)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 7 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(v)
        << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << num(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(kTop + plot_h / 2) << ")\">" << escape(label) << "</text>\n";
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render(const BarChart& chart) {
  std::ostringstream out;
  header(out, chart.title);
  double data_max = 0;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      data_max = std::max(data_max, s.values[i]);
      if (i < s.err_hi.size()) data_max = std::max(data_max, s.err_hi[i]);
    }
  }
  const double y_max = chart.y_max.value_or(nice_max(data_max));
  y_axis(out, y_max, chart.y_label);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const std::size_t ncat = std::max<std::size_t>(1, chart.categories.size());
  const std::size_t nser = std::max<std::size_t>(1, chart.series.size());
  const double group_w = plot_w / static_cast<double>(ncat);
  const double bar_w = group_w * 0.8 / static_cast<double>(nser);
  auto y_of = [&](double v) { return kHeight - kBottom - plot_h * std::clamp(v / y_max, 0.0, 1.0); };

  for (std::size_t c = 0; c < chart.categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const Series& ser = chart.series[s];
      if (c >= ser.values.size()) continue;
      const double x = gx + bar_w * static_cast<double>(s);
      const double y = y_of(ser.values[c]);
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.92) << "\" height=\""
          << num(kHeight - kBottom - y) << "\" fill=\"" << kPalette[s % std::size(kPalette)] << "\"><title>"
          << escape(ser.label + " " + chart.categories[c]) << ": " << tick_label(ser.values[c])
          << "</title></rect>\n";
      if (c < ser.err_lo.size() && c < ser.err_hi.size()) {
        const double cx = x + bar_w * 0.46;
        out << "<line class=\"err\" x1=\"" << num(cx) << "\" y1=\"" << num(y_of(ser.err_lo[c])) << "\" x2=\""
            << num(cx) << "\" y2=\"" << num(y_of(ser.err_hi[c])) << "\" stroke=\"black\"/>\n";
      }
    }
    out << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << num(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(chart.categories[c]) << "</text>\n";
  }
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const double lx = kLeft + 10 + 110 * static_cast<double>(s);
    out << "<rect x=\"" << num(lx) << "\" y=\"" << kHeight - 30 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[s % std::size(kPalette)] << "\"/>\n";
    out << "<text x=\"" << num(lx + 16) << "\" y=\"" << kHeight - 20 << "\">" << escape(chart.series[s].label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render(const LinePlot& plot) {
  std::ostringstream out;
  header(out, plot.title);
  double y_data = 0;
  for (double v : plot.y) y_data = std::max(y_data, v);
  const double y_max = nice_max(y_data);
  y_axis(out, y_max, plot.y_label);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double x_min = 0;
  double x_max = 1;
  if (!plot.x.empty()) {
    x_min = *std::min_element(plot.x.begin(), plot.x.end());
    x_max = *std::max_element(plot.x.begin(), plot.x.end());
  }
  if (x_max <= x_min) x_max = x_min + 1;
  auto px = [&](double x) { return kLeft + plot_w * (x - x_min) / (x_max - x_min); };
  auto py = [&](double y) { return kHeight - kBottom - plot_h * std::clamp(y / y_max, 0.0, 1.0); };

  for (double m : plot.markers) {
    out << "<line class=\"event\" x1=\"" << num(px(m)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(m))
        << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"#c44e52\" stroke-dasharray=\"3,3\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < plot.x.size() && i < plot.y.size(); ++i) {
    if (i) out << ' ';
    out << num(px(plot.x[i])) << ',' << num(py(plot.y[i]));
  }
  out << "\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = x_min + (x_max - x_min) * i / 4.0;
    out << "<text x=\"" << num(px(x)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
        << tick_label(x - x_min) << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << kHeight - kBottom + 34
      << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ckpt::svg
