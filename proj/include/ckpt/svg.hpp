#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ckpt::svg {

struct Series {
  std::string label;
  std::vector<double> values;
  // Optional error bars, same length as values.
  std::vector<double> err_lo;
  std::vector<double> err_hi;
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;
  std::optional<double> y_max;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> markers;  // x positions of vertical lines
};

std::string render(const BarChart& chart);
std::string render(const LinePlot& plot);
std::string escape(const std::string& text);

void write_file(const std::string& path, const std::string& content);

}  // namespace ckpt::svg
