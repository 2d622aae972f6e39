#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fscil::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string footer;
  std::optional<double> y_min;
  std::optional<double> y_max;
  bool step = false;  // draw as a staircase (CDFs)
};

std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

// One group of bars per category; each series contributes one bar per group.
std::string bar_chart(const std::vector<std::string>& categories, const std::vector<Series>& series,
                      const ChartOptions& options);

// Row-major cell values; rows and columns share `labels`.
std::string heatmap(const std::vector<std::vector<double>>& values, const std::vector<std::string>& labels,
                    const ChartOptions& options);

std::string escape(const std::string& text);

}  // namespace fscil::svg
