#include "fscil/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fscil::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 70;

const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % 10];
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kHeight - kBottom - (y1 == y0 ? 0.5 : (y - y0) / (y1 - y0)) * (kHeight - kTop - kBottom);
  }
};

void header(std::ostringstream& out, const ChartOptions& o) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(o.title)
      << "</text>\n";
}

void footer(std::ostringstream& out, const ChartOptions& o) {
  out << "<text x=\"8\" y=\"" << kHeight - 8 << "\" font-size=\"9\" fill=\"#555\">" << escape(o.footer)
      << "</text>\n</svg>\n";
}

void axes(std::ostringstream& out, const Frame& f, const ChartOptions& o, bool x_ticks) {
  const double bottom = kHeight - kBottom, right = kWidth - kRight;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">" << tick(v)
        << "</text>\n";
    if (x_ticks) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << tick(xv)
          << "</text>\n";
    }
  }
  out << "<text x=\"" << (kLeft + right) / 2 << "\" y=\"" << bottom + 36 << "\" text-anchor=\"middle\">"
      << escape(o.x_label) << "</text>\n"
      << "<text transform=\"translate(18," << (kTop + bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(o.y_label) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    out << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
        << color(i) << "\"/>\n"
        << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << y + 1 << "\" font-size=\"10\">"
        << escape(series[i].label) << "</text>\n";
  }
}

std::pair<double, double> y_range(const std::vector<Series>& series, const ChartOptions& o) {
  double lo = o.y_min.value_or(INFINITY), hi = o.y_max.value_or(-INFINITY);
  for (const auto& s : series)
    for (double v : s.y) {
      if (!o.y_min) lo = std::min(lo, v);
      if (!o.y_max) hi = std::max(hi, v);
    }
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (lo == hi) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string line_chart(const std::vector<Series>& series, const ChartOptions& options) {
  double x0 = INFINITY, x1 = -INFINITY;
  for (const auto& s : series)
    for (double v : s.x) {
      x0 = std::min(x0, v);
      x1 = std::max(x1, v);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  const auto [y0, y1] = y_range(series, options);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream out;
  header(out, options);
  axes(out, f, options, true);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color(i) << "\" points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (options.step && k > 0) out << num(f.px(s.x[k])) << ',' << num(f.py(s.y[k - 1])) << ' ';
      out << num(f.px(s.x[k])) << ',' << num(f.py(s.y[k])) << ' ';
    }
    out << "\"/>\n";
    if (!options.step)
      for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k)
        out << "<circle r=\"3\" fill=\"" << color(i) << "\" cx=\"" << num(f.px(s.x[k])) << "\" cy=\""
            << num(f.py(s.y[k])) << "\"/>\n";
  }
  legend(out, series);
  footer(out, options);
  return out.str();
}

std::string bar_chart(const std::vector<std::string>& categories, const std::vector<Series>& series,
                      const ChartOptions& options) {
  auto [y0, y1] = y_range(series, options);
  y0 = std::min(y0, 0.0);
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(categories.size(), 1)), y0, y1};
  std::ostringstream out;
  header(out, options);
  axes(out, f, options, false);
  const double group = (kWidth - kLeft - kRight) / std::max<std::size_t>(categories.size(), 1);
  const double bar = group * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group * static_cast<double>(c) + group * 0.1;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (c >= series[i].y.size() || !std::isfinite(series[i].y[c])) continue;
      const double v = series[i].y[c];
      const double top = f.py(std::max(v, 0.0)), base = f.py(std::min(v, 0.0));
      out << "<rect x=\"" << num(gx + bar * static_cast<double>(i)) << "\" y=\"" << num(top) << "\" width=\""
          << num(bar * 0.95) << "\" height=\"" << num(base - top) << "\" fill=\"" << color(i) << "\"/>\n";
    }
    out << "<text x=\"" << num(gx + group * 0.4) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
  }
  legend(out, series);
  footer(out, options);
  return out.str();
}

std::string heatmap(const std::vector<std::vector<double>>& values, const std::vector<std::string>& labels,
                    const ChartOptions& options) {
  const std::size_t n = values.size();
  double hi = 0.0;
  for (const auto& row : values)
    for (double v : row) hi = std::max(hi, v);
  const double size = std::min(kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  const double cell = n ? size / static_cast<double>(n) : size;
  std::ostringstream out;
  header(out, options);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < values[r].size(); ++c) {
      const double t = hi > 0 ? values[r][c] / hi : 0.0;
      const int shade = static_cast<int>(std::lround(255 * (1.0 - t)));
      out << "<rect x=\"" << num(kLeft + cell * static_cast<double>(c)) << "\" y=\""
          << num(kTop + cell * static_cast<double>(r)) << "\" width=\"" << num(cell) << "\" height=\"" << num(cell)
          << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\"><title>" << tick(values[r][c])
          << "</title></rect>\n";
    }
    if (r < labels.size()) {
      out << "<text x=\"" << kLeft - 4 << "\" y=\"" << num(kTop + cell * (static_cast<double>(r) + 0.6))
          << "\" text-anchor=\"end\" font-size=\"9\">" << escape(labels[r]) << "</text>\n"
          << "<text x=\"" << num(kLeft + cell * (static_cast<double>(r) + 0.5)) << "\" y=\"" << num(kTop + size + 12)
          << "\" text-anchor=\"middle\" font-size=\"9\">" << escape(labels[r]) << "</text>\n";
    }
  }
  out << "<text x=\"" << kLeft + size / 2 << "\" y=\"" << kTop + size + 30 << "\" text-anchor=\"middle\">"
      << escape(options.x_label) << "</text>\n"
      << "<text transform=\"translate(18," << kTop + size / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(options.y_label) << "</text>\n";
  footer(out, options);
  return out.str();
}

}  // namespace fscil::svg
