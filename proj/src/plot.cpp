#include "twin/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace twin::plot {

namespace {

constexpr int kCell = 40;
constexpr int kLeft = 80;
constexpr int kTop = 40;
constexpr int kBottom = 60;
constexpr int kRight = 20;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

void header(std::ostringstream& os, int width, int height, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
        "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>"
        "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#888888\" stroke-width=\"2\"/></pattern></defs>\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
     << "</text>\n";
}

struct Frame {
  std::size_t rows;
  std::size_t cols;
  int width() const { return kLeft + static_cast<int>(cols) * kCell + kRight; }
  int height() const { return kTop + static_cast<int>(rows) * kCell + kBottom; }
  int x(std::size_t col) const { return kLeft + static_cast<int>(col) * kCell; }
  // Row 0 (smallest WD) sits at the bottom.
  int y(std::size_t row) const { return kTop + static_cast<int>(rows - 1 - row) * kCell; }
};

void axes(std::ostringstream& os, const Frame& f, const HyperGrid& grid) {
  for (std::size_t c = 0; c < f.cols; ++c) {
    os << "<text class=\"xtick\" x=\"" << f.x(c) + kCell / 2 << "\" y=\"" << f.y(0) + kCell + 14
       << "\" text-anchor=\"middle\">" << format_tick(grid.lr_values()[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < f.rows; ++r) {
    os << "<text class=\"ytick\" x=\"" << kLeft - 6 << "\" y=\"" << f.y(r) + kCell / 2 + 4
       << "\" text-anchor=\"end\">" << format_tick(grid.wd_values()[r]) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + static_cast<int>(f.cols) * kCell / 2 << "\" y=\"" << f.height() - 14
     << "\" text-anchor=\"middle\">learning rate</text>\n";
  os << "<text x=\"14\" y=\"" << kTop + static_cast<int>(f.rows) * kCell / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kTop + static_cast<int>(f.rows) * kCell / 2
     << ")\">weight decay</text>\n";
}

void cell_rect(std::ostringstream& os, const Frame& f, std::size_t r, std::size_t c, const std::string& fill,
               const char* cls) {
  os << "<rect class=\"" << cls << "\" x=\"" << f.x(c) << "\" y=\"" << f.y(r) << "\" width=\"" << kCell
     << "\" height=\"" << kCell << "\" fill=\"" << fill << "\" data-row=\"" << r << "\" data-col=\"" << c
     << "\"/>\n";
}

void outline(std::ostringstream& os, const Frame& f, std::optional<GridCell> selected) {
  if (!selected) return;
  os << "<rect class=\"selected\" x=\"" << f.x(selected->col) + 1 << "\" y=\"" << f.y(selected->row) + 1
     << "\" width=\"" << kCell - 2 << "\" height=\"" << kCell - 2
     << "\" fill=\"none\" stroke=\"#ff0000\" stroke-width=\"3\"/>\n";
}

}  // namespace

std::string format_tick(double v) {
  if (v == 0.0) return "0";
  if (!std::isfinite(v)) return "nan";
  int exp = static_cast<int>(std::floor(std::log10(std::abs(v))));
  double mant = v / std::pow(10.0, exp);
  mant = std::round(mant * 10.0) / 10.0;
  if (std::abs(mant) >= 10.0) {
    mant /= 10.0;
    ++exp;
  }
  char buf[32];
  if (std::abs(mant - std::round(mant)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.0fe%d", mant, exp);
  } else {
    std::snprintf(buf, sizeof buf, "%.1fe%d", mant, exp);
  }
  return buf;
}

std::size_t ramp_bin(double v, double lo, double hi) {
  if (!(hi > lo)) return kRamp.size() / 2;
  const double t = (v - lo) / (hi - lo);
  const auto bin = static_cast<long>(std::floor(t * static_cast<double>(kRamp.size())));
  return static_cast<std::size_t>(std::clamp<long>(bin, 0, static_cast<long>(kRamp.size()) - 1));
}

std::string heatmap_svg(const HyperGrid& grid, const RealMatrix& values, const Mask* masked,
                        std::optional<GridCell> selected, const std::string& title) {
  if (!values.same_shape(grid.rows(), grid.cols())) throw std::invalid_argument("heatmap: shape mismatch");
  if (masked != nullptr && !masked->same_shape(values)) throw std::invalid_argument("heatmap: mask shape mismatch");
  auto hidden = [&](std::size_t i) {
    return !std::isfinite(values[i]) || (masked != nullptr && (*masked)[i]);
  };
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (hidden(i)) continue;
    lo = any ? std::min(lo, values[i]) : values[i];
    hi = any ? std::max(hi, values[i]) : values[i];
    any = true;
  }
  const Frame f{grid.rows(), grid.cols()};
  std::ostringstream os;
  header(os, f.width(), f.height(), title);
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      const std::size_t i = r * f.cols + c;
      if (hidden(i)) {
        cell_rect(os, f, r, c, "url(#hatch)", "masked");
      } else {
        cell_rect(os, f, r, c, kRamp[ramp_bin(values[i], lo, hi)], "cell");
      }
    }
  }
  axes(os, f, grid);
  outline(os, f, selected);
  os << "</svg>\n";
  return os.str();
}

std::string labels_svg(const HyperGrid& grid, const IntMatrix& labels,
                       std::optional<GridCell> selected, const std::string& title) {
  if (!labels.same_shape(grid.rows(), grid.cols())) throw std::invalid_argument("labels: shape mismatch");
  const Frame f{grid.rows(), grid.cols()};
  std::ostringstream os;
  header(os, f.width(), f.height(), title);
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      const int id = labels(r, c);
      if (id < 0) {
        cell_rect(os, f, r, c, "url(#hatch)", "masked");
      } else {
        cell_rect(os, f, r, c, kPalette[static_cast<std::size_t>(id) % kPalette.size()], "cell");
      }
    }
  }
  axes(os, f, grid);
  outline(os, f, selected);
  os << "</svg>\n";
  return os.str();
}

std::string norm_vs_test_svg(const RealMatrix& theta, const RealMatrix& test_acc,
                             const IntMatrix& labels, int region_id,
                             std::optional<GridCell> selected, const std::string& title) {
  if (!theta.same_shape(test_acc) || !theta.same_shape(labels)) {
    throw std::invalid_argument("norm_vs_test: shape mismatch");
  }
  std::vector<std::size_t> pts;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (labels[i] == region_id && std::isfinite(theta[i]) && std::isfinite(test_acc[i])) pts.push_back(i);
  }
  constexpr int kW = 360;
  constexpr int kH = 300;
  constexpr int kPlotL = 60;
  constexpr int kPlotR = 340;
  constexpr int kPlotT = 40;
  constexpr int kPlotB = 250;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!pts.empty()) {
    x0 = x1 = theta[pts[0]];
    y0 = y1 = test_acc[pts[0]];
    for (std::size_t i : pts) {
      x0 = std::min(x0, theta[i]);
      x1 = std::max(x1, theta[i]);
      y0 = std::min(y0, test_acc[i]);
      y1 = std::max(y1, test_acc[i]);
    }
  }
  if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  auto px = [&](double v) { return kPlotL + (v - x0) / (x1 - x0) * (kPlotR - kPlotL); };
  auto py = [&](double v) { return kPlotB - (v - y0) / (y1 - y0) * (kPlotB - kPlotT); };

  std::ostringstream os;
  header(os, kW, kH, title);
  os << "<line x1=\"" << kPlotL << "\" y1=\"" << kPlotB << "\" x2=\"" << kPlotR << "\" y2=\"" << kPlotB
     << "\" stroke=\"#000000\"/>\n";
  os << "<line x1=\"" << kPlotL << "\" y1=\"" << kPlotT << "\" x2=\"" << kPlotL << "\" y2=\"" << kPlotB
     << "\" stroke=\"#000000\"/>\n";
  os << "<text x=\"" << kPlotL << "\" y=\"" << kPlotB + 14 << "\" text-anchor=\"middle\">" << num(x0) << "</text>\n";
  os << "<text x=\"" << kPlotR << "\" y=\"" << kPlotB + 14 << "\" text-anchor=\"middle\">" << num(x1) << "</text>\n";
  os << "<text x=\"" << kPlotL - 4 << "\" y=\"" << kPlotB << "\" text-anchor=\"end\">" << num(y0) << "</text>\n";
  os << "<text x=\"" << kPlotL - 4 << "\" y=\"" << kPlotT + 4 << "\" text-anchor=\"end\">" << num(y1) << "</text>\n";
  os << "<text x=\"" << (kPlotL + kPlotR) / 2 << "\" y=\"" << kH - 12
     << "\" text-anchor=\"middle\">parameter norm</text>\n";
  os << "<text x=\"14\" y=\"" << (kPlotT + kPlotB) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << (kPlotT + kPlotB) / 2 << ")\">test accuracy</text>\n";
  const std::size_t cols = theta.cols();
  for (std::size_t i : pts) {
    const bool sel = selected && selected->row * cols + selected->col == i;
    os << "<circle class=\"point\" cx=\"" << num(px(theta[i])) << "\" cy=\"" << num(py(test_acc[i]))
       << "\" r=\"" << (sel ? 6 : 4) << "\" fill=\"" << (sel ? "#ff0000" : kPalette[0]) << "\" data-row=\""
       << i / cols << "\" data-col=\"" << i % cols << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace twin::plot
