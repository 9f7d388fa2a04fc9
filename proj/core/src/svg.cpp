#include "fedsurv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fedsurv {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 48;

const char* kPalette[] = {"#2ca02c", "#1f77b4", "#ff7f0e", "#d62728", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Frame {
  double x_min, x_max, y_min, y_max;
  double x(double v) const {
    return kLeft + (v - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight);
  }
  double y(double v) const {
    return kHeight - kBottom - (v - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom);
  }
};

std::string open_svg(const std::string& title) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num_label(kWidth) + "\" height=\"" +
       num_label(kHeight) + "\" viewBox=\"0 0 " + num_label(kWidth) + " " + num_label(kHeight) +
       "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       title + "</text>\n";
  return s;
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label,
                 const std::vector<double>& x_ticks, const std::vector<double>& y_ticks) {
  std::string s;
  s += "<g stroke=\"#333\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" +
       num(kWidth - kRight) + "\" y2=\"" + num(kHeight - kBottom) + "\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
       num(kHeight - kBottom) + "\"/>\n";
  for (double t : x_ticks) {
    s += "<line x1=\"" + num(f.x(t)) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" +
         num(f.x(t)) + "\" y2=\"" + num(kHeight - kBottom + 4) + "\"/>\n";
    s += "<text x=\"" + num(f.x(t)) + "\" y=\"" + num(kHeight - kBottom + 16) +
         "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#333\">" + num_label(t) + "</text>\n";
  }
  for (double t : y_ticks) {
    s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(f.y(t)) + "\" x2=\"" + num(kLeft) +
         "\" y2=\"" + num(f.y(t)) + "\"/>\n";
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(f.y(t) + 4) +
         "\" text-anchor=\"end\" stroke=\"none\" fill=\"#333\">" + num_label(t) + "</text>\n";
  }
  s += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 10) +
       "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#333\">" + x_label + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((kTop + kHeight - kBottom) / 2) +
       "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#333\" transform=\"rotate(-90 16 " +
       num((kTop + kHeight - kBottom) / 2) + ")\">" + y_label + "</text>\n";
  s += "</g>\n";
  return s;
}

}  // namespace

std::string auc_plot_svg(const std::vector<std::pair<std::string, const EvaluationReport*>>& series,
                         const std::string& title) {
  double x_min = 0.0, x_max = 1.0;
  bool has_point = false;
  for (const auto& [name, report] : series) {
    for (const auto& pt : report->auc_t) {
      if (!has_point) {
        x_min = x_max = pt.t;
        has_point = true;
      }
      x_min = std::min(x_min, pt.t);
      x_max = std::max(x_max, pt.t);
    }
  }
  if (!has_point) x_max = 1.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  Frame f{x_min, x_max, 0.0, 1.0};

  std::vector<double> x_ticks;
  const double step = std::max(1.0, std::floor((x_max - x_min) / 6.0));
  for (double t = std::ceil(x_min); t <= x_max + 1e-9; t += step) x_ticks.push_back(t);

  std::string s = open_svg(title);
  s += axes(f, "time (days)", "AUC(t)", x_ticks, {0.0, 0.25, 0.5, 0.75, 1.0});

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& report = *series[k].second;
    const char* color = kPalette[k % 6];
    if (report.auc_t.empty()) continue;
    // CI band.
    std::string band = "<polygon fill=\"" + std::string(color) + "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (const auto& pt : report.auc_t) band += num(f.x(pt.t)) + "," + num(f.y(pt.ci_high)) + " ";
    for (auto it = report.auc_t.rbegin(); it != report.auc_t.rend(); ++it)
      band += num(f.x(it->t)) + "," + num(f.y(it->ci_low)) + " ";
    band += "\"/>\n";
    s += band;
    // Curve.
    std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    for (const auto& pt : report.auc_t) line += num(f.x(pt.t)) + "," + num(f.y(pt.auc)) + " ";
    line += "\"/>\n";
    s += line;
    // iAUC reference.
    s += "<line stroke=\"" + std::string(color) + "\" stroke-dasharray=\"6 4\" x1=\"" +
         num(kLeft) + "\" y1=\"" + num(f.y(report.iauc)) + "\" x2=\"" + num(kWidth - kRight) +
         "\" y2=\"" + num(f.y(report.iauc)) + "\"/>\n";
    // Legend.
    const double ly = kTop + 16.0 * static_cast<double>(k);
    s += "<rect x=\"" + num(kLeft + 8) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"4\" fill=\"" +
         color + "\"/>\n";
    s += "<text x=\"" + num(kLeft + 26) + "\" y=\"" + num(ly + 6) +
         "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">" + series[k].first +
         " (iAUC " + num(report.iauc) + ")</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string parsimony_plot_svg(const ParsimonyCurve& curve, const std::string& title) {
  double y_max = 0.0;
  for (const auto& pt : curve.points) y_max = std::max(y_max, pt.psi);
  if (y_max <= 0.0) y_max = 1.0;
  const int m_max = curve.points.empty() ? 1 : curve.points.back().m;
  Frame f{0.0, static_cast<double>(m_max) + 1.0, 0.0, 1.05 * y_max};

  std::vector<double> x_ticks, y_ticks;
  for (int m = 1; m <= m_max; ++m) x_ticks.push_back(m);
  for (int i = 0; i <= 4; ++i) y_ticks.push_back(1.05 * y_max * i / 4.0);

  std::string s = open_svg(title);
  s += axes(f, "number of variables", "weighted iAUC", x_ticks, y_ticks);
  const double bar_width = 0.7 * (f.x(1.0) - f.x(0.0));
  for (const auto& pt : curve.points) {
    const double x0 = f.x(pt.m) - bar_width / 2.0;
    const double y0 = f.y(pt.psi);
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(bar_width) +
         "\" height=\"" + num(f.y(0.0) - y0) + "\" fill=\"#1f77b4\" fill-opacity=\"0.85\"/>\n";
    s += "<text x=\"" + num(f.x(pt.m)) + "\" y=\"" + num(y0 - 4) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\">" +
         num(pt.psi) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace fedsurv
