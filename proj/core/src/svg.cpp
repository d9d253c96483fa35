#include "clearn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace clearn {
namespace {

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 300.0;
constexpr double kMarginL = 56.0;
constexpr double kMarginR = 16.0;
constexpr double kMarginT = 34.0;
constexpr double kMarginB = 44.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

SvgPanel::SvgPanel(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPanel::set_range(double x_min, double x_max, double y_min, double y_max) {
  x_min_ = x_min;
  x_max_ = x_max;
  y_min_ = y_min;
  y_max_ = y_max;
  explicit_range_ = true;
}

void SvgPanel::add_line(std::vector<Point> pts, std::string color, bool dashed,
                        std::string label) {
  series_.push_back({Series::Kind::kLine, std::move(pts), std::move(color), dashed, 0.0,
                     std::move(label)});
}

void SvgPanel::add_scatter(std::vector<Point> pts, std::string color, double radius) {
  series_.push_back({Series::Kind::kScatter, std::move(pts), std::move(color), false,
                     radius, ""});
}

void SvgPanel::add_vline(double x, std::string color, bool dashed, std::string label) {
  series_.push_back({Series::Kind::kVLine, {{x, 0.0}}, std::move(color), dashed, 0.0,
                     std::move(label)});
}

void SvgPanel::add_hline(double y, std::string color, bool dashed, std::string label) {
  series_.push_back({Series::Kind::kHLine, {{0.0, y}}, std::move(color), dashed, 0.0,
                     std::move(label)});
}

void SvgPanel::grow_range() {
  if (explicit_range_) return;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  bool any = false;
  for (const auto& s : series_) {
    if (s.kind == Series::Kind::kVLine) {
      xmin = std::min(xmin, s.pts[0].x);
      xmax = std::max(xmax, s.pts[0].x);
      continue;
    }
    if (s.kind == Series::Kind::kHLine) {
      ymin = std::min(ymin, s.pts[0].y);
      ymax = std::max(ymax, s.pts[0].y);
      continue;
    }
    for (const auto& p : s.pts) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
      any = true;
    }
  }
  if (!any) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double xpad = 0.06 * (xmax - xmin);
  const double ypad = 0.08 * (ymax - ymin);
  x_min_ = xmin - xpad;
  x_max_ = xmax + xpad;
  y_min_ = std::min(0.0, ymin - ypad);
  y_max_ = ymax + ypad;
}

SvgPanel& SvgFigure::add_panel(std::string title, std::string x_label, std::string y_label) {
  panels_.emplace_back(SvgPanel(std::move(title), std::move(x_label), std::move(y_label)));
  return panels_.back();
}

std::string SvgFigure::render() const {
  std::vector<SvgPanel> panels = panels_;
  for (auto& p : panels) p.grow_range();

  const double width = kPanelW * panels.size();
  const double height = kPanelH;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const SvgPanel& p = panels[pi];
    const double x0 = pi * kPanelW + kMarginL;
    const double y0 = kMarginT;
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    auto sx = [&](double x) {
      return x0 + (x - p.x_min_) / (p.x_max_ - p.x_min_) * plot_w;
    };
    auto sy = [&](double y) {
      return y0 + plot_h - (y - p.y_min_) / (p.y_max_ - p.y_min_) * plot_h;
    };

    out << "<g font-family=\"Helvetica\" font-size=\"11\">\n";
    out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(plot_w)
        << "\" height=\"" << fmt(plot_h)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fmt(x0 + plot_w / 2) << "\" y=\"" << fmt(y0 - 12)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << p.title_ << "</text>\n";
    out << "<text x=\"" << fmt(x0 + plot_w / 2) << "\" y=\"" << fmt(y0 + plot_h + 32)
        << "\" text-anchor=\"middle\">" << p.x_label_ << "</text>\n";
    out << "<text x=\"" << fmt(x0 - 42) << "\" y=\"" << fmt(y0 + plot_h / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << fmt(x0 - 42) << " "
        << fmt(y0 + plot_h / 2) << ")\">" << p.y_label_ << "</text>\n";

    for (int t = 0; t <= 4; ++t) {
      const double fx = p.x_min_ + (p.x_max_ - p.x_min_) * t / 4.0;
      const double fy = p.y_min_ + (p.y_max_ - p.y_min_) * t / 4.0;
      out << "<line x1=\"" << fmt(sx(fx)) << "\" y1=\"" << fmt(y0 + plot_h) << "\" x2=\""
          << fmt(sx(fx)) << "\" y2=\"" << fmt(y0 + plot_h + 4)
          << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << fmt(y0 + plot_h + 16)
          << "\" text-anchor=\"middle\">" << fmt_tick(fx) << "</text>\n";
      out << "<line x1=\"" << fmt(x0 - 4) << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\""
          << fmt(x0) << "\" y2=\"" << fmt(sy(fy)) << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(sy(fy) + 4)
          << "\" text-anchor=\"end\">" << fmt_tick(fy) << "</text>\n";
    }

    double legend_y = y0 + 14;
    for (const auto& s : p.series_) {
      const char* dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
      switch (s.kind) {
        case SvgPanel::Series::Kind::kLine: {
          out << "<polyline fill=\"none\" stroke=\"" << s.color
              << "\" stroke-width=\"1.8\"" << dash << " points=\"";
          for (const auto& pt : s.pts) out << fmt(sx(pt.x)) << ',' << fmt(sy(pt.y)) << ' ';
          out << "\"/>\n";
          break;
        }
        case SvgPanel::Series::Kind::kScatter:
          for (const auto& pt : s.pts)
            out << "<circle cx=\"" << fmt(sx(pt.x)) << "\" cy=\"" << fmt(sy(pt.y))
                << "\" r=\"" << fmt(s.radius) << "\" fill=\"" << s.color
                << "\" fill-opacity=\"0.55\"/>\n";
          break;
        case SvgPanel::Series::Kind::kVLine:
          out << "<line x1=\"" << fmt(sx(s.pts[0].x)) << "\" y1=\"" << fmt(y0)
              << "\" x2=\"" << fmt(sx(s.pts[0].x)) << "\" y2=\"" << fmt(y0 + plot_h)
              << "\" stroke=\"" << s.color << "\" stroke-width=\"1.4\"" << dash
              << "/>\n";
          break;
        case SvgPanel::Series::Kind::kHLine:
          out << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(sy(s.pts[0].y))
              << "\" x2=\"" << fmt(x0 + plot_w) << "\" y2=\"" << fmt(sy(s.pts[0].y))
              << "\" stroke=\"" << s.color << "\" stroke-width=\"1.4\"" << dash
              << "/>\n";
          break;
      }
      if (!s.label.empty()) {
        out << "<line x1=\"" << fmt(x0 + plot_w - 120) << "\" y1=\"" << fmt(legend_y - 4)
            << "\" x2=\"" << fmt(x0 + plot_w - 100) << "\" y2=\"" << fmt(legend_y - 4)
            << "\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"" << dash << "/>\n";
        out << "<text x=\"" << fmt(x0 + plot_w - 96) << "\" y=\"" << fmt(legend_y)
            << "\">" << s.label << "</text>\n";
        legend_y += 14;
      }
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace clearn
