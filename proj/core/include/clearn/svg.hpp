#pragma once

#include <string>
#include <vector>

namespace clearn {

// Minimal deterministic SVG chart writer: fixed canvas geometry, fixed-precision
// coordinate formatting, no timestamps, so identical input yields identical bytes.
class SvgPanel {
 public:
  struct Point {
    double x, y;
  };

  SvgPanel(std::string title, std::string x_label, std::string y_label);

  void set_range(double x_min, double x_max, double y_min, double y_max);
  void add_line(std::vector<Point> pts, std::string color, bool dashed = false,
                std::string label = "");
  void add_scatter(std::vector<Point> pts, std::string color, double radius = 2.5);
  void add_vline(double x, std::string color, bool dashed = true, std::string label = "");
  void add_hline(double y, std::string color, bool dashed = true, std::string label = "");

  friend class SvgFigure;

 private:
  struct Series {
    enum class Kind { kLine, kScatter, kVLine, kHLine } kind;
    std::vector<Point> pts;
    std::string color;
    bool dashed = false;
    double radius = 2.5;
    std::string label;
  };

  std::string title_, x_label_, y_label_;
  double x_min_ = 0.0, x_max_ = 1.0, y_min_ = 0.0, y_max_ = 1.0;
  bool explicit_range_ = false;
  std::vector<Series> series_;

  void grow_range();
};

class SvgFigure {
 public:
  SvgPanel& add_panel(std::string title, std::string x_label, std::string y_label);
  std::string render() const;

 private:
  std::vector<SvgPanel> panels_;
};

}  // namespace clearn
