#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace csvgd {

/// Minimal static SVG scatter plot in data coordinates (y up).
class SvgPlot {
 public:
  SvgPlot(double xmin, double xmax, double ymin, double ymax, int pixels = 480);

  void add_point(const Eigen::Vector2d& p, double radius_px = 2.5,
                 const std::string& fill = "#1f77b4");
  void add_circle(const Eigen::Vector2d& center, double radius, const std::string& stroke,
                  const std::string& fill = "none");
  void add_rect(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, const std::string& stroke);
  void add_polyline(const std::vector<Eigen::Vector2d>& pts, const std::string& stroke,
                    double width_px = 1.0, double opacity = 0.6);
  void set_title(std::string title) { title_ = std::move(title); }

  [[nodiscard]] std::string render() const;

 private:
  [[nodiscard]] double px(double x) const;
  [[nodiscard]] double py(double y) const;

  double xmin_, xmax_, ymin_, ymax_;
  int pixels_;
  double scale_;
  std::string title_;
  std::vector<std::string> elements_;
};

}  // namespace csvgd
