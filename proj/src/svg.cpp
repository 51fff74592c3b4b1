#include "csvgd/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

SvgPlot::SvgPlot(double xmin, double xmax, double ymin, double ymax, int pixels)
    : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax), pixels_(pixels) {
  if (!(xmax > xmin) || !(ymax > ymin) || pixels < 16) {
    throw ParameterError("svg plot needs a nonempty data range");
  }
  scale_ = static_cast<double>(pixels_) / std::max(xmax_ - xmin_, ymax_ - ymin_);
}

double SvgPlot::px(double x) const { return (x - xmin_) * scale_; }
double SvgPlot::py(double y) const { return (ymax_ - y) * scale_; }

void SvgPlot::add_point(const Eigen::Vector2d& p, double radius_px, const std::string& fill) {
  elements_.push_back("<circle cx=\"" + fmt(px(p.x())) + "\" cy=\"" + fmt(py(p.y())) + "\" r=\"" +
                      fmt(radius_px) + "\" fill=\"" + fill + "\" fill-opacity=\"0.8\"/>");
}

void SvgPlot::add_circle(const Eigen::Vector2d& center, double radius, const std::string& stroke,
                         const std::string& fill) {
  elements_.push_back("<circle cx=\"" + fmt(px(center.x())) + "\" cy=\"" + fmt(py(center.y())) +
                      "\" r=\"" + fmt(radius * scale_) + "\" stroke=\"" + stroke + "\" fill=\"" +
                      fill + "\" stroke-width=\"1.5\"/>");
}

void SvgPlot::add_rect(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                       const std::string& stroke) {
  elements_.push_back("<rect x=\"" + fmt(px(lo.x())) + "\" y=\"" + fmt(py(hi.y())) +
                      "\" width=\"" + fmt((hi.x() - lo.x()) * scale_) + "\" height=\"" +
                      fmt((hi.y() - lo.y()) * scale_) + "\" stroke=\"" + stroke +
                      "\" fill=\"none\" stroke-dasharray=\"4 3\"/>");
}

void SvgPlot::add_polyline(const std::vector<Eigen::Vector2d>& pts, const std::string& stroke,
                           double width_px, double opacity) {
  std::string points;
  for (const Eigen::Vector2d& p : pts) {
    if (!points.empty()) points += ' ';
    points += fmt(px(p.x())) + "," + fmt(py(p.y()));
  }
  elements_.push_back("<polyline points=\"" + points + "\" stroke=\"" + stroke +
                      "\" stroke-width=\"" + fmt(width_px) + "\" stroke-opacity=\"" +
                      fmt(opacity) + "\" fill=\"none\"/>");
}

std::string SvgPlot::render() const {
  const std::string w = fmt((xmax_ - xmin_) * scale_);
  const std::string h = fmt((ymax_ - ymin_) * scale_);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title_.empty()) {
    out << "<text x=\"6\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" << title_
        << "</text>\n";
  }
  for (const std::string& e : elements_) out << e << '\n';
  out << "</svg>\n";
  return out.str();
}

}  // namespace csvgd
