#include "reachbound/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reachbound::plot {

namespace {

const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const Chart& c, int width, int height) {
  const double ml = 70, mr = 20, mt = 36, mb = 52;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto ty = [&](double y) { return c.log_y ? std::log10(y) : y; };
  for (const auto& s : c.series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double e = k < s.err.size() ? s.err[k] : 0.0;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      const double lo = s.y[k] - e, hi = s.y[k] + e;
      if (!c.log_y || lo > 0) y0 = std::min(y0, ty(lo));
      if (!c.log_y || s.y[k] > 0) y0 = std::min(y0, ty(s.y[k]));
      if (!c.log_y || hi > 0) y1 = std::max(y1, ty(hi));
    }
  if (c.vline) {
    x0 = std::min(x0, *c.vline);
    x1 = std::max(x1, *c.vline);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0) || !std::isfinite(y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double xpad = 0.05 * (x1 - x0), ypad = 0.05 * (y1 - y0);
  x0 -= xpad, x1 += xpad, y0 -= ypad, y1 += ypad;

  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(c.title) << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  // ticks
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + (x1 - x0) * t / 5.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">"
      << std::round(xv * 100) / 100 << "</text>\n";
    const double yt = y0 + (y1 - y0) * t / 5.0;
    const double yv = c.log_y ? std::pow(10.0, yt) : yt;
    o << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
      << "</text>\n";
  }
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
    << escape(c.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << mt + ph / 2 << ")\">" << escape(c.y_label) << "</text>\n";

  if (c.vline) {
    o << "<line x1=\"" << px(*c.vline) << "\" y1=\"" << mt << "\" x2=\"" << px(*c.vline)
      << "\" y2=\"" << mt + ph << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    if (!c.vline_label.empty())
      o << "<text x=\"" << px(*c.vline) + 4 << "\" y=\"" << mt + 14 << "\" fill=\"gray\">"
        << escape(c.vline_label) << "</text>\n";
  }

  for (std::size_t si = 0; si < c.series.size(); ++si) {
    const auto& s = c.series[si];
    const char* col = kColours[si % std::size(kColours)];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k)
      if (!c.log_y || s.y[k] > 0) o << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    o << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (c.log_y && !(s.y[k] > 0)) continue;
      o << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\"" << col
        << "\"/>\n";
      if (k < s.err.size() && s.err[k] > 0) {
        const double lo = c.log_y ? std::max(s.y[k] - s.err[k], s.y[k] * 1e-3) : s.y[k] - s.err[k];
        o << "<line x1=\"" << px(s.x[k]) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(s.x[k])
          << "\" y2=\"" << py(s.y[k] + s.err[k]) << "\" stroke=\"" << col << "\"/>\n";
      }
    }
    o << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * si << "\" text-anchor=\"end\" fill=\""
      << col << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const Chart& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << render_svg(c);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace reachbound::plot
