#include "evmarl/plot.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace evmarl {

namespace {

constexpr int kMargin = 48;
constexpr int kLegendWidth = 190;

struct Style {
  const char* color;
  const char* dash;
  const char* marker;  // circle, square or diamond
};

constexpr std::array<Style, 6> kStyles = {{
    {"#1f77b4", "", "circle"},
    {"#d62728", "6,3", "square"},
    {"#2ca02c", "2,3", "diamond"},
    {"#9467bd", "8,3,2,3", "circle"},
    {"#ff7f0e", "4,4", "square"},
    {"#8c564b", "1,2", "diamond"},
}};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
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

class Canvas {
 public:
  explicit Canvas(int size) : size_(size) {}
  double x(double start) const { return kMargin + start * size_; }
  double y(double end) const { return kMargin + (1.0 - end) * size_; }

 private:
  int size_;
};

void marker(std::ostringstream& o, const Style& s, double cx, double cy) {
  if (std::string(s.marker) == "square") {
    o << "<rect x=\"" << num(cx - 4) << "\" y=\"" << num(cy - 4) << "\" width=\"8\" height=\"8\" fill=\""
      << s.color << "\"/>\n";
  } else if (std::string(s.marker) == "diamond") {
    o << "<polygon points=\"" << num(cx) << "," << num(cy - 5) << " " << num(cx + 5) << "," << num(cy) << " "
      << num(cx) << "," << num(cy + 5) << " " << num(cx - 5) << "," << num(cy) << "\" fill=\"" << s.color
      << "\"/>\n";
  } else {
    o << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"4\" fill=\"" << s.color << "\"/>\n";
  }
}

std::string star_points(double cx, double cy, double r) {
  std::ostringstream o;
  for (int i = 0; i < 10; ++i) {
    const double a = -M_PI / 2 + i * M_PI / 5;
    const double rr = (i % 2 == 0) ? r : r * 0.45;
    if (i) o << ' ';
    o << num(cx + rr * std::cos(a)) << ',' << num(cy + rr * std::sin(a));
  }
  return o.str();
}

}  // namespace

std::string render_2dstb(const std::vector<PlotTrace>& traces, const std::optional<Interval>& gt,
                         const PlotOptions& opts) {
  const int size = opts.size;
  const Canvas c(size);
  const int width = 2 * kMargin + size + kLegendWidth;
  const int height = 2 * kMargin + size;
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opts.title.empty())
    o << "<text x=\"" << kMargin << "\" y=\"" << kMargin / 2 << "\" font-size=\"14\">" << escape(opts.title)
      << "</text>\n";

  // Feasible half (end >= start) shaded.
  o << "<polygon points=\"" << num(c.x(0)) << "," << num(c.y(0)) << " " << num(c.x(0)) << "," << num(c.y(1))
    << " " << num(c.x(1)) << "," << num(c.y(1)) << "\" fill=\"#eeeeee\"/>\n";
  o << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << size << "\" height=\"" << size
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(c.x(0)) << "\" y1=\"" << num(c.y(0)) << "\" x2=\"" << num(c.x(1)) << "\" y2=\""
    << num(c.y(1)) << "\" stroke=\"#999999\" stroke-dasharray=\"3,3\"/>\n";
  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    o << "<text x=\"" << num(c.x(v)) << "\" y=\"" << num(c.y(0) + 16) << "\" text-anchor=\"middle\">" << num(v)
      << "</text>\n";
    o << "<text x=\"" << num(c.x(0) - 6) << "\" y=\"" << num(c.y(v) + 4) << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  }
  o << "<text x=\"" << num(c.x(0.5)) << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">start</text>\n";
  o << "<text x=\"14\" y=\"" << num(c.y(0.5)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << num(c.y(0.5)) << ")\">end</text>\n";

  for (std::size_t a = 0; a < traces.size(); ++a) {
    const Style& s = kStyles[a % kStyles.size()];
    const auto& tr = traces[a];
    o << "<g class=\"agent\" data-label=\"" << escape(tr.label) << "\">\n";
    if (tr.outputs.size() > 1) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
      if (*s.dash) o << " stroke-dasharray=\"" << s.dash << "\"";
      o << " points=\"";
      for (std::size_t i = 0; i < tr.outputs.size(); ++i) {
        if (i) o << ' ';
        o << num(c.x(tr.outputs[i].start)) << ',' << num(c.y(tr.outputs[i].end));
      }
      o << "\"/>\n";
    }
    for (std::size_t i = 0; i < tr.outputs.size(); ++i) {
      const double px = c.x(tr.outputs[i].start);
      const double py = c.y(tr.outputs[i].end);
      marker(o, s, px, py);
      o << "<text x=\"" << num(px + 6) << "\" y=\"" << num(py - 6) << "\" fill=\"" << s.color << "\">" << i
        << "</text>\n";
    }
    if (tr.outputs.empty()) marker(o, s, c.x(tr.final.start), c.y(tr.final.end));
    o << "</g>\n";
  }

  if (gt) {
    o << "<polygon class=\"gt\" points=\"" << star_points(c.x(gt->start), c.y(gt->end), 10)
      << "\" fill=\"gold\" stroke=\"black\"/>\n";
  }

  // Legend.
  const double lx = kMargin + size + 20;
  double ly = kMargin + 10;
  for (std::size_t a = 0; a < traces.size(); ++a) {
    const Style& s = kStyles[a % kStyles.size()];
    o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 24) << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (*s.dash) o << " stroke-dasharray=\"" << s.dash << "\"";
    o << "/>\n";
    marker(o, s, lx + 12, ly);
    o << "<text x=\"" << num(lx + 32) << "\" y=\"" << num(ly + 4) << "\">" << escape(traces[a].label) << " ["
      << num(traces[a].final.start) << ", " << num(traces[a].final.end) << "]</text>\n";
    ly += 20;
  }
  if (gt) {
    o << "<polygon points=\"" << star_points(lx + 12, ly, 7) << "\" fill=\"gold\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(lx + 32) << "\" y=\"" << num(ly + 4) << "\">ground truth [" << num(gt->start)
      << ", " << num(gt->end) << "]</text>\n";
    ly += 20;
  }
  if (traces.size() >= 2) {
    std::vector<Interval> finals;
    for (const auto& t : traces) finals.push_back(t.final);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", eta(finals));
    o << "<text class=\"eta\" x=\"" << num(lx) << "\" y=\"" << num(ly + 8) << "\">eta = " << buf << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace evmarl
