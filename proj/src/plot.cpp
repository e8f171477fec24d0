#include "dcmg/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <regex>
#include <sstream>

namespace dcmg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Panel {
  std::string title;
  std::vector<int> columns;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<int> matching(const TraceTable& t, const std::regex& re) {
  std::vector<int> out;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (std::regex_match(t.header[i], re)) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Earliest time at which any delta column is nonzero.
double attack_onset(const TraceTable& t) {
  const auto deltas = matching(t, std::regex(R"(delta\d+)"));
  const auto& time = t.columns[0];
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (int c : deltas) {
      if (t.columns[static_cast<std::size_t>(c)][r] != 0.0) return time[r];
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Bucketed min/max decimation keeps peaks visible.
std::vector<std::size_t> decimate(const std::vector<double>& y, std::size_t buckets) {
  const std::size_t n = y.size();
  std::vector<std::size_t> idx;
  if (n <= 2 * buckets) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * n / buckets;
    const std::size_t hi = (b + 1) * n / buckets;
    std::size_t imin = lo, imax = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!std::isfinite(y[i])) {
        imin = imax = i;
        break;
      }
      if (y[i] < y[imin]) imin = i;
      if (y[i] > y[imax]) imax = i;
    }
    idx.push_back(std::min(imin, imax));
    if (imin != imax) idx.push_back(std::max(imin, imax));
  }
  return idx;
}

}  // namespace

std::string render_svg(const TraceTable& table, const PlotOptions& opt) {
  if (table.rows() == 0) throw IoError("no samples");
  const auto& time = table.columns[0];

  std::vector<Panel> panels = {
      {"Voltages [V]", matching(table, std::regex(R"(v\d+|vb|vl)"))},
      {"Currents [A]", matching(table, std::regex(R"(it\d+|if)"))},
      {"Adaptive gains rho", matching(table, std::regex(R"(rho\d+)"))},
      {"H [J]", matching(table, std::regex("H"))},
  };

  const double t0 = time.front();
  const double t1 = std::max(time.back(), t0 + 1e-12);
  const double onset = attack_onset(table);

  const int left = 70, right = 130, top = 30, gap = 40;
  const int plot_w = opt.width - left - right;
  const int plot_h = opt.panel_height - gap;
  const int height = top + static_cast<int>(panels.size()) * opt.panel_height;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const int y0 = top + static_cast<int>(p) * opt.panel_height;

    bool clipped = false;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int c : panel.columns) {
      for (double v : table.columns[static_cast<std::size_t>(c)]) {
        if (!std::isfinite(v)) continue;
        if (std::abs(v) > opt.clip) clipped = true;
        v = std::clamp(v, -opt.clip, opt.clip);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
    auto sx = [&](double t) { return left + (t - t0) / (t1 - t0) * plot_w; };
    auto sy = [&](double v) { return y0 + plot_h - (v - lo) / (hi - lo) * plot_h; };

    svg << "<g class=\"subplot\" data-title=\"" << panel.title << "\""
        << (clipped ? " data-clipped=\"true\"" : "") << ">\n";
    svg << "<text x=\"" << left << "\" y=\"" << y0 - 8 << "\" font-weight=\"bold\">" << panel.title
        << (clipped ? " (clipped at " + fmt(opt.clip) + ")" : "") << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4.0;
      const double y = sy(v);
      svg << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << y << "\" y2=\""
          << y << "\" stroke=\"#ddd\"/>";
      svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v)
          << "</text>\n";
      const double t = t0 + (t1 - t0) * k / 4.0;
      svg << "<text x=\"" << sx(t) << "\" y=\"" << y0 + plot_h + 14
          << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    }
    if (std::isfinite(onset)) {
      svg << "<line class=\"attack-marker\" data-t=\"" << fmt(onset) << "\" x1=\"" << sx(onset)
          << "\" x2=\"" << sx(onset) << "\" y1=\"" << y0 << "\" y2=\"" << y0 + plot_h
          << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
    }

    for (std::size_t s = 0; s < panel.columns.size(); ++s) {
      const auto& y = table.columns[static_cast<std::size_t>(panel.columns[s])];
      const char* color = kPalette[s % std::size(kPalette)];
      std::ostringstream path;
      bool pen_down = false;
      for (std::size_t i : decimate(y, static_cast<std::size_t>(plot_w))) {
        if (!std::isfinite(y[i])) {
          pen_down = false;
          continue;
        }
        const double v = std::clamp(y[i], -opt.clip, opt.clip);
        char buf[48];
        std::snprintf(buf, sizeof buf, "%c%.1f %.1f ", pen_down ? 'L' : 'M', sx(time[i]), sy(v));
        path << buf;
        pen_down = true;
      }
      svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1\"/>\n";
      const int ly = y0 + 12 + static_cast<int>(s) * 14;
      svg << "<line x1=\"" << left + plot_w + 10 << "\" x2=\"" << left + plot_w + 28 << "\" y1=\""
          << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\"/>";
      svg << "<text x=\"" << left + plot_w + 32 << "\" y=\"" << ly << "\">"
          << table.header[static_cast<std::size_t>(panel.columns[s])] << "</text>\n";
    }
    svg << "</g>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 4
      << "\" text-anchor=\"middle\">t [s]</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace dcmg
