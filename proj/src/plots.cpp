#include "sifa/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sifa {

namespace fs = std::filesystem;

double quantile(std::vector<double> v, double p) {
  require(!v.empty(), ErrorKind::InvalidArgument, "quantile of an empty sample");
  require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidArgument, "quantile level must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
  BoxStats b;
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, v);
    b.whisker_high = std::max(b.whisker_high, v);
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y1 == y0 ? 0.5 : (y - y0) / (y1 - y0)) * (kH - kTop - kBottom); }
};

void pad_range(double& lo, double& hi) {
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
}

void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl, bool x_ticks) {
  os << "<text x='" << kW / 2 << "' y='22' text-anchor='middle' font-size='15'>" << esc(title) << "</text>\n";
  os << "<line x1='" << kLeft << "' y1='" << kH - kBottom << "' x2='" << kW - kRight << "' y2='" << kH - kBottom
     << "' stroke='black'/>\n";
  os << "<line x1='" << kLeft << "' y1='" << kTop << "' x2='" << kLeft << "' y2='" << kH - kBottom
     << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x='" << kLeft - 6 << "' y='" << f.py(y) + 4 << "' text-anchor='end' font-size='11'>" << num(y)
       << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x='" << f.px(x) << "' y='" << kH - kBottom + 16 << "' text-anchor='middle' font-size='11'>"
         << num(x) << "</text>\n";
    }
  }
  os << "<text x='" << kW / 2 << "' y='" << kH - 12 << "' text-anchor='middle' font-size='12'>" << esc(xl)
     << "</text>\n";
  os << "<text x='16' y='" << kH / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << kH / 2
     << ")'>" << esc(yl) << "</text>\n";
}

std::string open_svg() {
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "' viewBox='0 0 " << kW
     << ' ' << kH << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  return os.str();
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::InvalidArgument, "series x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  require(std::isfinite(x0), ErrorKind::EmptyLog, "nothing to plot");
  pad_range(y0, y1);
  Frame f{x0, x1, y0, y1};
  std::ostringstream os;
  os << open_svg();
  axes(os, f, title, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto* color = kColors[k % kColors.size()];
    const auto& s = series[k];
    if (s.x.size() == 1) {
      os << "<circle cx='" << f.px(s.x[0]) << "' cy='" << f.py(s.y[0]) << "' r='3' fill='" << color << "'/>\n";
    } else {
      os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.2' points='";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << f.px(s.x[i]) << ',' << f.py(s.y[i]) << ' ';
      os << "'/>\n";
    }
    os << "<text x='" << kW - kRight - 4 << "' y='" << kTop + 14 * (k + 1) << "' text-anchor='end' font-size='11' fill='"
       << color << "'>" << esc(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string boxplot_svg(const std::string& title, const std::string& y_label,
                        const std::vector<std::pair<std::string, std::vector<double>>>& samples) {
  require(!samples.empty(), ErrorKind::InvalidArgument, "boxplot needs at least one sample");
  double y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [name, v] : samples) {
    require(!v.empty(), ErrorKind::InvalidArgument, "boxplot sample '" + name + "' is empty");
    y0 = std::min(y0, *std::min_element(v.begin(), v.end()));
    y1 = std::max(y1, *std::max_element(v.begin(), v.end()));
  }
  pad_range(y0, y1);
  const double n = static_cast<double>(samples.size());
  Frame f{0.0, n, y0, y1};
  std::ostringstream os;
  os << open_svg();
  axes(os, f, title, "", y_label, false);
  const double slot = (kW - kLeft - kRight) / n;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto b = box_stats(samples[k].second);
    const double cx = f.px(static_cast<double>(k) + 0.5);
    const double half = std::min(30.0, slot * 0.3);
    const auto* color = kColors[k % kColors.size()];
    os << "<line x1='" << cx << "' y1='" << f.py(b.whisker_low) << "' x2='" << cx << "' y2='" << f.py(b.whisker_high)
       << "' stroke='black'/>\n";
    for (double w : {b.whisker_low, b.whisker_high}) {
      os << "<line x1='" << cx - half / 2 << "' y1='" << f.py(w) << "' x2='" << cx + half / 2 << "' y2='" << f.py(w)
         << "' stroke='black'/>\n";
    }
    os << "<rect x='" << cx - half << "' y='" << f.py(b.q3) << "' width='" << 2 * half << "' height='"
       << std::max(0.5, f.py(b.q1) - f.py(b.q3)) << "' fill='" << color << "' fill-opacity='0.35' stroke='black'/>\n";
    os << "<line x1='" << cx - half << "' y1='" << f.py(b.median) << "' x2='" << cx + half << "' y2='"
       << f.py(b.median) << "' stroke='black' stroke-width='2'/>\n";
    for (double o : b.outliers) {
      os << "<circle cx='" << cx << "' cy='" << f.py(o) << "' r='2.5' fill='none' stroke='black'/>\n";
    }
    os << "<text x='" << cx << "' y='" << kH - kBottom + 16 << "' text-anchor='middle' font-size='10'>"
       << esc(samples[k].first) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + p.string());
  out << s;
}

constexpr std::array<LossTerm, 5> kDiscTerms = {LossTerm::disc_t, LossTerm::disc_s, LossTerm::disc_s_aux,
                                                LossTerm::disc_p1, LossTerm::disc_p2};

}  // namespace

std::vector<fs::path> emit_plots(const std::vector<NamedLog>& logs, const std::vector<MetricsReport>& reports,
                                 const fs::path& out_dir) {
  for (const auto& l : logs) require(!l.records.empty(), ErrorKind::EmptyLog, "loss log '" + l.name + "' is empty");
  require(!logs.empty() || !reports.empty(), ErrorKind::EmptyLog, "no loss logs or reports to plot");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (auto term : kDiscTerms) {
    std::vector<Series> series;
    for (const auto& l : logs) {
      Series s{l.name, {}, {}};
      for (const auto& r : l.records) {
        if (!r.has(term)) continue;
        s.x.push_back(static_cast<double>(r.iteration));
        s.y.push_back(*r[term]);
      }
      if (!s.x.empty()) series.push_back(std::move(s));
    }
    if (series.empty()) continue;
    const std::string name(to_string(term));
    const auto path = out_dir / ("loss_" + name + ".svg");
    write_text(path, line_chart_svg("Discriminator loss " + name, "iteration", "loss", series));
    written.push_back(path);
  }
  if (!reports.empty()) {
    std::vector<std::pair<std::string, std::vector<double>>> samples;
    for (const auto& r : reports) samples.emplace_back(r.label, r.subject_mean_dice());
    const auto path = out_dir / "dice_boxplot.svg";
    write_text(path, boxplot_svg("Per-subject mean foreground Dice", "Dice", samples));
    written.push_back(path);
  }
  return written;
}

}  // namespace sifa
