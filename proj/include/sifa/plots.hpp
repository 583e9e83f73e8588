#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sifa/domain.hpp"
#include "sifa/evaluator.hpp"

namespace sifa {

/// Quantile with linear interpolation between closest ranks
/// (h = (n - 1) p, the common default of numpy and R type 7).
double quantile(std::vector<double> values, double p);

/// Five-number box: quartiles plus Tukey whiskers reaching the most extreme
/// observations within 1.5 IQR of the box; the rest are outliers.
struct BoxStats {
  double q1 = 0, median = 0, q3 = 0;
  double whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;
};
BoxStats box_stats(const std::vector<double>& values);

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Stand-alone SVG line chart.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

/// Stand-alone SVG boxplot, one box per named sample.
std::string boxplot_svg(const std::string& title, const std::string& y_label,
                        const std::vector<std::pair<std::string, std::vector<double>>>& samples);

struct NamedLog {
  std::string name;
  std::vector<LossRecord> records;
};

/// One loss-curve SVG per discriminator term present in any log (curves of
/// every log that has the term share a chart), plus a per-subject Dice
/// boxplot over `reports` when there are any. Throws EmptyLog for an empty
/// log. Returns the written files.
std::vector<std::filesystem::path> emit_plots(const std::vector<NamedLog>& logs,
                                              const std::vector<MetricsReport>& reports,
                                              const std::filesystem::path& out_dir);

}  // namespace sifa
