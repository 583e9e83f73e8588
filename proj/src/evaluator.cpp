#include "sifa/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sifa/batching.hpp"

namespace sifa {

using json = nlohmann::json;

namespace {

// Switches every network to eval mode for the guard's lifetime.
class EvalModeGuard {
 public:
  explicit EvalModeGuard(const Networks& n) : n_(n) {
    for (auto id : kAllNets) was_training_.push_back(n_.module(id)->is_training());
    for (auto id : kAllNets) n_.module(id)->eval();
  }
  ~EvalModeGuard() {
    for (std::size_t i = 0; i < kAllNets.size(); ++i) n_.module(kAllNets[i])->train(was_training_[i]);
  }

 private:
  const Networks& n_;
  std::vector<bool> was_training_;
};

void require_same_grid(const LabelVolume& a, const LabelVolume& b) {
  require(a.dims() == b.dims(), ErrorKind::ShapeMismatch, "prediction and ground truth shapes differ");
  require(a.num_classes() == b.num_classes(), ErrorKind::ShapeMismatch, "prediction and ground truth class counts differ");
}

}  // namespace

std::vector<Slice2D> predict_slices(const SifaState& state, std::vector<Slice2D> slices, std::size_t chunk) {
  const auto& n = state.nets();
  EvalModeGuard guard(n);
  torch::NoGradGuard ng;
  for (std::size_t start = 0; start < slices.size(); start += chunk) {
    const auto stop = std::min(slices.size(), start + chunk);
    auto batch = make_batch(std::span<const Slice2D>(slices.data() + start, stop - start), false);
    auto pred = n.C_1.ptr()->forward(n.E.ptr()->forward(batch.images).deep).argmax(1).to(torch::kInt32).contiguous();
    for (std::size_t i = start; i < stop; ++i) {
      auto p = pred[static_cast<int64_t>(i - start)];
      const auto* d = p.data_ptr<std::int32_t>();
      slices[i].label = std::vector<std::int32_t>(d, d + p.numel());
    }
  }
  return slices;
}

LabelVolume segment_volume(const SifaState& state, const Volume3D& volume, const PreprocessConfig& cfg) {
  auto slices = predict_slices(state, extract_slices(volume, std::nullopt, cfg));
  return restack_labels(slices, volume.dims(), volume.spacing(), cfg.slicing_axis, state.arch().num_classes);
}

std::vector<double> dice_per_class(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_grid(pred, gt);
  const int k = gt.num_classes();
  std::vector<std::int64_t> p(k, 0), g(k, 0), both(k, 0);
  const auto pl = pred.labels();
  const auto gl = gt.labels();
  for (std::size_t i = 0; i < pl.size(); ++i) {
    ++p[pl[i]];
    ++g[gl[i]];
    if (pl[i] == gl[i]) ++both[pl[i]];
  }
  std::vector<double> out;
  for (int c = 1; c < k; ++c) {
    const auto denom = p[c] + g[c];
    out.push_back(denom == 0 ? 1.0 : 2.0 * static_cast<double>(both[c]) / static_cast<double>(denom));
  }
  return out;
}

namespace {

using Point = std::array<double, 3>;

std::vector<Point> surface(const LabelVolume& v, int cls) {
  const auto& d = v.dims();
  const auto& sp = v.spacing();
  auto in = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    return x >= 0 && y >= 0 && z >= 0 && x < d[0] && y < d[1] && z < d[2] && v.at(x, y, z) == cls;
  };
  std::vector<Point> out;
  for (std::int64_t z = 0; z < d[2]; ++z) {
    for (std::int64_t y = 0; y < d[1]; ++y) {
      for (std::int64_t x = 0; x < d[0]; ++x) {
        if (v.at(x, y, z) != cls) continue;
        if (!in(x - 1, y, z) || !in(x + 1, y, z) || !in(x, y - 1, z) || !in(x, y + 1, z) || !in(x, y, z - 1) ||
            !in(x, y, z + 1)) {
          out.push_back({x * sp[0], y * sp[1], z * sp[2]});
        }
      }
    }
  }
  return out;
}

double directed_mean(const std::vector<Point>& from, const std::vector<Point>& to) {
  double sum = 0.0;
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

std::vector<std::optional<double>> asd_per_class(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_grid(pred, gt);
  for (int a = 0; a < 3; ++a) {
    require(std::abs(pred.spacing()[a] - gt.spacing()[a]) <= 1e-9 * gt.spacing()[a], ErrorKind::SpacingMismatch,
            "prediction and ground truth spacings differ");
  }
  std::vector<std::optional<double>> out;
  for (int c = 1; c < gt.num_classes(); ++c) {
    const auto sp = surface(pred, c);
    const auto sg = surface(gt, c);
    if (sp.empty() || sg.empty()) {
      out.emplace_back();
    } else {
      out.emplace_back(0.5 * (directed_mean(sp, sg) + directed_mean(sg, sp)));
    }
  }
  return out;
}

void finalize_report(MetricsReport& r) {
  require(!r.subjects.empty(), ErrorKind::EmptyDataset, "report has no subjects");
  const auto k = static_cast<std::size_t>(r.num_classes - 1);
  r.mean_dice.assign(k, 0.0);
  r.mean_asd.assign(k, std::nullopt);
  r.asd_has_undefined = false;
  r.dice_has_both_empty = false;
  for (std::size_t c = 0; c < k; ++c) {
    double dsum = 0.0, asum = 0.0;
    int adef = 0;
    for (const auto& s : r.subjects) {
      dsum += s.dice[c];
      if (s.both_empty[c]) r.dice_has_both_empty = true;
      if (s.asd[c]) {
        asum += *s.asd[c];
        ++adef;
      } else {
        r.asd_has_undefined = true;
      }
    }
    r.mean_dice[c] = dsum / static_cast<double>(r.subjects.size());
    if (adef > 0) r.mean_asd[c] = asum / adef;
  }
  double dsum = 0.0, asum = 0.0;
  int adef = 0;
  for (std::size_t c = 0; c < k; ++c) {
    dsum += r.mean_dice[c];
    if (r.mean_asd[c]) {
      asum += *r.mean_asd[c];
      ++adef;
    }
  }
  r.average_dice = dsum / static_cast<double>(k);
  r.average_asd = adef > 0 ? std::optional<double>(asum / adef) : std::nullopt;
}

std::vector<double> MetricsReport::subject_mean_dice() const {
  std::vector<double> out;
  for (const auto& s : subjects) {
    double sum = 0.0;
    for (double d : s.dice) sum += d;
    out.push_back(s.dice.empty() ? 0.0 : sum / static_cast<double>(s.dice.size()));
  }
  return out;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

std::vector<std::optional<double>> opt_vec_from(const json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& e : j) out.push_back(opt_from(e));
  return out;
}

}  // namespace

json MetricsReport::to_json() const {
  json subj = json::array();
  for (const auto& s : subjects) {
    json asd = json::array();
    for (const auto& a : s.asd) asd.push_back(opt_json(a));
    subj.push_back({{"subject_id", s.subject_id}, {"dice", s.dice}, {"asd_mm", asd}, {"both_empty", s.both_empty}});
  }
  json masd = json::array();
  for (const auto& a : mean_asd) masd.push_back(opt_json(a));
  return {{"label", label},
          {"num_classes", num_classes},
          {"subjects", subj},
          {"mean_dice", mean_dice},
          {"mean_asd_mm", masd},
          {"average_dice", average_dice},
          {"average_asd_mm", opt_json(average_asd)},
          {"asd_has_undefined", asd_has_undefined},
          {"dice_has_both_empty", dice_has_both_empty}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  try {
    r.label = j.at("label").get<std::string>();
    r.num_classes = j.at("num_classes").get<int>();
    for (const auto& s : j.at("subjects")) {
      r.subjects.push_back({s.at("subject_id").get<std::string>(), s.at("dice").get<std::vector<double>>(),
                            opt_vec_from(s.at("asd_mm")), s.at("both_empty").get<std::vector<bool>>()});
    }
    r.mean_dice = j.at("mean_dice").get<std::vector<double>>();
    r.mean_asd = opt_vec_from(j.at("mean_asd_mm"));
    r.average_dice = j.at("average_dice").get<double>();
    r.average_asd = opt_from(j.at("average_asd_mm"));
    r.asd_has_undefined = j.at("asd_has_undefined").get<bool>();
    r.dice_has_both_empty = j.at("dice_has_both_empty").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

MetricsReport evaluate_dataset(const SifaState& state, const Cohort& test, const PreprocessConfig& cfg,
                               std::string label) {
  require(!test.empty(), ErrorKind::EmptyDataset, "test set is empty");
  MetricsReport r;
  r.label = std::move(label);
  r.num_classes = state.arch().num_classes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto [vol, lab] = crop_to_roi(normalize(test.volumes[i]), test.labels[i], cfg);
    const auto& gt = *lab;
    require(gt.num_classes() == r.num_classes, ErrorKind::ShapeMismatch,
            "ground truth has " + std::to_string(gt.num_classes()) + " classes, model predicts " +
                std::to_string(r.num_classes));
    const auto pred = segment_volume(state, vol, cfg);
    SubjectMetrics s;
    s.subject_id = test.volumes[i].subject_id();
    s.dice = dice_per_class(pred, gt);
    s.asd = asd_per_class(pred, gt);
    for (int c = 1; c < r.num_classes; ++c) {
      const auto has = [c](const LabelVolume& v) {
        return std::find(v.labels().begin(), v.labels().end(), c) != v.labels().end();
      };
      s.both_empty.push_back(!has(pred) && !has(gt));
    }
    r.subjects.push_back(std::move(s));
  }
  finalize_report(r);
  return r;
}

std::string format_table(const std::vector<MetricsReport>& reports) {
  require(!reports.empty(), ErrorKind::EmptyDataset, "no reports to tabulate");
  const int k = reports.front().num_classes - 1;
  std::vector<std::string> header{"Method"};
  for (int c = 1; c <= k; ++c) header.push_back("Dice[" + std::to_string(c) + "]");
  for (int c = 1; c <= k; ++c) header.push_back("ASD[" + std::to_string(c) + "]");
  header.push_back("Dice avg");
  header.push_back("ASD avg");

  auto fmt = [](double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
  };
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    require(r.num_classes - 1 == k, ErrorKind::ShapeMismatch, "reports disagree on class count");
    std::vector<std::string> row{r.label.empty() ? "-" : r.label};
    for (int c = 0; c < k; ++c) row.push_back(fmt(100.0 * r.mean_dice[c], 1));
    for (int c = 0; c < k; ++c) {
      bool skipped = false;
      for (const auto& s : r.subjects) skipped = skipped || !s.asd[c];
      row.push_back(r.mean_asd[c] ? fmt(*r.mean_asd[c], 2) + (skipped ? "*" : "") : "N/A");
    }
    row.push_back(fmt(100.0 * r.average_dice, 1));
    row.push_back(r.average_asd ? fmt(*r.average_asd, 2) + (r.asd_has_undefined ? "*" : "") : "N/A");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        os << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << row[i];
      }
    }
    os << '\n';
  }
  bool any_skipped = false;
  for (const auto& r : reports) any_skipped = any_skipped || r.asd_has_undefined;
  if (any_skipped) os << "* average over defined entries only; N/A entries excluded\n";
  return os.str();
}

}  // namespace sifa
