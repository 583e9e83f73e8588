#include "sifa/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sifa/batching.hpp"
#include "sifa/config_io.hpp"
#include "sifa/plots.hpp"

namespace sifa {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Direction d) {
  return d == Direction::source_to_target ? "source_to_target" : "target_to_source";
}

Direction direction_from_string(std::string_view s) {
  if (s == "source_to_target") return Direction::source_to_target;
  if (s == "target_to_source") return Direction::target_to_source;
  fail(ErrorKind::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

void ExperimentSpec::validate() const {
  require(synthetic.has_value() != real.has_value(), ErrorKind::InvalidArgument,
          "exactly one of data.synthetic and data.source_dir/target_dir must be given");
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::InvalidArgument,
          "train_fraction must lie strictly between 0 and 1");
  if (synthetic) {
    synthetic->validate();
    require(arch.num_classes == synthetic->num_shapes + 1, ErrorKind::InvalidArgument,
            "arch.num_classes must equal synthetic.num_shapes + 1");
  }
  preprocess.validate();
  arch.validate();
  require(arch.input_resolution == preprocess.target_resolution, ErrorKind::InvalidArgument,
          "arch.input_resolution must equal preprocess.target_resolution");
  train.validate();
}

ExperimentSpec ExperimentSpec::reference(std::uint64_t seed) {
  ExperimentSpec s;
  s.synthetic = SyntheticConfig::reference(seed);
  s.preprocess.target_resolution = 64;
  s.preprocess.slicing_axis = SlicingAxis::axial;
  s.arch = ArchConfig::desk(64, s.synthetic->num_shapes + 1);
  s.train.iterations = 2000;
  s.train.batch_size = 4;
  s.train.seed = seed;
  return s;
}

json to_json(const ExperimentSpec& s) {
  json data;
  if (s.synthetic) data["synthetic"] = to_json(*s.synthetic);
  if (s.real) {
    data["source_dir"] = s.real->source_dir.string();
    data["target_dir"] = s.real->target_dir.string();
  }
  return {{"direction", to_string(s.direction)},
          {"variant", to_string(s.variant)},
          {"data", data},
          {"train_fraction", s.train_fraction},
          {"preprocess", to_json(s.preprocess)},
          {"arch", to_json(s.arch)},
          {"train", to_json(s.train)},
          {"output_dir", s.output_dir.string()}};
}

ExperimentSpec experiment_from_json(const json& j, ExperimentSpec s) {
  require(j.is_object(), ErrorKind::InvalidArgument, "experiment spec must be a JSON object");
  static const std::vector<std::string> known = {"direction", "variant",    "data",  "train_fraction",
                                                 "preprocess", "arch",      "train", "output_dir"};
  for (const auto& [k, v] : j.items()) {
    require(std::find(known.begin(), known.end(), k) != known.end(), ErrorKind::InvalidArgument,
            "unknown key '" + k + "' in experiment spec");
  }
  try {
    if (j.contains("direction")) s.direction = direction_from_string(j["direction"].get<std::string>());
    if (j.contains("variant")) s.variant = train_variant_from_string(j["variant"].get<std::string>());
    if (j.contains("data")) {
      const auto& d = j["data"];
      require(d.is_object(), ErrorKind::InvalidArgument, "data must be a JSON object");
      for (const auto& [k, v] : d.items()) {
        require(k == "synthetic" || k == "source_dir" || k == "target_dir", ErrorKind::InvalidArgument,
                "unknown key '" + k + "' in data");
      }
      const bool has_real = d.contains("source_dir") || d.contains("target_dir");
      require(!(has_real && d.contains("synthetic")), ErrorKind::InvalidArgument,
              "data.synthetic and data.source_dir/target_dir are mutually exclusive");
      if (d.contains("synthetic")) {
        s.synthetic = synthetic_from_json(d["synthetic"], s.synthetic.value_or(SyntheticConfig{}));
        s.real.reset();
      } else if (has_real) {
        require(d.contains("source_dir") && d.contains("target_dir"), ErrorKind::InvalidArgument,
                "real data needs both data.source_dir and data.target_dir");
        s.real = RealData{d["source_dir"].get<std::string>(), d["target_dir"].get<std::string>()};
        s.synthetic.reset();
      }
    }
    if (j.contains("train_fraction")) s.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("preprocess")) s.preprocess = preprocess_from_json(j["preprocess"], s.preprocess);
    if (j.contains("arch")) s.arch = arch_from_json(j["arch"], s.arch);
    if (j.contains("train")) s.train = train_config_from_json(j["train"], s.train);
    if (j.contains("output_dir")) s.output_dir = j["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed experiment spec: ") + e.what());
  }
  return s;
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open spec file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

namespace {

Cohort retag(Cohort c, Domain d) {
  for (auto& v : c.volumes) v.set_modality(d);
  return c;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentSpec& spec) {
  Cohort a, b;
  if (spec.synthetic) {
    auto d = make_synthetic_domains(*spec.synthetic);
    a = std::move(d.source);
    b = std::move(d.target);
  } else {
    a = load_cohort(spec.real->source_dir, Domain::source);
    b = load_cohort(spec.real->target_dir, Domain::target);
  }
  if (spec.direction == Direction::target_to_source) std::swap(a, b);
  a = retag(std::move(a), Domain::source);
  b = retag(std::move(b), Domain::target);
  ExperimentData out;
  std::tie(out.source_train, out.source_test) = split_by_subject(a, spec.train_fraction);
  std::tie(out.target_train, out.target_test) = split_by_subject(b, spec.train_fraction);
  require(!out.target_test.empty(), ErrorKind::EmptyDataset, "target test split is empty");
  return out;
}

std::vector<Slice2D> prepare_slices(const Cohort& cohort, const PreprocessConfig& cfg, bool with_labels) {
  std::vector<Slice2D> out;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto [vol, lab] = crop_to_roi(normalize(cohort.volumes[i]), cohort.labels[i], cfg);
    auto slices = extract_slices(vol, with_labels ? lab : std::nullopt, cfg);
    out.insert(out.end(), std::make_move_iterator(slices.begin()), std::make_move_iterator(slices.end()));
  }
  return out;
}

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + p.string());
  out << s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::optional<fs::path>& resume) {
  spec.validate();
  const auto data = load_experiment_data(spec);
  TrainingData td;
  td.source = prepare_slices(data.source_train, spec.preprocess, true);
  td.target = prepare_slices(data.target_train, spec.preprocess, spec.variant == TrainVariant::supervised_upper_bound);

  TrainConfig tc = spec.train;
  tc.output_dir = spec.output_dir.empty() ? fs::path() : spec.output_dir;
  if (!spec.output_dir.empty()) {
    fs::create_directories(spec.output_dir);
    write_text(spec.output_dir / "spec.json", to_json(spec).dump(2) + "\n");
  }
  std::optional<SifaState> start;
  if (resume) start = load_checkpoint(*resume, spec.arch);
  auto trained = train(spec.variant, td, spec.arch, tc, std::move(start));

  ExperimentResult res;
  res.report = evaluate_dataset(trained.state, data.target_test, spec.preprocess, std::string(to_string(spec.variant)));
  res.records = std::move(trained.records);
  res.checkpoints = std::move(trained.checkpoints);
  if (!spec.output_dir.empty()) {
    res.loss_log = spec.output_dir / "loss_log.jsonl";
    write_text(spec.output_dir / "report.json", res.report.to_json().dump(2) + "\n");
    write_text(spec.output_dir / "report.txt", format_table({res.report}));
  }
  return res;
}

std::vector<MetricsReport> run_ablation_ladder(const ExperimentSpec& base) {
  base.validate();
  std::vector<MetricsReport> reports;
  std::vector<NamedLog> logs;
  for (auto v : kAblationLadder) {
    ExperimentSpec spec = base;
    spec.variant = v;
    if (!base.output_dir.empty()) spec.output_dir = base.output_dir / std::string(to_string(v));
    auto res = run_experiment(spec);
    reports.push_back(res.report);
    logs.push_back({std::string(to_string(v)), std::move(res.records)});
  }
  if (!base.output_dir.empty()) {
    json j = json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    write_text(base.output_dir / "ladder.json", j.dump(2) + "\n");
    write_text(base.output_dir / "ladder.txt", format_table(reports));
    emit_plots(logs, reports, base.output_dir / "plots");
  }
  return reports;
}

std::vector<Slice2D> translate_slices(const SifaState& state, const std::vector<Slice2D>& slices) {
  const auto& g = state.nets().G_t;
  const bool was_training = g->is_training();
  g.ptr()->eval();
  torch::NoGradGuard ng;
  std::vector<Slice2D> out;
  for (const auto& s : slices) {
    Slice2D copy = s;
    copy.label.reset();
    auto batch = make_batch(std::span<const Slice2D>(&copy, 1), false);
    auto y = g.ptr()->forward(batch.images).contiguous();
    const auto* d = y.data_ptr<float>();
    copy.pixels.assign(d, d + y.numel());
    copy.domain = Domain::target;
    out.push_back(std::move(copy));
  }
  g.ptr()->train(was_training);
  return out;
}

void write_pgm(const fs::path& path, const Slice2D& s) {
  const auto [lo, hi] = std::minmax_element(s.pixels.begin(), s.pixels.end());
  const double span = *hi - *lo;
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "P5\n" << s.cols << ' ' << s.rows << "\n255\n";
  for (float v : s.pixels) {
    const double t = span > 0 ? (v - *lo) / span : 0.5;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
}

std::vector<fs::path> export_transformed(const SifaState& state, const std::vector<Volume3D>& volumes,
                                         const PreprocessConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& v : volumes) {
    auto [vol, lab] = crop_to_roi(normalize(v), std::nullopt, cfg);
    const auto slices = extract_slices(vol, std::nullopt, cfg);
    const auto translated = translate_slices(state, slices);
    for (std::size_t i = 0; i < slices.size(); ++i) {
      std::ostringstream stem;
      stem << (v.subject_id().empty() ? "volume" : v.subject_id()) << "_" << std::setw(3) << std::setfill('0')
           << slices[i].slice_index;
      write_pgm(out_dir / (stem.str() + "_orig.pgm"), slices[i]);
      const auto p = out_dir / (stem.str() + "_s2t.pgm");
      write_pgm(p, translated[i]);
      written.push_back(p);
    }
  }
  return written;
}

}  // namespace sifa
