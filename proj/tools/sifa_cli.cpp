// Command-line front end. Every subcommand reads one JSON experiment spec;
// flags given on the command line override the values in the file.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sifa/config_io.hpp"
#include "sifa/evaluator.hpp"
#include "sifa/experiments.hpp"
#include "sifa/plots.hpp"
#include "sifa/volume_io.hpp"

namespace fs = std::filesystem;
using namespace sifa;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::int64_t> iterations;
  std::optional<std::int64_t> batch_size;
  std::optional<std::int64_t> checkpoint_every;
  std::optional<std::string> output;
  std::optional<std::string> direction;

  void attach(CLI::App* app, bool with_variant) {
    if (with_variant) app->add_option("--variant", variant, "training variant");
    app->add_option("--iterations", iterations, "number of training iterations");
    app->add_option("--batch-size", batch_size, "slices per batch");
    app->add_option("--checkpoint-every", checkpoint_every, "checkpoint period in iterations (0: final only)");
    app->add_option("--output", output, "output directory");
    app->add_option("--direction", direction, "source_to_target or target_to_source");
  }

  void apply(ExperimentSpec& s) const {
    if (seed) s.train.seed = *seed;
    if (variant) s.variant = train_variant_from_string(*variant);
    if (iterations) s.train.iterations = *iterations;
    if (batch_size) s.train.batch_size = *batch_size;
    if (checkpoint_every) s.train.checkpoint_every = *checkpoint_every;
    if (output) s.output_dir = *output;
    if (direction) s.direction = direction_from_string(*direction);
    s.validate();
  }
};

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + p.string());
  out << text;
}

std::vector<MetricsReport> read_reports(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open report " + p.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<MetricsReport> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(MetricsReport::from_json(e));
  } else {
    out.push_back(MetricsReport::from_json(j));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synergistic image and feature alignment for cross-modality segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "intra-op threads (0: library default)");

  std::string spec_path;
  Overrides ov;

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic two-domain dataset");
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", spec_path, "experiment spec (uses data.synthetic)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "dataset root; source/ and target/ are created inside")->required();
  synth->add_option("--seed", synth_seed, "overrides data.synthetic.seed");

  auto* train_cmd = app.add_subcommand("train", "train one variant, then evaluate on the target test split");
  std::optional<std::string> resume;
  train_cmd->add_option("--spec", spec_path, "experiment spec")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", ov.seed, "training seed")->required();
  train_cmd->add_option("--resume", resume, "checkpoint directory to continue from")->check(CLI::ExistingDirectory);
  ov.attach(train_cmd, true);

  auto* eval_cmd = app.add_subcommand("evaluate", "segment test volumes with a checkpoint and score them");
  std::string ckpt;
  std::optional<std::string> test_dir, report_out;
  eval_cmd->add_option("--spec", spec_path, "experiment spec")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--test-dir", test_dir, "directory of labeled test volumes (default: spec's target test split)")
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--report", report_out, "write report JSON here (text table goes next to it)");
  eval_cmd->add_option("--direction", ov.direction, "source_to_target or target_to_source");

  auto* ablate = app.add_subcommand("ablate", "run the five-variant ablation ladder");
  ablate->add_option("--spec", spec_path, "base experiment spec")->required()->check(CLI::ExistingFile);
  ablate->add_option("--seed", ov.seed, "training seed")->required();
  ov.attach(ablate, false);

  auto* export_cmd = app.add_subcommand("export-transformed", "write G_t translations of source slices as PGM");
  std::string export_out;
  std::optional<std::string> input_dir;
  export_cmd->add_option("--spec", spec_path, "experiment spec")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--checkpoint", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--out", export_out, "output directory")->required();
  export_cmd->add_option("--input-dir", input_dir, "directory of volumes (default: spec's source cohort)")
      ->check(CLI::ExistingDirectory);

  auto* plot = app.add_subcommand("plot", "loss curves and Dice boxplots");
  std::vector<std::string> logs, reports;
  std::optional<std::string> run_dir;
  std::string plot_out;
  plot->add_option("--log", logs, "loss log, optionally NAME=PATH (repeatable)");
  plot->add_option("--report", reports, "report.json or ladder.json (repeatable)");
  plot->add_option("--run-dir", run_dir, "experiment or ladder output directory to scan")->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) torch::set_num_threads(threads);

  try {
    if (*synth) {
      auto spec = load_experiment_spec(spec_path);
      require(spec.synthetic.has_value(), ErrorKind::InvalidArgument, "spec has no data.synthetic section");
      if (synth_seed) spec.synthetic->seed = *synth_seed;
      write_synthetic_dataset(synth_out, make_synthetic_domains(*spec.synthetic));
      std::cout << "wrote " << fs::path(synth_out) / "source" << " and " << fs::path(synth_out) / "target" << "\n";
    } else if (*train_cmd) {
      auto spec = load_experiment_spec(spec_path);
      ov.apply(spec);
      require(!spec.output_dir.empty(), ErrorKind::InvalidArgument, "an output directory is required (--output)");
      std::optional<fs::path> from;
      if (resume) from = *resume;
      auto res = run_experiment(spec, from);
      std::cout << format_table({res.report});
      std::cout << "artifacts in " << spec.output_dir << "\n";
    } else if (*eval_cmd) {
      auto spec = load_experiment_spec(spec_path);
      if (ov.direction) spec.direction = direction_from_string(*ov.direction);
      const auto state = load_checkpoint(ckpt, spec.arch);
      Cohort test = test_dir ? load_cohort(*test_dir, Domain::target) : load_experiment_data(spec).target_test;
      const auto report = evaluate_dataset(state, test, spec.preprocess, fs::path(ckpt).filename().string());
      const auto table = format_table({report});
      std::cout << table;
      if (report_out) {
        write_file(*report_out, report.to_json().dump(2) + "\n");
        write_file(fs::path(*report_out).replace_extension(".txt"), table);
      }
    } else if (*ablate) {
      auto spec = load_experiment_spec(spec_path);
      ov.apply(spec);
      require(!spec.output_dir.empty(), ErrorKind::InvalidArgument, "an output directory is required (--output)");
      const auto reps = run_ablation_ladder(spec);
      std::cout << format_table(reps);
    } else if (*export_cmd) {
      auto spec = load_experiment_spec(spec_path);
      const auto state = load_checkpoint(ckpt, spec.arch);
      std::vector<Volume3D> vols;
      if (input_dir) {
        for (auto& v : load_cohort(*input_dir, Domain::source).volumes) vols.push_back(std::move(v));
      } else {
        const auto data = load_experiment_data(spec);
        for (const auto* c : {&data.source_train, &data.source_test}) {
          vols.insert(vols.end(), c->volumes.begin(), c->volumes.end());
        }
      }
      const auto files = export_transformed(state, vols, spec.preprocess, export_out);
      std::cout << "wrote " << files.size() << " translated slices to " << export_out << "\n";
    } else if (*plot) {
      std::vector<NamedLog> named;
      std::vector<MetricsReport> reps;
      for (const auto& l : logs) {
        const auto eq = l.find('=');
        const fs::path p = eq == std::string::npos ? l : l.substr(eq + 1);
        const std::string name = eq == std::string::npos ? p.parent_path().filename().string() : l.substr(0, eq);
        named.push_back({name.empty() ? p.stem().string() : name, read_loss_log(p)});
      }
      for (const auto& r : reports) {
        for (auto& rep : read_reports(r)) reps.push_back(std::move(rep));
      }
      if (run_dir) {
        const fs::path root = *run_dir;
        if (fs::exists(root / "loss_log.jsonl")) named.push_back({root.filename().string(), read_loss_log(root / "loss_log.jsonl")});
        if (fs::exists(root / "report.json")) {
          for (auto& rep : read_reports(root / "report.json")) reps.push_back(std::move(rep));
        }
        if (fs::exists(root / "ladder.json")) {
          for (auto& rep : read_reports(root / "ladder.json")) reps.push_back(std::move(rep));
        }
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(root)) {
          if (e.is_directory() && fs::exists(e.path() / "loss_log.jsonl")) subdirs.push_back(e.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& d : subdirs) named.push_back({d.filename().string(), read_loss_log(d / "loss_log.jsonl")});
      }
      for (const auto& f : emit_plots(named, reps, plot_out)) std::cout << f.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
