#include "sifa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sifa/volume_io.hpp"

namespace sifa {

namespace fs = std::filesystem;

std::string_view to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::intensity_inversion: return "intensity_inversion";
    case ShiftKind::gamma: return "gamma";
    case ShiftKind::additive_gaussian_noise: return "additive_gaussian_noise";
    case ShiftKind::smooth_bias_field: return "smooth_bias_field";
  }
  return "intensity_inversion";
}

ShiftKind shift_kind_from_string(std::string_view s) {
  if (s == "intensity_inversion") return ShiftKind::intensity_inversion;
  if (s == "gamma") return ShiftKind::gamma;
  if (s == "additive_gaussian_noise") return ShiftKind::additive_gaussian_noise;
  if (s == "smooth_bias_field") return ShiftKind::smooth_bias_field;
  fail(ErrorKind::InvalidArgument, "unknown target transform '" + std::string(s) + "'");
}

void SyntheticConfig::validate() const {
  require(image_size >= 32, ErrorKind::InvalidArgument, "image_size must be >= 32");
  require(num_slices >= 1, ErrorKind::InvalidArgument, "num_slices must be >= 1");
  require(num_subjects_per_domain >= 1, ErrorKind::InvalidArgument, "need at least one subject per domain");
  require(num_shapes >= 1, ErrorKind::InvalidArgument, "num_shapes must be >= 1");
  require(texture_noise >= 0, ErrorKind::InvalidArgument, "texture_noise must be >= 0");
  for (const auto& st : target_transform) {
    if (st.kind == ShiftKind::gamma) require(st.param > 0, ErrorKind::InvalidArgument, "gamma must be > 0");
    if (st.kind != ShiftKind::intensity_inversion && st.kind != ShiftKind::gamma) {
      require(st.param >= 0, ErrorKind::InvalidArgument, "shift parameter must be >= 0");
    }
  }
}

SyntheticConfig SyntheticConfig::reference(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.image_size = 64;
  cfg.num_slices = 12;
  cfg.num_subjects_per_domain = 8;
  cfg.num_shapes = 2;
  cfg.target_transform = {{ShiftKind::intensity_inversion, 0.0},
                          {ShiftKind::gamma, 1.5},
                          {ShiftKind::additive_gaussian_noise, 0.1},
                          {ShiftKind::smooth_bias_field, 0.3}};
  cfg.seed = seed;
  return cfg;
}

void Cohort::push_back(Volume3D v, LabelVolume l) {
  volumes.push_back(std::move(v));
  labels.push_back(std::move(l));
}

double class_base_intensity(int cls, int num_shapes) {
  if (cls == 0) return 0.15;
  if (num_shapes == 1) return 0.8;
  return 0.45 + 0.45 * static_cast<double>(cls - 1) / static_cast<double>(num_shapes - 1);
}

namespace {

struct Ellipsoid {
  double cx, cy, cz, rx, ry, rz, theta;
};

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t domain, std::uint64_t subject, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(subject),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

std::pair<Volume3D, LabelVolume> make_subject(const SyntheticConfig& cfg, Domain domain, int index) {
  const std::int64_t n = cfg.image_size;
  const std::int64_t depth = cfg.num_slices;
  const auto dom = static_cast<std::uint64_t>(domain == Domain::source ? 0 : 1);
  auto shape_rng = stream_rng(cfg.seed, dom, static_cast<std::uint64_t>(index), 0);
  auto u = [&shape_rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(shape_rng); };

  std::vector<Ellipsoid> organs;
  for (int k = 0; k < cfg.num_shapes; ++k) {
    const double size = static_cast<double>(n);
    organs.push_back({u(0.3, 0.7) * size, u(0.3, 0.7) * size, u(0.35, 0.65) * static_cast<double>(depth),
                      u(0.1, 0.2) * size, u(0.1, 0.2) * size, u(0.3, 0.5) * static_cast<double>(depth),
                      u(0.0, std::numbers::pi)});
  }

  const Dims3 dims{n, n, depth};
  std::vector<std::int32_t> labels(static_cast<std::size_t>(voxel_count(dims)), 0);
  std::vector<float> voxels(labels.size());
  auto noise_rng = stream_rng(cfg.seed, dom, static_cast<std::uint64_t>(index), 1);
  std::normal_distribution<double> texture(0.0, cfg.texture_noise);

  for (std::int64_t z = 0; z < depth; ++z) {
    for (std::int64_t y = 0; y < n; ++y) {
      for (std::int64_t x = 0; x < n; ++x) {
        std::int32_t cls = 0;
        for (int k = 0; k < cfg.num_shapes; ++k) {
          const auto& e = organs[static_cast<std::size_t>(k)];
          const double dx = static_cast<double>(x) + 0.5 - e.cx;
          const double dy = static_cast<double>(y) + 0.5 - e.cy;
          const double dz = static_cast<double>(z) + 0.5 - e.cz;
          const double ux = std::cos(e.theta) * dx + std::sin(e.theta) * dy;
          const double uy = -std::sin(e.theta) * dx + std::cos(e.theta) * dy;
          const double r = (ux * ux) / (e.rx * e.rx) + (uy * uy) / (e.ry * e.ry) + (dz * dz) / (e.rz * e.rz);
          if (r <= 1.0) cls = k + 1;
        }
        const auto idx = static_cast<std::size_t>(x + n * (y + n * z));
        labels[idx] = cls;
        voxels[idx] = static_cast<float>(class_base_intensity(cls, cfg.num_shapes) +
                                         (cfg.texture_noise > 0 ? texture(noise_rng) : 0.0));
      }
    }
  }

  if (domain == Domain::target) {
    auto shift_rng = stream_rng(cfg.seed, dom, static_cast<std::uint64_t>(index), 2);
    for (const auto& step : cfg.target_transform) {
      switch (step.kind) {
        case ShiftKind::intensity_inversion:
          for (auto& v : voxels) v = 1.0f - v;
          break;
        case ShiftKind::gamma:
          for (auto& v : voxels) v = static_cast<float>(std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), step.param));
          break;
        case ShiftKind::additive_gaussian_noise: {
          std::normal_distribution<double> g(0.0, step.param);
          if (step.param > 0) {
            for (auto& v : voxels) v = static_cast<float>(v + g(shift_rng));
          }
          break;
        }
        case ShiftKind::smooth_bias_field: {
          // Sum of three random low-frequency cosines, scaled to [-1, 1].
          std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
          std::uniform_real_distribution<double> fr(0.5, 1.5);
          std::array<std::array<double, 4>, 3> waves{};
          for (auto& w : waves) w = {fr(shift_rng), fr(shift_rng), ph(shift_rng), ph(shift_rng)};
          for (std::int64_t z = 0; z < depth; ++z) {
            for (std::int64_t y = 0; y < n; ++y) {
              for (std::int64_t x = 0; x < n; ++x) {
                const double px = static_cast<double>(x) / static_cast<double>(n);
                const double py = static_cast<double>(y) / static_cast<double>(n);
                double f = 0.0;
                for (const auto& w : waves) {
                  f += std::cos(2.0 * std::numbers::pi * w[0] * px + w[2]) * std::cos(2.0 * std::numbers::pi * w[1] * py + w[3]);
                }
                f /= 3.0;
                auto& v = voxels[static_cast<std::size_t>(x + n * (y + n * z))];
                v = static_cast<float>(v * (1.0 + step.param * f));
              }
            }
          }
          break;
        }
      }
    }
  }

  const std::string id = std::string(domain == Domain::source ? "src" : "tgt") + "_" +
                         std::string(3 - std::min<std::size_t>(3, std::to_string(index).size()), '0') +
                         std::to_string(index);
  return {Volume3D(dims, cfg.spacing, std::move(voxels), domain, id),
          LabelVolume(dims, cfg.spacing, std::move(labels), cfg.num_shapes + 1)};
}

}  // namespace

SyntheticDomains make_synthetic_domains(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticDomains out;
  for (int i = 0; i < cfg.num_subjects_per_domain; ++i) {
    auto [v, l] = make_subject(cfg, Domain::source, i);
    out.source.push_back(std::move(v), std::move(l));
  }
  for (int i = 0; i < cfg.num_subjects_per_domain; ++i) {
    auto [v, l] = make_subject(cfg, Domain::target, i);
    out.target.push_back(std::move(v), std::move(l));
  }
  return out;
}

std::pair<Cohort, Cohort> split_by_subject(const Cohort& cohort, double train_fraction) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::InvalidArgument, "train_fraction must be in (0,1)");
  const auto n = cohort.size();
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Cohort train, test;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).push_back(cohort.volumes[i], cohort.labels[i]);
  }
  return {std::move(train), std::move(test)};
}

void write_synthetic_dataset(const fs::path& root, const SyntheticDomains& data) {
  for (const auto& [name, cohort] : {std::pair<std::string, const Cohort*>{"source", &data.source},
                                     std::pair<std::string, const Cohort*>{"target", &data.target}}) {
    const auto dir = root / name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < cohort->size(); ++i) {
      save_pair(dir / (cohort->volumes[i].subject_id() + ".svol"), cohort->volumes[i], &cohort->labels[i]);
    }
  }
}

Cohort load_cohort(const fs::path& dir, Domain domain) {
  require(fs::is_directory(dir), ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const bool supported = name.ends_with(".svol") || name.ends_with(".nii") || name.ends_with(".nii.gz");
    if (!supported) continue;
    const auto stem_end = name.find('.');
    if (name.substr(0, stem_end).ends_with("_label")) continue;
    images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  Cohort out;
  for (const auto& p : images) {
    auto loaded = load_volume(p);
    if (!loaded.labels) fail(ErrorKind::Io, "missing label file for " + p.string());
    loaded.volume.set_modality(domain);
    validate_pair(loaded.volume, *loaded.labels);
    out.push_back(std::move(loaded.volume), std::move(*loaded.labels));
  }
  if (out.empty()) fail(ErrorKind::EmptyDataset, "no volumes found in " + dir.string());
  return out;
}

}  // namespace sifa
