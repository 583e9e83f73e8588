#include "support.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace sifa::testing {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sifa_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ArchConfig toy_arch(int num_classes) {
  ArchConfig a = ArchConfig::desk(32, num_classes);
  a.encoder_channels = 4;
  a.max_encoder_channels = 8;
  a.generator_channels = 4;
  a.discriminator_channels = 4;
  return a;
}

SliceBatch random_batch(std::int64_t b, std::int64_t res, int num_classes, bool labels, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  SliceBatch out;
  out.images = at::randn({b, 1, res, res}, gen, torch::kFloat32);
  if (labels) out.labels = at::randint(0, num_classes, {b, res, res}, gen, torch::kInt64);
  out.domain = labels ? Domain::source : Domain::target;
  return out;
}

TrainingData toy_training_data(std::int64_t res, int num_classes, int n_slices, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  std::normal_distribution<double> noise(0.0, 0.05);
  TrainingData d;
  for (int dom = 0; dom < 2; ++dom) {
    for (int s = 0; s < n_slices; ++s) {
      std::vector<float> px(static_cast<std::size_t>(res * res));
      std::vector<std::int32_t> lab(px.size(), 0);
      for (int c = 1; c < num_classes; ++c) {
        const double cy = u(rng) * res, cx = u(rng) * res, r = 0.15 * res;
        for (std::int64_t y = 0; y < res; ++y) {
          for (std::int64_t x = 0; x < res; ++x) {
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) < r * r) lab[y * res + x] = c;
          }
        }
      }
      for (std::size_t i = 0; i < px.size(); ++i) {
        const double base = 0.2 + 0.6 * lab[i] / (num_classes - 1.0);
        px[i] = static_cast<float>((dom == 0 ? base : 1.0 - base) + noise(rng));
      }
      const auto domain = dom == 0 ? Domain::source : Domain::target;
      Slice2D sl(res, res, std::move(px), dom == 0 ? std::optional(lab) : std::nullopt, domain);
      sl.slice_index = s;
      (dom == 0 ? d.source : d.target).push_back(std::move(sl));
    }
  }
  return d;
}

Snapshot snapshot(const SifaState& s) {
  Snapshot out;
  for (auto id : kAllNets) {
    std::vector<torch::Tensor> p, b;
    for (const auto& t : s.nets().module(id)->parameters()) p.push_back(t.detach().clone());
    for (const auto& t : s.nets().module(id)->buffers()) b.push_back(t.detach().clone());
    out.params.push_back(std::move(p));
    out.buffers.push_back(std::move(b));
  }
  return out;
}

namespace {
bool any_differs(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!torch::equal(a[i], b[i])) return true;
  }
  return false;
}
}  // namespace

bool net_changed(const Snapshot& a, const Snapshot& b, NetId id) {
  const auto i = static_cast<std::size_t>(id);
  return any_differs(a.params[i], b.params[i]);
}

bool net_buffers_changed(const Snapshot& a, const Snapshot& b, NetId id) {
  const auto i = static_cast<std::size_t>(id);
  return any_differs(a.buffers[i], b.buffers[i]);
}

double param_diff_norm(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i].to(torch::kFloat64) - b[i].to(torch::kFloat64)).pow(2).sum().item<double>();
  return std::sqrt(sq);
}

LabelVolume random_label_volume(std::mt19937_64& rng, int k, int max_dim, const Spacing3& spacing,
                                const Dims3* dims) {
  std::uniform_int_distribution<int> dd(1, max_dim);
  Dims3 d = dims ? *dims : Dims3{dd(rng), dd(rng), dd(rng)};
  std::vector<std::int32_t> lab(static_cast<std::size_t>(d[0] * d[1] * d[2]), 0);
  std::uniform_int_distribution<int> cls(0, k - 1);
  std::uniform_int_distribution<int> nb(0, 4);
  const int blobs = nb(rng);
  for (int b = 0; b < blobs; ++b) {
    const int c = cls(rng);
    std::uniform_int_distribution<std::int64_t> px(0, d[0] - 1), py(0, d[1] - 1), pz(0, d[2] - 1);
    std::uniform_int_distribution<int> rad(0, 3);
    const auto cx = px(rng), cy = py(rng), cz = pz(rng);
    const int r = rad(rng);
    for (std::int64_t z = 0; z < d[2]; ++z) {
      for (std::int64_t y = 0; y < d[1]; ++y) {
        for (std::int64_t x = 0; x < d[0]; ++x) {
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz) <= r * r) {
            lab[static_cast<std::size_t>(x + d[0] * (y + d[1] * z))] = c;
          }
        }
      }
    }
  }
  // Sprinkle isolated voxels so some classes are fragmented.
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : lab) {
    if (u(rng) < 0.05) v = cls(rng);
  }
  return LabelVolume(d, spacing, std::move(lab), k);
}

std::vector<double> dice_oracle(const LabelVolume& p, const LabelVolume& g) {
  std::vector<double> out;
  for (int c = 1; c < g.num_classes(); ++c) {
    std::set<std::int64_t> P, G, I;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      if (p.labels()[i] == c) P.insert(i);
      if (g.labels()[i] == c) G.insert(i);
    }
    for (auto i : P) {
      if (G.count(i)) I.insert(i);
    }
    out.push_back(P.empty() && G.empty() ? 1.0 : 2.0 * I.size() / static_cast<double>(P.size() + G.size()));
  }
  return out;
}

namespace {

std::vector<std::array<long double, 3>> oracle_surface(const LabelVolume& v, int c) {
  const auto& d = v.dims();
  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<std::array<long double, 3>> out;
  for (std::int64_t z = 0; z < d[2]; ++z) {
    for (std::int64_t y = 0; y < d[1]; ++y) {
      for (std::int64_t x = 0; x < d[0]; ++x) {
        if (v.at(x, y, z) != c) continue;
        bool boundary = false;
        for (const auto& o : off) {
          const std::int64_t nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= d[0] || ny >= d[1] || nz >= d[2] || v.at(nx, ny, nz) != c) {
            boundary = true;
          }
        }
        if (boundary) {
          out.push_back({static_cast<long double>(x) * v.spacing()[0], static_cast<long double>(y) * v.spacing()[1],
                         static_cast<long double>(z) * v.spacing()[2]});
        }
      }
    }
  }
  return out;
}

long double oracle_directed(const std::vector<std::array<long double, 3>>& a,
                            const std::vector<std::array<long double, 3>>& b) {
  long double total = 0;
  for (const auto& p : a) {
    long double best = std::numeric_limits<long double>::infinity();
    for (const auto& q : b) {
      const long double d = std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                                      (p[2] - q[2]) * (p[2] - q[2]));
      if (d < best) best = d;
    }
    total += best;
  }
  return total / a.size();
}

}  // namespace

std::vector<std::optional<double>> asd_oracle(const LabelVolume& p, const LabelVolume& g) {
  std::vector<std::optional<double>> out;
  for (int c = 1; c < g.num_classes(); ++c) {
    const auto sp = oracle_surface(p, c), sg = oracle_surface(g, c);
    if (sp.empty() || sg.empty()) {
      out.emplace_back();
    } else {
      out.emplace_back(static_cast<double>((oracle_directed(sp, sg) + oracle_directed(sg, sp)) / 2));
    }
  }
  return out;
}

}  // namespace sifa::testing
