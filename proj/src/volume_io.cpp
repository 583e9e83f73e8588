#include "sifa/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sifa {

namespace fs = std::filesystem;

namespace {

enum class Container { svol, nifti, nifti_gz };

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Container container_of(const fs::path& path) {
  const std::string name = path.filename().string();
  if (ends_with(name, ".svol")) return Container::svol;
  if (ends_with(name, ".nii.gz")) return Container::nifti_gz;
  if (ends_with(name, ".nii")) return Container::nifti;
  fail(ErrorKind::UnsupportedFormat, "unrecognised volume container: " + path.string());
}

std::string extension_of(Container c) {
  switch (c) {
    case Container::svol: return ".svol";
    case Container::nifti: return ".nii";
    case Container::nifti_gz: return ".nii.gz";
  }
  return {};
}

std::vector<char> read_all(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<char> out;
  std::array<char, 1 << 16> buf{};
  while (true) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      fail(ErrorKind::CorruptHeader, "decompression failed for " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.data(), buf.data() + n);
  }
  gzclose(f);
  return out;
}

void write_all(const fs::path& path, const std::vector<char>& bytes, bool compress) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!compress) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write on " + path.string());
    return;
  }
  gzFile f = gzopen(path.string().c_str(), "wb6");
  if (f == nullptr) fail(ErrorKind::Io, "cannot write " + path.string());
  const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
  if (n != static_cast<int>(bytes.size())) fail(ErrorKind::Io, "short write on " + path.string());
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void store_le(std::vector<char>& out, T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

// ---------------------------------------------------------------------------
// .svol

struct SvolHeader {
  std::string kind;
  Dims3 dims{0, 0, 0};
  Spacing3 spacing{1, 1, 1};
  std::string dtype;
  int num_classes = 0;
  Domain modality = Domain::source;
  std::string subject;
  std::size_t payload_offset = 0;
};

SvolHeader parse_svol_header(const std::vector<char>& bytes, const fs::path& path) {
  SvolHeader h;
  std::size_t pos = 0;
  bool saw_magic = false;
  bool saw_end = false;
  bool saw_dims = false;
  while (pos < bytes.size() && !saw_end) {
    const auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), '\n');
    if (nl == bytes.end()) break;
    const std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(pos), nl);
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!saw_magic) {
      std::string version;
      ls >> version;
      if (key != "SVOL") fail(ErrorKind::UnsupportedFormat, "missing SVOL magic in " + path.string());
      if (version != "1") fail(ErrorKind::CorruptHeader, "unsupported SVOL version in " + path.string());
      saw_magic = true;
      continue;
    }
    if (key == "end") {
      saw_end = true;
    } else if (key == "kind") {
      ls >> h.kind;
    } else if (key == "dims") {
      ls >> h.dims[0] >> h.dims[1] >> h.dims[2];
      saw_dims = static_cast<bool>(ls);
    } else if (key == "spacing") {
      ls >> h.spacing[0] >> h.spacing[1] >> h.spacing[2];
    } else if (key == "dtype") {
      ls >> h.dtype;
    } else if (key == "num_classes") {
      ls >> h.num_classes;
    } else if (key == "modality") {
      std::string m;
      ls >> m;
      h.modality = domain_from_string(m);
    } else if (key == "subject") {
      std::getline(ls >> std::ws, h.subject);
    }
    if (!ls && key != "end") fail(ErrorKind::CorruptHeader, "malformed header line '" + line + "'");
  }
  if (!saw_magic) fail(ErrorKind::UnsupportedFormat, "empty or non-SVOL file " + path.string());
  if (!saw_end || !saw_dims) fail(ErrorKind::CorruptHeader, "incomplete SVOL header in " + path.string());
  for (auto d : h.dims) require(d >= 1, ErrorKind::CorruptHeader, "non-positive dimension");
  for (auto s : h.spacing) require(s > 0 && std::isfinite(s), ErrorKind::CorruptHeader, "bad spacing");
  h.payload_offset = pos;
  return h;
}

std::vector<char> svol_header_bytes(std::string_view kind, const Dims3& dims, const Spacing3& spacing,
                                    std::string_view dtype, int num_classes, Domain modality,
                                    const std::string& subject) {
  std::ostringstream os;
  os.precision(17);
  os << "SVOL 1\n";
  os << "kind " << kind << '\n';
  os << "dims " << dims[0] << ' ' << dims[1] << ' ' << dims[2] << '\n';
  os << "spacing " << spacing[0] << ' ' << spacing[1] << ' ' << spacing[2] << '\n';
  os << "dtype " << dtype << '\n';
  if (num_classes > 0) os << "num_classes " << num_classes << '\n';
  os << "modality " << to_string(modality) << '\n';
  if (!subject.empty()) os << "subject " << subject << '\n';
  os << "end\n";
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// NIfTI-1

constexpr std::size_t kNiftiHeaderSize = 348;

struct NiftiImage {
  Dims3 dims{1, 1, 1};
  Spacing3 spacing{1, 1, 1};
  std::vector<double> values;
};

NiftiImage parse_nifti(const std::vector<char>& bytes, const fs::path& path) {
  if (bytes.size() < kNiftiHeaderSize) fail(ErrorKind::CorruptHeader, "truncated NIfTI header in " + path.string());
  const int32_t sizeof_hdr = load_le<int32_t>(bytes.data());
  if (sizeof_hdr != 348) {
    // Byte-swapped (big-endian) files are rare in practice; reject explicitly.
    fail(ErrorKind::UnsupportedFormat, "unsupported NIfTI byte order or version in " + path.string());
  }
  if (std::memcmp(bytes.data() + 344, "n+1", 3) != 0) {
    fail(ErrorKind::UnsupportedFormat, "only single-file NIfTI-1 (n+1) is supported: " + path.string());
  }
  const int16_t ndim = load_le<int16_t>(bytes.data() + 40);
  if (ndim < 1 || ndim > 7) fail(ErrorKind::CorruptHeader, "bad NIfTI dim[0]");
  NiftiImage img;
  for (int a = 0; a < 3; ++a) {
    const int16_t d = a < ndim ? load_le<int16_t>(bytes.data() + 42 + 2 * a) : int16_t{1};
    if (d < 1) fail(ErrorKind::CorruptHeader, "non-positive NIfTI dimension");
    img.dims[static_cast<std::size_t>(a)] = d;
    const float ps = a < ndim ? load_le<float>(bytes.data() + 80 + 4 * a) : 1.0f;
    img.spacing[static_cast<std::size_t>(a)] = (std::isfinite(ps) && ps > 0.0f) ? std::abs(ps) : 1.0;
  }
  for (int a = 3; a < ndim; ++a) {
    if (load_le<int16_t>(bytes.data() + 42 + 2 * a) > 1) {
      fail(ErrorKind::UnsupportedFormat, "4D+ NIfTI volumes are not supported");
    }
  }
  const int16_t datatype = load_le<int16_t>(bytes.data() + 70);
  const float vox_offset_f = load_le<float>(bytes.data() + 108);
  float slope = load_le<float>(bytes.data() + 112);
  const float inter = load_le<float>(bytes.data() + 116);
  if (!std::isfinite(slope) || slope == 0.0f) slope = 1.0f;
  const auto offset = static_cast<std::size_t>(std::max(352.0f, vox_offset_f));
  const auto n = static_cast<std::size_t>(voxel_count(img.dims));

  std::size_t width = 0;
  switch (datatype) {
    case 2: case 256: width = 1; break;
    case 4: case 512: width = 2; break;
    case 8: case 16: case 768: width = 4; break;
    case 64: width = 8; break;
    default: fail(ErrorKind::UnsupportedFormat, "unsupported NIfTI datatype " + std::to_string(datatype));
  }
  if (bytes.size() < offset + n * width) {
    fail(ErrorKind::CorruptHeader, "truncated NIfTI payload in " + path.string());
  }
  img.values.resize(n);
  const char* p = bytes.data() + offset;
  for (std::size_t i = 0; i < n; ++i, p += width) {
    double v = 0.0;
    switch (datatype) {
      case 2: v = static_cast<unsigned char>(*p); break;
      case 256: v = static_cast<signed char>(*p); break;
      case 4: v = load_le<int16_t>(p); break;
      case 512: v = load_le<uint16_t>(p); break;
      case 8: v = load_le<int32_t>(p); break;
      case 768: v = load_le<uint32_t>(p); break;
      case 16: v = load_le<float>(p); break;
      case 64: v = load_le<double>(p); break;
      default: break;
    }
    img.values[i] = v * slope + inter;
  }
  return img;
}

std::vector<char> nifti_bytes(const Dims3& dims, const Spacing3& spacing, int16_t datatype, int16_t bitpix,
                              const std::vector<char>& payload) {
  std::vector<char> hdr(kNiftiHeaderSize + 4, 0);
  auto put = [&hdr](std::size_t off, auto v) {
    std::vector<char> tmp;
    store_le(tmp, v);
    std::copy(tmp.begin(), tmp.end(), hdr.begin() + static_cast<std::ptrdiff_t>(off));
  };
  put(0, int32_t{348});
  put(40, int16_t{3});
  for (int a = 0; a < 3; ++a) put(42 + 2 * static_cast<std::size_t>(a), static_cast<int16_t>(dims[static_cast<std::size_t>(a)]));
  for (int a = 3; a < 8; ++a) put(42 + 2 * static_cast<std::size_t>(a), int16_t{1});
  put(70, datatype);
  put(72, bitpix);
  put(76, 1.0f);
  for (int a = 0; a < 3; ++a) put(80 + 4 * static_cast<std::size_t>(a), static_cast<float>(spacing[static_cast<std::size_t>(a)]));
  put(108, 352.0f);
  put(112, 1.0f);
  put(116, 0.0f);
  put(123, static_cast<char>(2));  // xyzt_units: mm
  std::memcpy(hdr.data() + 344, "n+1\0", 4);
  hdr.insert(hdr.end(), payload.begin(), payload.end());
  return hdr;
}

}  // namespace

fs::path label_path_for(const fs::path& image_path) {
  const Container c = container_of(image_path);
  const std::string ext = extension_of(c);
  std::string name = image_path.filename().string();
  std::string stem = name.substr(0, name.size() - ext.size());
  if (ends_with(stem, "_image")) {
    stem = stem.substr(0, stem.size() - 6);
  }
  return image_path.parent_path() / (stem + "_label" + ext);
}

LoadedVolume load_volume(const fs::path& path) {
  const Container c = container_of(path);
  if (!fs::exists(path)) fail(ErrorKind::Io, "no such file: " + path.string());
  const auto bytes = read_all(path);
  LoadedVolume out;
  if (c == Container::svol) {
    const auto h = parse_svol_header(bytes, path);
    if (h.kind != "image") fail(ErrorKind::CorruptHeader, "expected an image container: " + path.string());
    if (h.dtype != "float32") fail(ErrorKind::UnsupportedFormat, "unsupported SVOL image dtype " + h.dtype);
    const auto n = static_cast<std::size_t>(voxel_count(h.dims));
    if (bytes.size() != h.payload_offset + n * 4) {
      fail(ErrorKind::CorruptHeader, "payload size mismatch in " + path.string());
    }
    std::vector<float> vox(n);
    for (std::size_t i = 0; i < n; ++i) vox[i] = load_le<float>(bytes.data() + h.payload_offset + 4 * i);
    out.volume = Volume3D(h.dims, h.spacing, std::move(vox), h.modality, h.subject);
  } else {
    auto img = parse_nifti(bytes, path);
    std::vector<float> vox(img.values.begin(), img.values.end());
    std::string subject = path.filename().string();
    subject = subject.substr(0, subject.size() - extension_of(c).size());
    out.volume = Volume3D(img.dims, img.spacing, std::move(vox), Domain::source, subject);
  }
  const auto lp = label_path_for(path);
  if (fs::exists(lp)) out.labels = load_labels(lp);
  return out;
}

LabelVolume load_labels(const fs::path& path, std::optional<int> num_classes) {
  const Container c = container_of(path);
  if (!fs::exists(path)) fail(ErrorKind::Io, "no such file: " + path.string());
  const auto bytes = read_all(path);
  if (c == Container::svol) {
    const auto h = parse_svol_header(bytes, path);
    if (h.kind != "label") fail(ErrorKind::CorruptHeader, "expected a label container: " + path.string());
    if (h.dtype != "int32") fail(ErrorKind::UnsupportedFormat, "unsupported SVOL label dtype " + h.dtype);
    const auto n = static_cast<std::size_t>(voxel_count(h.dims));
    if (bytes.size() != h.payload_offset + n * 4) {
      fail(ErrorKind::CorruptHeader, "payload size mismatch in " + path.string());
    }
    std::vector<std::int32_t> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = load_le<int32_t>(bytes.data() + h.payload_offset + 4 * i);
    return LabelVolume(h.dims, h.spacing, std::move(lab), num_classes.value_or(h.num_classes));
  }
  auto img = parse_nifti(bytes, path);
  std::vector<std::int32_t> lab(img.values.size());
  std::int32_t max_label = 0;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    const double v = img.values[i];
    if (!std::isfinite(v) || v != std::round(v)) fail(ErrorKind::CorruptHeader, "non-integer label value");
    lab[i] = static_cast<std::int32_t>(v);
    max_label = std::max(max_label, lab[i]);
  }
  return LabelVolume(img.dims, img.spacing, std::move(lab), num_classes.value_or(std::max(2, max_label + 1)));
}

void save_volume(const fs::path& path, const Volume3D& volume) {
  const Container c = container_of(path);
  std::vector<char> payload;
  payload.reserve(static_cast<std::size_t>(volume.size()) * 4);
  for (float v : volume.voxels()) store_le(payload, v);
  if (c == Container::svol) {
    auto bytes = svol_header_bytes("image", volume.dims(), volume.spacing(), "float32", 0, volume.modality(),
                                   volume.subject_id());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    write_all(path, bytes, false);
  } else {
    write_all(path, nifti_bytes(volume.dims(), volume.spacing(), 16, 32, payload), c == Container::nifti_gz);
  }
}

void save_labels(const fs::path& path, const LabelVolume& labels) {
  const Container c = container_of(path);
  std::vector<char> payload;
  if (c == Container::svol) {
    for (auto v : labels.labels()) store_le(payload, static_cast<int32_t>(v));
    auto bytes = svol_header_bytes("label", labels.dims(), labels.spacing(), "int32", labels.num_classes(),
                                   Domain::source, {});
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    write_all(path, bytes, false);
  } else {
    for (auto v : labels.labels()) store_le(payload, static_cast<int16_t>(v));
    write_all(path, nifti_bytes(labels.dims(), labels.spacing(), 4, 16, payload), c == Container::nifti_gz);
  }
}

void save_pair(const fs::path& path, const Volume3D& volume, const LabelVolume* labels) {
  save_volume(path, volume);
  if (labels != nullptr) save_labels(label_path_for(path), *labels);
}

}  // namespace sifa
