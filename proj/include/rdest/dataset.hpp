#pragma once

// Dataset preparation: patch cropping, deterministic splits, ground-truth
// generation through the toy codec, and the on-disk formats.
//
// Patch store ("RDPX"), little-endian:
//   magic | u16 version | u32 patch size | u8 bitdepth | u32 count
//   per patch: u32 id | size*size luma bytes
//
// Ground truth ("RDGT"), little-endian:
//   magic | u16 version | u32 W | u32 H | u32 K | K x u32 QP | u32 count
//   per record, ordered by (id, QP):
//     u32 patch id | u32 QP | u32 bits | f32 bpp | f32 mean squared normalised
//     distortion | W*H bytes |orig - recon| in the 8-bit sample domain

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdest/binary_io.hpp"
#include "rdest/codec.hpp"
#include "rdest/frame.hpp"
#include "rdest/image_io.hpp"
#include "rdest/networks.hpp"
#include "rdest/rng.hpp"
#include "rdest/text.hpp"
#include "rdest/train.hpp"

namespace rdest {

enum class SplitTag { Unassigned, Train, Val, Test };

inline std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Unassigned: return "none";
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "none";
}

inline SplitTag parse_split(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  if (s == "none") return SplitTag::Unassigned;
  throw ArgumentError("unknown split '" + s + "'");
}

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train > 0) || !(val > 0) || !(test > 0)) throw ArgumentError("split ratios must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ArgumentError("split ratios must sum to 1");
  }
};

struct PatchEntry {
  std::uint32_t id = 0;
  std::string source;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  SplitTag split = SplitTag::Unassigned;

  friend bool operator==(const PatchEntry&, const PatchEntry&) = default;
};

struct Manifest {
  std::string name = "dataset";
  std::uint32_t patch_size = 128;
  std::uint32_t stride = 128;
  int bitdepth = 8;
  std::vector<int> qps = kDefaultQps;
  SplitSpec split;
  std::vector<PatchEntry> entries;

  std::size_t count(SplitTag tag) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [tag](const PatchEntry& e) { return e.split == tag; }));
  }
  std::vector<std::uint32_t> ids(SplitTag tag) const {
    std::vector<std::uint32_t> out;
    for (const auto& e : entries)
      if (e.split == tag) out.push_back(e.id);
    return out;
  }
};

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename U>
U parse_number(const std::string& s, const std::string& what) {
  U v{};
  if (!parse_exact(trim(s), v)) throw DataIntegrityError("manifest: cannot parse " + what + " from '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<int> parse_qp_list(const std::string& text) {
  std::vector<int> qps;
  for (const auto& part : split_fields(text, ',')) {
    int v = 0;
    if (!parse_exact(trim(part), v))
      throw ArgumentError("cannot parse QP list '" + text + "'");
    qps.push_back(v);
  }
  check_qp_list(qps);
  return qps;
}

// Key/value header followed by a tab-separated entry table.
inline std::string encode_manifest(const Manifest& m) {
  std::ostringstream out;
  out << "# rdest dataset manifest\n";
  out << "name = " << m.name << "\n";
  out << "patch_size = " << m.patch_size << "\n";
  out << "stride = " << m.stride << "\n";
  out << "bitdepth = " << m.bitdepth << "\n";
  out << "qps = " << detail::join_ints(m.qps) << "\n";
  out << "split_ratios = " << format_number(m.split.train) << "," << format_number(m.split.val) << ","
      << format_number(m.split.test) << "\n";
  out << "seed = " << m.split.seed << "\n";
  out << "count_train = " << m.count(SplitTag::Train) << "\n";
  out << "count_val = " << m.count(SplitTag::Val) << "\n";
  out << "count_test = " << m.count(SplitTag::Test) << "\n";
  out << "entries = " << m.entries.size() << "\n";
  out << "id\tsource\tx\ty\tsplit\n";
  for (const auto& e : m.entries)
    out << e.id << "\t" << e.source << "\t" << e.x << "\t" << e.y << "\t" << to_string(e.split) << "\n";
  return out.str();
}

inline Manifest decode_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t expected = 0;
  std::vector<std::pair<SplitTag, std::size_t>> counts;
  bool table = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!table) {
      if (line.rfind("id\t", 0) == 0) {
        table = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataIntegrityError("manifest: expected key = value, got '" + line + "'");
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key == "name") m.name = value;
      else if (key == "patch_size") m.patch_size = detail::parse_number<std::uint32_t>(value, key);
      else if (key == "stride") m.stride = detail::parse_number<std::uint32_t>(value, key);
      else if (key == "bitdepth") m.bitdepth = detail::parse_number<int>(value, key);
      else if (key == "qps") m.qps = parse_qp_list(value);
      else if (key == "split_ratios") {
        const auto parts = split_fields(value, ',');
        if (parts.size() != 3) throw DataIntegrityError("manifest: split_ratios needs three values");
        m.split.train = detail::parse_number<double>(parts[0], key);
        m.split.val = detail::parse_number<double>(parts[1], key);
        m.split.test = detail::parse_number<double>(parts[2], key);
      } else if (key == "seed") m.split.seed = detail::parse_number<std::uint64_t>(value, key);
      else if (key == "entries") expected = detail::parse_number<std::size_t>(value, key);
      else if (key.rfind("count_", 0) == 0) {
        try {
          counts.emplace_back(parse_split(key.substr(6)), detail::parse_number<std::size_t>(value, key));
        } catch (const ArgumentError& e) {
          throw DataIntegrityError(std::string("manifest: ") + e.what());
        }
      }
      continue;
    }
    const auto cols = split_fields(line, '\t');
    if (cols.size() != 5) throw DataIntegrityError("manifest: malformed entry '" + line + "'");
    PatchEntry e;
    e.id = detail::parse_number<std::uint32_t>(cols[0], "id");
    e.source = cols[1];
    e.x = detail::parse_number<std::uint32_t>(cols[2], "x");
    e.y = detail::parse_number<std::uint32_t>(cols[3], "y");
    try {
      e.split = parse_split(cols[4]);
    } catch (const ArgumentError& err) {
      throw DataIntegrityError(std::string("manifest: ") + err.what());
    }
    if (e.id != m.entries.size()) throw DataIntegrityError("manifest: ids must be dense and ascending");
    m.entries.push_back(std::move(e));
  }
  if (m.entries.size() != expected)
    throw DataIntegrityError("manifest: header announces " + std::to_string(expected) + " entries, found " +
                             std::to_string(m.entries.size()));
  for (const auto& [tag, n] : counts)
    if (m.count(tag) != n)
      throw DataIntegrityError("manifest: count_" + to_string(tag) + " is " + std::to_string(n) + " but " +
                               std::to_string(m.count(tag)) + " entries carry that tag");
  return m;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  atomic_write_file(path, encode_manifest(m));
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_manifest(std::string(bytes.begin(), bytes.end()));
}

struct PatchStore {
  static constexpr std::uint16_t kFormatVersion = 1;

  std::uint32_t patch_size = 0;
  int bitdepth = 8;
  std::vector<std::vector<std::uint8_t>> patches;  // indexed by patch id

  Frame frame(std::uint32_t id) const {
    if (id >= patches.size()) throw DataIntegrityError("patch id " + std::to_string(id) + " not in store");
    Frame f(patch_size, patch_size, bitdepth);
    std::copy(patches[id].begin(), patches[id].end(), f.samples.begin());
    return f;
  }

  friend bool operator==(const PatchStore&, const PatchStore&) = default;
};

inline std::vector<std::uint8_t> encode_patch_store(const PatchStore& s) {
  ByteWriter out;
  out.magic("RDPX");
  out.u16(PatchStore::kFormatVersion);
  out.u32(s.patch_size);
  out.u8(static_cast<std::uint8_t>(s.bitdepth));
  out.u32(static_cast<std::uint32_t>(s.patches.size()));
  for (std::size_t i = 0; i < s.patches.size(); ++i) {
    out.u32(static_cast<std::uint32_t>(i));
    out.bytes(s.patches[i]);
  }
  return out.release();
}

inline PatchStore decode_patch_store(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  PatchStore s;
  try {
    if (!in.magic("RDPX")) throw DataIntegrityError("patch store: bad magic");
    if (in.u16() != PatchStore::kFormatVersion) throw DataIntegrityError("patch store: unsupported version");
    s.patch_size = in.u32();
    s.bitdepth = in.u8();
    if (s.bitdepth != 8) throw DataIntegrityError("patch store: only 8-bit patches are supported");
    const auto count = in.u32();
    const std::size_t n = static_cast<std::size_t>(s.patch_size) * s.patch_size;
    for (std::uint32_t i = 0; i < count; ++i) {
      if (in.u32() != i) throw DataIntegrityError("patch store: ids must be dense and ascending");
      auto b = in.bytes(n);
      s.patches.emplace_back(b.begin(), b.end());
    }
    if (!in.at_end()) throw DataIntegrityError("patch store: trailing bytes");
  } catch (const TruncatedError& e) {
    throw DataIntegrityError(std::string("patch store truncated: ") + e.what());
  }
  return s;
}

struct GroundTruthRecord {
  std::uint32_t patch_id = 0;
  int qp = 0;
  std::uint32_t bits = 0;
  float bpp = 0;
  float mse = 0;                  // mean of (D / 2^(n-1))^2
  std::vector<std::uint8_t> map;  // |orig - recon|, W*H

  friend bool operator==(const GroundTruthRecord&, const GroundTruthRecord&) = default;
};

struct GroundTruthFile {
  static constexpr std::uint16_t kFormatVersion = 1;

  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<int> qps;
  std::vector<GroundTruthRecord> records;

  friend bool operator==(const GroundTruthFile&, const GroundTruthFile&) = default;

  const GroundTruthRecord& find(std::uint32_t id, int qp) const {
    // Records are ordered by (id, QP).
    auto it = std::lower_bound(records.begin(), records.end(), std::pair{id, qp}, [](const GroundTruthRecord& r, const auto& key) {
      return std::pair{r.patch_id, r.qp} < key;
    });
    if (it == records.end() || it->patch_id != id || it->qp != qp)
      throw DataIntegrityError("missing ground truth for patch " + std::to_string(id) + " at QP " + std::to_string(qp));
    return *it;
  }
};

// Normalisation of 8-bit differences into the luma input's scale.
inline double distortion_scale(int bitdepth = 8) { return std::ldexp(1.0, bitdepth - 1); }

inline double normalized_mse(std::span<const std::uint8_t> map, int bitdepth = 8) {
  const double s = distortion_scale(bitdepth);
  double acc = 0;
  for (const auto d : map) acc += (d / s) * (d / s);
  return map.empty() ? 0.0 : acc / static_cast<double>(map.size());
}

inline GroundTruthRecord make_record(std::uint32_t id, const EncodeResult& r, int bitdepth = 8) {
  GroundTruthRecord rec;
  rec.patch_id = id;
  rec.qp = r.qp;
  if (r.bits > 0xFFFFFFFFULL) throw ArgumentError("bit count does not fit the ground-truth record");
  rec.bits = static_cast<std::uint32_t>(r.bits);
  rec.bpp = static_cast<float>(r.bpp);
  rec.map.resize(r.distortion.size());
  for (std::size_t i = 0; i < r.distortion.size(); ++i) {
    if (r.distortion[i] > 255) throw ArgumentError("distortion exceeds the 8-bit record domain");
    rec.map[i] = static_cast<std::uint8_t>(r.distortion[i]);
  }
  rec.mse = static_cast<float>(normalized_mse(rec.map, bitdepth));
  return rec;
}

inline std::vector<std::uint8_t> encode_ground_truth(const GroundTruthFile& g) {
  ByteWriter out;
  out.magic("RDGT");
  out.u16(GroundTruthFile::kFormatVersion);
  out.u32(g.width);
  out.u32(g.height);
  out.u32(static_cast<std::uint32_t>(g.qps.size()));
  for (int qp : g.qps) out.u32(static_cast<std::uint32_t>(qp));
  out.u32(static_cast<std::uint32_t>(g.records.size()));
  for (const auto& r : g.records) {
    out.u32(r.patch_id);
    out.u32(static_cast<std::uint32_t>(r.qp));
    out.u32(r.bits);
    out.f32(r.bpp);
    out.f32(r.mse);
    out.bytes(r.map);
  }
  return out.release();
}

// Reads and validates a ground-truth file. Any invariant violation raises
// ImportError naming the offending record. An empty input is an empty list.
inline GroundTruthFile decode_ground_truth(std::span<const std::uint8_t> bytes) {
  GroundTruthFile g;
  if (bytes.empty()) return g;
  ByteReader in(bytes);
  std::size_t index = 0;
  try {
    if (!in.magic("RDGT")) throw ImportError("ground truth: bad magic");
    if (in.u16() != GroundTruthFile::kFormatVersion) throw ImportError("ground truth: unsupported version");
    g.width = in.u32();
    g.height = in.u32();
    const auto k = in.u32();
    if (k > 52) throw ImportError("ground truth: implausible QP count");
    for (std::uint32_t i = 0; i < k; ++i) g.qps.push_back(static_cast<int>(in.u32()));
    try {
      check_qp_list(g.qps);
    } catch (const ArgumentError& e) {
      throw ImportError(std::string("ground truth header: ") + e.what());
    }
    const auto count = in.u32();
    const std::size_t pixels = static_cast<std::size_t>(g.width) * g.height;
    for (; index < count; ++index) {
      GroundTruthRecord r;
      r.patch_id = in.u32();
      r.qp = static_cast<int>(in.u32());
      r.bits = in.u32();
      r.bpp = in.f32();
      r.mse = in.f32();
      auto map = in.bytes(pixels);
      r.map.assign(map.begin(), map.end());
      const std::string where =
          "record " + std::to_string(index) + " (patch " + std::to_string(r.patch_id) + ", QP " + std::to_string(r.qp) + ")";
      if (std::find(g.qps.begin(), g.qps.end(), r.qp) == g.qps.end())
        throw ImportError("ground truth " + where + ": QP not in header list");
      const double bpp = static_cast<double>(r.bits) / static_cast<double>(pixels);
      if (!std::isfinite(r.bpp) || std::abs(r.bpp - bpp) > 1e-6 * std::max(1.0, bpp))
        throw ImportError("ground truth " + where + ": bpp " + format_number(r.bpp) +
                          " inconsistent with bits/(W*H) = " + format_number(bpp));
      const double mse = normalized_mse(r.map);
      if (!std::isfinite(r.mse) || std::abs(r.mse - mse) > 1e-6)
        throw ImportError("ground truth " + where + ": stored mse inconsistent with distortion map");
      if (!g.records.empty()) {
        const auto& prev = g.records.back();
        if (std::pair{prev.patch_id, prev.qp} >= std::pair{r.patch_id, r.qp})
          throw ImportError("ground truth " + where + ": records not ordered by (id, QP)");
      }
      g.records.push_back(std::move(r));
    }
    if (!in.at_end()) throw ImportError("ground truth: trailing bytes after last record");
  } catch (const TruncatedError&) {
    throw ImportError("ground truth truncated in record " + std::to_string(index));
  }
  return g;
}

inline void save_ground_truth(const GroundTruthFile& g, const std::filesystem::path& path) {
  atomic_write_file(path, encode_ground_truth(g));
}

inline GroundTruthFile import_ground_truth(const std::filesystem::path& path) { return decode_ground_truth(read_file(path)); }

struct IngestResult {
  Manifest manifest;
  PatchStore store;
  std::vector<std::string> skipped;  // unreadable sources
};

struct ImageSource {
  std::string name;  // recorded in the manifest
  std::filesystem::path path;
};

// Crops a top-left aligned grid of full patch_size x patch_size luma patches
// from each image, stepping by `stride`. Unreadable files are skipped and
// listed; zero usable patches is an error.
inline IngestResult ingest_and_crop(const std::vector<ImageSource>& images, std::uint32_t patch_size, std::uint32_t stride = 0) {
  if (patch_size == 0) throw ArgumentError("patch size must be positive");
  if (stride == 0) stride = patch_size;
  IngestResult out;
  out.manifest.patch_size = patch_size;
  out.manifest.stride = stride;
  out.store.patch_size = patch_size;
  for (const auto& img : images) {
    Frame f;
    try {
      f = load_luma(img.path);
    } catch (const Error&) {
      out.skipped.push_back(img.name);
      continue;
    }
    for (std::size_t y = 0; y + patch_size <= f.height; y += stride)
      for (std::size_t x = 0; x + patch_size <= f.width; x += stride) {
        PatchEntry e;
        e.id = static_cast<std::uint32_t>(out.manifest.entries.size());
        e.source = img.name;
        e.x = static_cast<std::uint32_t>(x);
        e.y = static_cast<std::uint32_t>(y);
        std::vector<std::uint8_t> patch(static_cast<std::size_t>(patch_size) * patch_size);
        for (std::size_t py = 0; py < patch_size; ++py)
          for (std::size_t px = 0; px < patch_size; ++px)
            patch[py * patch_size + px] = static_cast<std::uint8_t>(f.at(x + px, y + py));
        out.manifest.entries.push_back(std::move(e));
        out.store.patches.push_back(std::move(patch));
      }
  }
  if (out.manifest.entries.empty()) throw ArgumentError("no usable patches in the given images");
  return out;
}

// Seeded shuffle of the ids, then contiguous train / val / test partition.
inline void split(Manifest& m, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = m.entries.size();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
    throw ArgumentError("split ratios leave an empty split for " + std::to_string(n) + " patches");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    m.entries[order[i]].split = i < n_train ? SplitTag::Train : (i < n_train + n_val ? SplitTag::Val : SplitTag::Test);
  m.split = spec;
}

inline GroundTruthFile generate_ground_truth(const Manifest& m, const PatchStore& store, const std::vector<int>& qps) {
  check_qp_list(qps);
  GroundTruthFile g;
  g.width = g.height = store.patch_size;
  g.qps = qps;
  for (const auto& e : m.entries) {
    const Frame f = store.frame(e.id);
    for (int qp : qps) {
      try {
        g.records.push_back(make_record(e.id, encode_intra(f, qp), store.bitdepth));
      } catch (const Error& err) {
        throw DataIntegrityError("patch " + std::to_string(e.id) + ": " + err.what());
      }
    }
  }
  return g;
}

struct Dataset {
  Manifest manifest;
  PatchStore store;
  GroundTruthFile truth;
};

inline const char* kManifestFile = "manifest.txt";
inline const char* kPatchFile = "patches.rdpx";
inline const char* kTruthFile = "groundtruth.rdgt";

inline Dataset load_dataset(const std::filesystem::path& dir, bool need_truth = true) {
  Dataset d;
  d.manifest = load_manifest(dir / kManifestFile);
  d.store = decode_patch_store(read_file(dir / kPatchFile));
  if (d.store.patches.size() != d.manifest.entries.size())
    throw DataIntegrityError("patch store and manifest disagree on patch count");
  if (need_truth) {
    if (!std::filesystem::exists(dir / kTruthFile))
      throw DataIntegrityError("no ground truth in " + dir.string() + " (run gentruth first)");
    d.truth = import_ground_truth(dir / kTruthFile);
  }
  return d;
}

// Training samples for one split. G: one sample per (patch, QP), ordered by
// patch id then QP. F: one sample per patch with a K-vector target.
class DatasetSource : public SampleSource {
 public:
  DatasetSource(const Dataset& data, SplitTag split, TargetKind kind, std::vector<int> qps = {})
      : data_(&data), kind_(kind), qps_(qps.empty() ? data.truth.qps : std::move(qps)) {
    for (int qp : qps_)
      if (std::find(data.truth.qps.begin(), data.truth.qps.end(), qp) == data.truth.qps.end())
        throw DataIntegrityError("QP " + std::to_string(qp) + " has no ground truth");
    for (auto id : data.manifest.ids(split)) {
      if (kind_ == TargetKind::DistortionMap)
        for (int qp : qps_) samples_.push_back({id, qp});
      else
        samples_.push_back({id, 0});
    }
  }

  std::size_t size() const override { return samples_.size(); }
  const std::vector<int>& qps() const noexcept { return qps_; }
  std::pair<std::uint32_t, int> key(std::size_t i) const { return samples_.at(i); }

  Batch batch(std::span<const std::size_t> indices) const override {
    const std::size_t P = data_->store.patch_size;
    const Shape plane{1, 1, P, P};
    Batch b;
    b.indices.assign(indices.begin(), indices.end());
    const std::size_t N = indices.size();
    if (kind_ == TargetKind::DistortionMap) {
      b.inputs = Tensor<float>(Shape{N, 2, P, P});
      b.targets = Tensor<float>(Shape{N, 1, P, P});
    } else {
      b.inputs = Tensor<float>(Shape{N, 1, P, P});
      b.targets = Tensor<float>(Shape{N, qps_.size(), 1, 1});
    }
    const double scale = distortion_scale(data_->store.bitdepth);
    for (std::size_t n = 0; n < N; ++n) {
      const auto [id, qp] = samples_.at(indices[n]);
      const auto image = normalize_image(data_->store.frame(id));
      float* in = b.inputs.data.data() + n * b.inputs.shape.sample();
      if (kind_ == TargetKind::DistortionMap) {
        std::fill_n(in, plane.size(), normalize_qp(qp));
        std::copy(image.data.begin(), image.data.end(), in + plane.size());
        const auto& rec = data_->truth.find(id, qp);
        float* tg = b.targets.data.data() + n * plane.size();
        for (std::size_t i = 0; i < plane.size(); ++i) tg[i] = static_cast<float>(rec.map[i] / scale);
      } else {
        std::copy(image.data.begin(), image.data.end(), in);
        for (std::size_t k = 0; k < qps_.size(); ++k) {
          const auto& rec = data_->truth.find(id, qps_[k]);
          b.targets.data[n * qps_.size() + k] =
              kind_ == TargetKind::BppVector
                  ? static_cast<float>(static_cast<double>(rec.bits) / static_cast<double>(P * P))
                  : rec.mse;
        }
      }
    }
    return b;
  }

 private:
  const Dataset* data_;
  TargetKind kind_;
  std::vector<int> qps_;
  std::vector<std::pair<std::uint32_t, int>> samples_;
};

// One epoch of batches; the order is a pure function of (seed, epoch).
inline std::vector<Batch> batches(const SampleSource& source, std::size_t batch_size, std::uint64_t seed, int epoch) {
  if (batch_size == 0) throw ArgumentError("batch size must be >= 1");
  std::vector<Batch> out;
  for (const auto& idx : split_batches(epoch_order(source.size(), seed, epoch), batch_size)) out.push_back(source.batch(idx));
  return out;
}

}  // namespace rdest
