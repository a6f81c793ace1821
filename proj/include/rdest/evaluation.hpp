#pragma once

// Test-set evaluation: block-wise PCC of distortion maps per (QP, block size)
// and per-frame vector comparisons (MAE, curve Frechet), plus CSV reports.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rdest/binary_io.hpp"
#include "rdest/codec.hpp"
#include "rdest/dataset.hpp"
#include "rdest/metrics.hpp"
#include "rdest/networks.hpp"
#include "rdest/text.hpp"

namespace rdest {

inline const std::vector<std::size_t> kDefaultBlockSizes{8, 16, 32, 64};

struct BlockPccReport {
  int qp = 0;
  std::size_t block = 0;
  std::vector<std::uint32_t> frame_ids;  // frames that produced a PCC
  std::vector<double> pccs;
  std::size_t skipped = 0;  // zero-variance frames

  MeanStd summary() const { return mean_std(pccs); }
};

// Mse kinds are in the normalised domain, mean of (D / 2^(n-1))^2.
enum class VectorKind { Bpp, Psnr, Mse, PsnrG, MseG };

inline std::string to_string(VectorKind k) {
  switch (k) {
    case VectorKind::Bpp: return "bpp";
    case VectorKind::Psnr: return "psnr";
    case VectorKind::Mse: return "mse";
    case VectorKind::PsnrG: return "psnr_g";
    case VectorKind::MseG: return "mse_g";
  }
  return "bpp";
}

struct FrameVectors {
  std::uint32_t frame_id = 0;
  std::vector<int> qps;
  std::vector<double> gt;
  std::vector<double> pred;
  double mae = 0;
  double frechet = 0;
};

inline FrameVectors compare_vectors(std::uint32_t id, const std::vector<int>& qps, std::vector<double> gt,
                                    std::vector<double> pred) {
  FrameVectors f;
  f.frame_id = id;
  f.qps = qps;
  f.mae = mean_absolute_error(gt, pred);
  f.frechet = curve_frechet({qps, gt}, {qps, pred});
  f.gt = std::move(gt);
  f.pred = std::move(pred);
  return f;
}

struct VectorReport {
  VectorKind kind = VectorKind::Bpp;
  std::vector<FrameVectors> frames;

  MeanStd mae() const {
    std::vector<double> v;
    for (const auto& f : frames) v.push_back(f.mae);
    return mean_std(v);
  }
  MeanStd frechet() const {
    std::vector<double> v;
    for (const auto& f : frames) v.push_back(f.frechet);
    return mean_std(v);
  }
};

// Peak of the 8-bit sample domain used for every PSNR in reports.
inline double sample_peak(int bitdepth = 8) { return std::ldexp(1.0, bitdepth) - 1.0; }

inline double psnr_from_normalized_mse(double mse_norm, int bitdepth = 8) {
  const double s = distortion_scale(bitdepth);
  return psnr_from_mse(mse_norm * s * s, sample_peak(bitdepth));
}

// Ground-truth K-vector for one patch, recomputed from bits and the stored map.
inline std::vector<double> truth_vector(const Dataset& data, std::uint32_t id, const std::vector<int>& qps, VectorKind kind) {
  std::vector<double> out;
  const double pixels = static_cast<double>(data.truth.width) * data.truth.height;
  for (int qp : qps) {
    const auto& rec = data.truth.find(id, qp);
    const double mse = normalized_mse(rec.map, data.store.bitdepth);
    switch (kind) {
      case VectorKind::Bpp: out.push_back(static_cast<double>(rec.bits) / pixels); break;
      case VectorKind::Psnr:
      case VectorKind::PsnrG: out.push_back(psnr_from_normalized_mse(mse, data.store.bitdepth)); break;
      case VectorKind::Mse:
      case VectorKind::MseG: out.push_back(mse); break;
    }
  }
  return out;
}

// Predicted distortion map for (patch, QP) in the normalised domain.
using MapPredictor = std::function<std::vector<float>(const Frame& frame, int qp, std::uint32_t id)>;

struct MapEvaluation {
  std::vector<BlockPccReport> pcc;  // ordered by QP, then block size
  VectorReport psnr;                // derived from the predicted maps
  VectorReport mse;
};

inline MapEvaluation evaluate_maps(const Dataset& data, SplitTag split, const std::vector<int>& qps,
                                   const std::vector<std::size_t>& blocks, const MapPredictor& predict) {
  check_qp_list(qps);
  const std::size_t P = data.store.patch_size;
  for (auto b : blocks)
    if (b == 0 || P % b != 0) throw ArgumentError("block size " + std::to_string(b) + " does not divide patch size " + std::to_string(P));
  MapEvaluation ev;
  ev.psnr.kind = VectorKind::PsnrG;
  ev.mse.kind = VectorKind::MseG;
  for (int qp : qps)
    for (auto b : blocks) ev.pcc.push_back({qp, b, {}, {}, 0});
  const double scale = distortion_scale(data.store.bitdepth);
  for (auto id : data.manifest.ids(split)) {
    const Frame frame = data.store.frame(id);
    std::vector<double> pred_psnr, pred_mse;
    for (std::size_t q = 0; q < qps.size(); ++q) {
      const auto& rec = data.truth.find(id, qps[q]);
      std::vector<double> d(rec.map.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = rec.map[i] / scale;
      const auto m = predict(frame, qps[q], id);
      if (m.size() != d.size()) throw DimensionError("predicted map size differs from ground truth");
      double sq = 0;
      for (float v : m) sq += static_cast<double>(v) * v;
      pred_mse.push_back(sq / static_cast<double>(m.size()));
      pred_psnr.push_back(psnr_from_normalized_mse(pred_mse.back(), data.store.bitdepth));
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        auto& rep = ev.pcc[q * blocks.size() + bi];
        const auto bd = block_reduce<double>(d, P, P, blocks[bi]);
        const auto bm = block_reduce<float>(m, P, P, blocks[bi]);
        if (bd.size() < 2) {
          ++rep.skipped;
          continue;
        }
        if (auto r = pearson(bd, bm)) {
          rep.pccs.push_back(*r);
          rep.frame_ids.push_back(id);
        } else {
          ++rep.skipped;
        }
      }
    }
    ev.psnr.frames.push_back(compare_vectors(id, qps, truth_vector(data, id, qps, VectorKind::PsnrG), std::move(pred_psnr)));
    ev.mse.frames.push_back(compare_vectors(id, qps, truth_vector(data, id, qps, VectorKind::MseG), std::move(pred_mse)));
  }
  return ev;
}

inline MapEvaluation evaluate_g(const NetworkG& net, const Dataset& data, SplitTag split,
                                const std::vector<std::size_t>& blocks = kDefaultBlockSizes) {
  return evaluate_maps(data, split, net.qps(), blocks, [&](const Frame& f, int qp, std::uint32_t) {
    const auto m = net.predict(f, qp).data;
    return std::vector<float>(m.begin(), m.end());
  });
}

inline std::vector<BlockPccReport> evaluate_distortion_maps(const NetworkG& net, const Dataset& data, SplitTag split,
                                                            const std::vector<std::size_t>& blocks = kDefaultBlockSizes) {
  return evaluate_g(net, data, split, blocks).pcc;
}

// F-bits yields a bpp report; F-dist yields PSNR and normalised-mse reports.
inline std::vector<VectorReport> evaluate_vectors(const NetworkF& net, const Dataset& data, SplitTag split) {
  std::vector<VectorReport> reps;
  if (net.kind() == NetworkKind::FBits)
    reps.push_back({VectorKind::Bpp, {}});
  else
    reps = {{VectorKind::Psnr, {}}, {VectorKind::Mse, {}}};
  for (auto id : data.manifest.ids(split)) {
    const auto p = net.predict(data.store.frame(id));
    for (auto& rep : reps) {
      std::vector<double> pred;
      for (float v : p)
        pred.push_back(rep.kind == VectorKind::Psnr ? psnr_from_normalized_mse(static_cast<double>(v), data.store.bitdepth)
                                                    : static_cast<double>(v));
      rep.frames.push_back(compare_vectors(id, net.qps(), truth_vector(data, id, net.qps(), rep.kind), std::move(pred)));
    }
  }
  return reps;
}

inline std::string pcc_csv(const std::vector<BlockPccReport>& reports) {
  std::ostringstream out;
  out << "qp,block,mean_pcc,std_pcc,frames,skipped\n";
  for (const auto& r : reports) {
    if (r.pccs.empty() && r.skipped == 0) continue;
    out << r.qp << "," << r.block << ",";
    if (r.pccs.empty()) {
      out << ",";
    } else {
      const auto s = r.summary();
      out << format_number(s.mean) << "," << format_number(s.std);
    }
    out << "," << r.pccs.size() << "," << r.skipped << "\n";
  }
  return out.str();
}

// Per-frame rows, one per QP, followed by one "frechet" row per frame whose
// distance sits in the abs_err column.
inline std::string vectors_csv(const std::vector<VectorReport>& reports) {
  std::ostringstream out;
  out << "frame_id,kind,qp,gt,pred,abs_err\n";
  for (const auto& rep : reports)
    for (const auto& f : rep.frames) {
      for (std::size_t i = 0; i < f.qps.size(); ++i)
        out << f.frame_id << "," << to_string(rep.kind) << "," << f.qps[i] << "," << format_number(f.gt[i]) << ","
            << format_number(f.pred[i]) << "," << format_number(std::abs(f.gt[i] - f.pred[i])) << "\n";
      out << f.frame_id << "," << to_string(rep.kind) << ",frechet,,," << format_number(f.frechet) << "\n";
    }
  return out.str();
}

inline std::string summary_csv(const std::vector<BlockPccReport>& pcc, const std::vector<VectorReport>& vectors) {
  std::ostringstream out;
  out << "kind,metric,mean,std\n";
  for (const auto& r : pcc) {
    if (r.pccs.empty()) continue;
    const auto s = r.summary();
    out << "pcc,qp" << r.qp << "_b" << r.block << "," << format_number(s.mean) << "," << format_number(s.std) << "\n";
  }
  for (const auto& rep : vectors) {
    if (rep.frames.empty()) continue;
    const auto m = rep.mae(), f = rep.frechet();
    out << to_string(rep.kind) << ",mae," << format_number(m.mean) << "," << format_number(m.std) << "\n";
    out << to_string(rep.kind) << ",frechet," << format_number(f.mean) << "," << format_number(f.std) << "\n";
  }
  return out.str();
}

inline void emit_report(const std::vector<BlockPccReport>& pcc, const std::vector<VectorReport>& vectors,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  atomic_write_file(dir / "pcc.csv", pcc_csv(pcc));
  atomic_write_file(dir / "vectors.csv", vectors_csv(vectors));
  atomic_write_file(dir / "summary.csv", summary_csv(pcc, vectors));
}

}  // namespace rdest
