#pragma once

// SVG line charts of ground-truth vs predicted (QP, value) curves read back
// from vectors.csv.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdest/binary_io.hpp"
#include "rdest/errors.hpp"
#include "rdest/text.hpp"

namespace rdest {

struct CurvePair {
  std::uint32_t frame_id = 0;
  std::string kind;
  std::vector<int> qps;
  std::vector<double> gt;
  std::vector<double> pred;
};

// Parses vectors.csv into one CurvePair per (frame, kind), in file order.
// Frechet rows are skipped; an empty file has no curves. Malformed input raises DataIntegrityError naming the line.
inline std::vector<CurvePair> parse_vectors_csv(const std::string& text) {
  std::vector<CurvePair> out;
  std::map<std::pair<std::uint32_t, std::string>, std::size_t> index;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fail = [&](const std::string& why) {
      throw DataIntegrityError("vectors.csv line " + std::to_string(lineno) + ": " + why);
    };
    if (lineno == 1) {
      if (line != "frame_id,kind,qp,gt,pred,abs_err") fail("unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 6) fail("expected 6 fields, found " + std::to_string(f.size()));
    std::uint32_t id = 0;
    if (!parse_exact(f[0], id)) fail("bad frame_id '" + f[0] + "'");
    if (f[1].empty()) fail("empty kind");
    if (f[2] == "frechet") {
      double d = 0;
      if (!parse_exact(f[5], d)) fail("bad frechet distance '" + f[5] + "'");
      continue;
    }
    int qp = 0;
    double gt = 0, pred = 0, err = 0;
    if (!parse_exact(f[2], qp)) fail("bad qp '" + f[2] + "'");
    if (!parse_exact(f[3], gt) || !parse_exact(f[4], pred) || !parse_exact(f[5], err)) fail("bad numeric field");
    auto key = std::make_pair(id, f[1]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({id, f[1], {}, {}, {}});
    }
    auto& c = out[it->second];
    if (!c.qps.empty() && qp <= c.qps.back()) fail("QPs not increasing for frame " + f[0]);
    c.qps.push_back(qp);
    c.gt.push_back(gt);
    c.pred.push_back(pred);
  }
  return out;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string render_svg(const CurvePair& c) {
  constexpr double W = 480, H = 320, left = 64, right = 16, top = 32, bottom = 48;
  const double pw = W - left - right, ph = H - top - bottom;
  const double x0 = c.qps.front(), x1 = c.qps.size() > 1 ? c.qps.back() : x0 + 1;
  double y0 = std::min(*std::min_element(c.gt.begin(), c.gt.end()), *std::min_element(c.pred.begin(), c.pred.end()));
  double y1 = std::max(*std::max_element(c.gt.begin(), c.gt.end()), *std::max_element(c.pred.begin(), c.pred.end()));
  if (!(y1 > y0)) {
    y0 -= 1;
    y1 += 1;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };
  auto polyline = [&](const std::vector<double>& v, const char* colour, const char* dash) {
    std::string pts;
    for (std::size_t i = 0; i < v.size(); ++i)
      pts += (i ? " " : "") + detail::fixed(sx(c.qps[i])) + "," + detail::fixed(sy(v[i]));
    return std::string("  <polyline fill=\"none\" stroke=\"") + colour + "\" stroke-width=\"2\"" + dash + " points=\"" + pts +
           "\"/>\n";
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " "
    << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "  <text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">frame " << c.frame_id << " "
    << c.kind << "</text>\n";
  s << "  <line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  s << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (int qp : c.qps)
    s << "  <text x=\"" << detail::fixed(sx(qp)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << qp
      << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    s << "  <text x=\"" << left - 6 << "\" y=\"" << detail::fixed(sy(v) + 4) << "\" text-anchor=\"end\">"
      << detail::fixed(v, 3) << "</text>\n";
  }
  s << "  <text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">QP</text>\n";
  s << "  <text x=\"14\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << top + ph / 2
    << ")\">" << c.kind << "</text>\n";
  s << polyline(c.gt, "#1f77b4", "");
  s << polyline(c.pred, "#d62728", " stroke-dasharray=\"6 3\"");
  const double lx = left + pw - 110, ly = top + 8;
  s << "  <line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly
    << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  s << "  <text x=\"" << lx + 26 << "\" y=\"" << ly + 4 << "\">ground truth</text>\n";
  s << "  <line x1=\"" << lx << "\" y1=\"" << ly + 16 << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly + 16
    << "\" stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>\n";
  s << "  <text x=\"" << lx + 26 << "\" y=\"" << ly + 20 << "\">predicted</text>\n";
  s << "</svg>\n";
  return s.str();
}

inline std::string svg_filename(const CurvePair& c) { return c.kind + "_frame" + std::to_string(c.frame_id) + ".svg"; }

// Writes one SVG per (frame, kind); returns the written paths.
inline std::vector<std::filesystem::path> plot_vectors(const std::string& csv, const std::filesystem::path& out_dir) {
  const auto curves = parse_vectors_csv(csv);
  std::vector<std::filesystem::path> written;
  if (curves.empty()) return written;
  std::filesystem::create_directories(out_dir);
  for (const auto& c : curves) {
    const auto path = out_dir / svg_filename(c);
    atomic_write_file(path, render_svg(c));
    written.push_back(path);
  }
  return written;
}

}  // namespace rdest
