#pragma once

// Command-line front end: prepare, gentruth, train, predict, eval, plot.
// Exit codes: 0 success, 1 runtime failure, 2 bad arguments.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rdest/rdest.hpp"

namespace rdest::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline NetworkKind parse_net(const std::string& s) {
  if (s == "g") return NetworkKind::G;
  if (s == "f-bits") return NetworkKind::FBits;
  if (s == "f-dist") return NetworkKind::FDist;
  throw ArgumentError("unknown network '" + s + "' (expected g, f-bits or f-dist)");
}

inline std::vector<std::size_t> parse_blocks(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split_fields(text, ',')) {
    std::size_t b = 0;
    if (!parse_exact(trim(part), b) || b == 0) throw ArgumentError("cannot parse block list '" + text + "'");
    out.push_back(b);
  }
  return out;
}

inline SplitSpec parse_ratios(const std::string& text) {
  const auto parts = split_fields(text, ',');
  SplitSpec s;
  if (parts.size() != 3 || !parse_exact(trim(parts[0]), s.train) || !parse_exact(trim(parts[1]), s.val) ||
      !parse_exact(trim(parts[2]), s.test))
    throw ArgumentError("split ratios must be three comma-separated numbers, got '" + text + "'");
  s.validate();
  return s;
}

inline SplitTag parse_eval_split(const std::string& s) {
  const auto t = parse_split(s);
  if (t == SplitTag::Unassigned) throw ArgumentError("unknown split '" + s + "'");
  return t;
}

// RD_SEED, when set, takes precedence over --seed.
inline std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("RD_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    if (!parse_exact(std::string_view(env), v)) throw ArgumentError(std::string("RD_SEED is not an integer: ") + env);
    return v;
  }
  return flag;
}

struct Options {
  // prepare
  std::string images, out, name = "dataset", ratios = "0.7,0.1,0.2";
  std::uint32_t patch = 128, stride = 0;
  // shared
  std::string data, qps, model, csv;
  std::uint64_t seed = 0;
  // gentruth
  std::string import_path;
  // train
  std::string net;
  int max_epochs = 0, patience = 10;
  std::size_t batch = 32;
  double lr = 1e-4, wd = 1e-4;
  // predict
  std::string image;
  // eval
  std::string g_model, fbits_model, fdist_model, blocks, split = "test";
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int prepare(const Options& o) {
    const auto spec = [&] {
      auto s = parse_ratios(o.ratios);
      s.seed = effective_seed(o.seed);
      return s;
    }();
    const auto qps = o.qps.empty() ? kDefaultQps : parse_qp_list(o.qps);
    if (o.patch == 0 || o.patch % 8 != 0) throw ArgumentError("patch size must be a positive multiple of 8");
    if (!fs::is_directory(o.images)) throw ArgumentError("image directory not found: " + o.images);

    std::vector<ImageSource> sources;
    for (const auto& entry : fs::directory_iterator(o.images))
      if (entry.is_regular_file() && is_supported_image(entry.path()))
        sources.push_back({entry.path().filename().string(), entry.path()});
    std::sort(sources.begin(), sources.end(), [](const auto& a, const auto& b) { return a.name < b.name; });

    auto r = ingest_and_crop(sources, o.patch, o.stride);
    r.manifest.name = o.name;
    r.manifest.qps = qps;
    r.manifest.split = spec;
    try {
      split(r.manifest, spec);
    } catch (const ArgumentError& e) {
      err_ << "notice: patches left unassigned: " << e.what() << "\n";
    }
    fs::create_directories(o.out);
    atomic_write_file(fs::path(o.out) / kPatchFile, encode_patch_store(r.store));
    save_manifest(r.manifest, fs::path(o.out) / kManifestFile);
    if (!r.skipped.empty()) err_ << "warning: skipped " << r.skipped.size() << " unreadable image(s)\n";
    out_ << "patches " << r.manifest.entries.size() << " train " << r.manifest.count(SplitTag::Train) << " val "
         << r.manifest.count(SplitTag::Val) << " test " << r.manifest.count(SplitTag::Test) << "\n";
    return kExitOk;
  }

  int gentruth(const Options& o) {
    std::optional<std::vector<int>> requested;
    if (!o.qps.empty()) requested = parse_qp_list(o.qps);
    const fs::path dir(o.data);
    auto ds = load_dataset(dir, false);
    const auto qps = requested.value_or(ds.manifest.qps);
    GroundTruthFile g;
    if (!o.import_path.empty()) {
      g = import_ground_truth(o.import_path);
      if (g.width != ds.store.patch_size || g.height != ds.store.patch_size)
        throw DataIntegrityError("imported ground truth does not match the patch size");
    } else {
      g = generate_ground_truth(ds.manifest, ds.store, qps);
    }
    save_ground_truth(g, dir / kTruthFile);
    out_ << "records " << g.records.size() << "\n";
    return kExitOk;
  }

  int train(const Options& o) {
    const auto kind = parse_net(o.net);
    TrainConfig cfg;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.weight_decay = o.wd;
    cfg.patience = o.patience;
    cfg.max_epochs = o.max_epochs;
    cfg.seed = effective_seed(o.seed);
    cfg.target = target_for(kind);
    cfg.validate();
    std::optional<std::vector<int>> qps;
    if (!o.qps.empty()) qps = parse_qp_list(o.qps);

    const auto ds = load_dataset(o.data);
    const auto use_qps = qps.value_or(ds.truth.qps);
    const DatasetSource train_set(ds, SplitTag::Train, cfg.target, use_qps);
    const DatasetSource val_set(ds, SplitTag::Val, cfg.target, use_qps);
    TrainHooks hooks;
    hooks.on_epoch_end = [&](const EpochRecord& r, const Network&) {
      out_ << "epoch " << r.epoch << " train " << format_number(r.train_loss) << " val "
           << format_number(r.validation_loss) << (r.improved ? " *" : "") << "\n";
    };
    TrainResult res;
    if (kind == NetworkKind::G) {
      auto net = NetworkG::build(cfg.seed, use_qps);
      res = rdest::train(net, train_set, val_set, cfg, hooks);
    } else {
      auto net = NetworkF::build(cfg.seed, use_qps, kind);
      res = rdest::train(net, train_set, val_set, cfg, hooks);
    }
    save_weights(res.best, o.out);
    out_ << "best epoch " << res.best_epoch << " val " << format_number(res.best_validation_loss)
         << (res.early_stopped ? " (early stop)" : "") << "\n";
    return kExitOk;
  }

  int predict(const Options& o) {
    std::optional<NetworkKind> expected;
    if (!o.net.empty()) expected = parse_net(o.net);
    std::optional<std::vector<int>> qps;
    if (!o.qps.empty()) qps = parse_qp_list(o.qps);
    ModelWeights w;
    try {
      w = load_weights(o.model, expected);
    } catch (const LoadError& e) {
      if (e.kind() == LoadErrorKind::KindMismatch) throw ArgumentError(e.what());
      throw;
    }
    const Frame frame = load_luma(o.image);
    if (frame.width % 4 != 0 || frame.height % 4 != 0)
      throw ArgumentError("image dimensions must be multiples of 4");

    if (w.kind == NetworkKind::G) {
      const auto net = NetworkG::from_weights(w);
      const auto use = qps.value_or(w.qps);
      for (int qp : use)
        if (std::find(w.qps.begin(), w.qps.end(), qp) == w.qps.end())
          throw ArgumentError("QP " + std::to_string(qp) + " is not one of the model's QPs");
      if (o.out.empty()) throw ArgumentError("--out is required for g models");
      fs::create_directories(o.out);
      const double scale = distortion_scale(frame.bitdepth);
      out_ << "qp,mean,psnr\n";
      for (int qp : use) {
        const auto m = net.predict(frame, qp);
        Frame map(frame.width, frame.height, frame.bitdepth);
        double sum = 0, sq = 0;
        for (std::size_t i = 0; i < m.data.size(); ++i) {
          const double v = m.data[i];
          sum += v;
          sq += v * v;
          map.samples[i] = static_cast<std::uint16_t>(std::min<long>(std::lround(v * scale), map.max_value()));
        }
        const double n = static_cast<double>(m.data.size());
        save_pgm(map, fs::path(o.out) / (fs::path(o.image).stem().string() + "_qp" + std::to_string(qp) + ".pgm"));
        out_ << qp << "," << format_number(sum / n * scale) << ","
             << format_number(psnr_from_normalized_mse(sq / n, frame.bitdepth)) << "\n";
      }
    } else {
      const auto net = NetworkF::from_weights(w);
      if (qps && *qps != w.qps)
        throw ArgumentError("model predicts QPs " + join(w.qps) + ", request asked for " + join(*qps));
      const auto p = net.predict(frame);
      std::string line;
      for (std::size_t i = 0; i < p.size(); ++i) line += (i ? "," : "") + format_number(p[i]);
      out_ << line << "\n";
    }
    return kExitOk;
  }

  int eval(const Options& o) {
    if (o.g_model.empty() && o.fbits_model.empty() && o.fdist_model.empty())
      throw ArgumentError("eval needs at least one of --g, --f-bits, --f-dist");
    auto blocks = o.blocks.empty() ? kDefaultBlockSizes : parse_blocks(o.blocks);
    const auto split = parse_eval_split(o.split);
    const auto ds = load_dataset(o.data);
    // The default list is trimmed to the dataset; an explicit list is not.
    if (o.blocks.empty()) {
      const auto patch = ds.manifest.patch_size;
      std::erase_if(blocks, [&](std::size_t b) { return patch % b != 0; });
      if (blocks.size() != kDefaultBlockSizes.size())
        err_ << "notice: block sizes that do not divide patch size " << patch << " skipped\n";
    }
    std::vector<BlockPccReport> pcc;
    std::vector<VectorReport> vectors;
    auto append = [&](std::vector<VectorReport> reps) {
      for (auto& r : reps) vectors.push_back(std::move(r));
    };
    if (!o.fbits_model.empty())
      append(evaluate_vectors(NetworkF::from_weights(load_weights(o.fbits_model, NetworkKind::FBits)), ds, split));
    if (!o.fdist_model.empty())
      append(evaluate_vectors(NetworkF::from_weights(load_weights(o.fdist_model, NetworkKind::FDist)), ds, split));
    if (!o.g_model.empty()) {
      auto ev = evaluate_g(NetworkG::from_weights(load_weights(o.g_model, NetworkKind::G)), ds, split, blocks);
      pcc = std::move(ev.pcc);
      vectors.push_back(std::move(ev.psnr));
      vectors.push_back(std::move(ev.mse));
    }
    emit_report(pcc, vectors, o.out);
    out_ << summary_csv(pcc, vectors);
    return kExitOk;
  }

  int plot(const Options& o) {
    const auto bytes = read_file(o.csv);
    const auto written = plot_vectors(std::string(bytes.begin(), bytes.end()), o.out);
    if (written.empty())
      out_ << "notice: no curves in " << o.csv << ", nothing written\n";
    else
      out_ << "wrote " << written.size() << " svg file(s)\n";
    return kExitOk;
  }

 private:
  static std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  }

  std::ostream& out_;
  std::ostream& err_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Rate and distortion estimation toolkit", "rdest"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "Crop luma patches from a directory of images and split them");
  prepare->add_option("--images", o.images, "Directory of PGM/PPM/PNG images")->required();
  prepare->add_option("--out", o.out, "Dataset directory to create")->required();
  prepare->add_option("--patch", o.patch, "Patch size in pixels")->capture_default_str();
  prepare->add_option("--stride", o.stride, "Crop stride in pixels (0 = patch size)")->capture_default_str();
  prepare->add_option("--split", o.ratios, "train,val,test ratios")->capture_default_str();
  prepare->add_option("--qps", o.qps, "QP list recorded in the manifest (default 22,27,32,37)");
  prepare->add_option("--name", o.name, "Dataset name")->capture_default_str();
  prepare->add_option("--seed", o.seed, "Split seed (RD_SEED overrides)")->capture_default_str();

  auto* gentruth = app.add_subcommand("gentruth", "Encode every patch at every QP and store the ground truth");
  gentruth->add_option("--data", o.data, "Dataset directory")->required();
  gentruth->add_option("--qps", o.qps, "QP list (default: the manifest's)");
  gentruth->add_option("--import", o.import_path, "Validate and adopt an externally produced ground-truth file");

  auto* train = app.add_subcommand("train", "Train one estimator");
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--net", o.net, "g, f-bits or f-dist")->required();
  train->add_option("--out", o.out, "Weights file to write")->required();
  train->add_option("--max-epochs", o.max_epochs, "Epoch limit")->required();
  train->add_option("--qps", o.qps, "QP list (default: the ground truth's)");
  train->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  train->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--wd", o.wd, "l2 weight decay")->capture_default_str();
  train->add_option("--patience", o.patience, "Early-stop patience in epochs")->capture_default_str();
  train->add_option("--seed", o.seed, "Initialisation and shuffle seed (RD_SEED overrides)")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Run a trained model on one image");
  predict->add_option("--model", o.model, "Weights file")->required();
  predict->add_option("--image", o.image, "Input image (dimensions multiple of 4)")->required();
  predict->add_option("--qps", o.qps, "QP list (default: the model's)");
  predict->add_option("--net", o.net, "Expected network kind");
  predict->add_option("--out", o.out, "Output directory for g distortion maps");

  auto* eval = app.add_subcommand("eval", "Evaluate models on a dataset split and write CSV reports");
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--out", o.out, "Report directory")->required();
  eval->add_option("--g", o.g_model, "G weights");
  eval->add_option("--f-bits", o.fbits_model, "F-bits weights");
  eval->add_option("--f-dist", o.fdist_model, "F-dist weights");
  eval->add_option("--blocks", o.blocks, "Block sizes for the PCC report (default: 8,16,32,64 that divide the patch)");
  eval->add_option("--split", o.split, "Split to evaluate")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Draw ground-truth vs predicted curves from vectors.csv");
  plot->add_option("--csv", o.csv, "vectors.csv from eval")->required();
  plot->add_option("--out", o.out, "Directory for SVG files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  Runner runner(out, err);
  try {
    if (active == prepare) return runner.prepare(o);
    if (active == gentruth) return runner.gentruth(o);
    if (active == train) return runner.train(o);
    if (active == predict) return runner.predict(o);
    if (active == eval) return runner.eval(o);
    return runner.plot(o);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n" << active->help();
    return kExitUsage;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == LoadErrorKind::KindMismatch ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rdest::cli
