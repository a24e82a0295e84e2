#pragma once

// Subcommand bodies for the mammo tool. Each returns a process exit status:
// 0 success, 1 validation or domain error, 2 I/O error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include "cascade.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "plane.hpp"
#include "report.hpp"
#include "wavelet.hpp"

namespace mammo::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

inline int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

struct ArchiveOptions {
  std::filesystem::path archive;
  std::string info_file = "Info.txt";
  bool origin_bottom_left = true;
};

inline dataset::RoiSet load_archive(const ArchiveOptions& opts, std::ostream& log) {
  const auto info = opts.archive / opts.info_file;
  std::ifstream in(info);
  if (!in) throw IoError("cannot read archive info file " + info.string());
  const auto records = dataset::parse_mias_info(in);
  auto set = dataset::build_roi_set(records, dataset::directory_loader(opts.archive), opts.origin_bottom_left);
  for (const auto& s : set.skipped) log << "warning: skipped abnormal record without coordinates: " << s << '\n';
  log << "records: " << records.size() << ", ROIs: " << set.rois.size() << ", skipped: " << set.skipped.size()
      << '\n';
  return set;
}

struct DecomposeArgs {
  std::filesystem::path image;
  std::string filter = "daub4";
  std::size_t levels = 3;
  std::filesystem::path out_dir;
};

inline int cmd_decompose(const DecomposeArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto img = plane_cast<double>(dataset::load_pgm(a.image));
    const auto& filter = wavelet::make_filter(a.filter);
    const auto decomp = wavelet::decompose_multilevel(img, filter, a.levels);
    const auto files = wavelet::write_decomposition(decomp, a.out_dir);
    out << "input " << img.rows() << "x" << img.cols() << ", filter " << wavelet::to_string(filter.name) << ", "
        << a.levels << " levels\n";
    for (std::size_t l = 0; l < decomp.levels.size(); ++l)
      out << "level " << l + 1 << ": H/V/D " << decomp.levels[l].H.rows() << "x" << decomp.levels[l].H.cols() << '\n';
    out << "final approximation: " << decomp.final_approximation.rows() << "x" << decomp.final_approximation.cols()
        << '\n';
    out << files.size() << " files written to " << a.out_dir.string() << '\n';
  });
}

struct FeaturesArgs {
  ArchiveOptions archive;
  std::string filter = "daub4";
  std::size_t k = features::kDefaultPerLevel;
  std::filesystem::path out_csv;
};

inline int cmd_features(const FeaturesArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto set = load_archive(a.archive, err);
    const auto vectors = eval::extract_all(set.rois, wavelet::parse_filter_name(a.filter), a.k);
    std::vector<std::string> ids;
    for (const auto& r : set.rois) ids.push_back(r.name());
    std::ofstream os(a.out_csv);
    if (!os) throw IoError("cannot write " + a.out_csv.string());
    features::write_csv(os, ids, vectors);
    out << vectors.size() << " feature vectors written to " << a.out_csv.string() << '\n';
  });
}

struct TrainArgs {
  ArchiveOptions archive;
  std::filesystem::path model_dir;
  std::string filter = "daub8";
  std::size_t k = features::kDefaultPerLevel;
  std::size_t hidden = 20;
  double momentum = 0.95;
  double learning_rate = 0.1;
  std::size_t max_epochs = 10000;
  double target_accuracy = 1.0;
  std::size_t n_train = 150;
  std::uint64_t seed = 0;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto set = load_archive(a.archive, err);
    const auto split = dataset::split_dataset(set.rois, a.n_train, a.seed);
    const auto vectors = eval::extract_all(set.rois, wavelet::parse_filter_name(a.filter), a.k);

    const std::set<dataset::RoiRef> chosen(split.train_ids.begin(), split.train_ids.end());
    std::vector<cascade::LabeledVector> training;
    for (std::size_t i = 0; i < set.rois.size(); ++i)
      if (chosen.count({set.rois[i].source_id, set.rois[i].roi_index})) training.push_back({vectors[i], set.rois[i].label});

    auto configs = cascade::level_configs(vectors.front().size(), a.hidden, a.momentum, a.learning_rate, a.max_epochs,
                                          a.seed);
    for (auto& c : configs) c.target_train_accuracy = a.target_accuracy;
    const auto trained = cascade::train_cascade(training, configs, a.seed);
    cascade::save_cascade(trained.model, a.model_dir);

    out << "trained on " << training.size() << " of " << set.rois.size() << " ROIs (eta=" << a.learning_rate
        << ", max_epochs=" << a.max_epochs << ", S=" << a.hidden << ", MC=" << a.momentum << ")\n";
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = trained.reports[i];
      out << "level " << i + 1 << ": epochs=" << r.epochs_run << " train_accuracy=" << r.final_train_accuracy
          << " stopped_by=" << nn::to_string(r.stopped_by) << '\n';
    }
    out << "model written to " << a.model_dir.string() << '\n';
  });
}

struct DiagnoseArgs {
  std::filesystem::path model_dir;
  std::filesystem::path image;
};

inline int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto model = cascade::load_cascade(a.model_dir);
    const auto img = dataset::load_pgm(a.image);
    if (img.rows() != cascade::kRoiSize || img.cols() != cascade::kRoiSize)
      throw ValidationError("image is " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                            ", model expects " + std::to_string(cascade::kRoiSize) + "x" +
                            std::to_string(cascade::kRoiSize) + " ROIs");
    const auto fv = features::extract_from_image(plane_cast<double>(img), model.filter, model.k);
    out << to_string(cascade::diagnose(model, fv)) << '\n';
  });
}

struct GridArgs {
  ArchiveOptions archive;
  std::filesystem::path grid_file;
  std::filesystem::path out;  // report base path; .tsv/.txt/... appended
  std::size_t n_train = 150;
  std::uint64_t split_seed = 0;
  std::size_t k = features::kDefaultPerLevel;
  double target_accuracy = 1.0;
  std::size_t workers = 0;
};

inline std::vector<eval::ExperimentConfig> read_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read grid file " + path.string());
  auto grid = report::parse_grid(in);
  if (grid.empty()) throw ValidationError("grid file " + path.string() + " lists no experiments");
  return grid;
}

inline int cmd_grid(const GridArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto grid = read_grid_file(a.grid_file);
    const auto set = load_archive(a.archive, err);
    const auto split = dataset::split_dataset(set.rois, a.n_train, a.split_seed);

    eval::GridOptions opts;
    opts.workers = a.workers;
    opts.experiment.k = a.k;
    opts.experiment.target_train_accuracy = a.target_accuracy;
    const auto results = eval::run_grid(grid, split, set.rois, opts);

    report::Provenance prov{a.n_train, set.rois.size(), a.k, features::kLevels, a.split_seed};
    auto base = a.out;
    if (base.extension() == ".tsv" || base.extension() == ".txt") base.replace_extension();
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    auto open = [&base](const std::string& suffix) {
      std::ofstream os(base.string() + suffix);
      if (!os) throw IoError("cannot write " + base.string() + suffix);
      return os;
    };
    {
      auto os = open(".tsv");
      report::write_tsv(os, results, prov);
    }
    {
      auto os = open(".txt");
      report::write_table(os, results, prov);
      os << "\nComparison with the published level-2 results:\n";
      report::write_comparison(os, results);
    }
    {
      auto os = open(".losses.jsonl");
      report::write_loss_log(os, results);
    }
    report::write_table(out, results, prov);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.error.has_value();
    out << results.size() << " experiments, " << failed << " failed; reports at " << base.string() << ".{tsv,txt}\n";
  });
}

} // namespace mammo::cli
