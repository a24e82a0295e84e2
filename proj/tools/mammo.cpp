#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mammo/cli.hpp"

namespace {

void add_archive_options(CLI::App* cmd, mammo::cli::ArchiveOptions& a) {
  cmd->add_option("archive", a.archive, "MIAS-layout directory (info file plus <id>.pgm images)")->required();
  cmd->add_option("--info", a.info_file, "Label file name inside the archive")->capture_default_str();
  cmd->add_flag("!--top-left-origin", a.origin_bottom_left,
                "Treat abnormality coordinates as top-left origin (default: bottom-left, as in MIAS)");
}

} // namespace

int main(int argc, char** argv) {
  using namespace mammo::cli;
  CLI::App app{"Wavelet-feature mammogram diagnosis: decomposition, cascade training, diagnosis, experiment grid"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Write the multilevel wavelet decomposition of a PGM image");
  c_dec->add_option("image", dec.image, "Binary PGM image")->required();
  c_dec->add_option("out_dir", dec.out_dir, "Directory for {level}_{subband}.txt files")->required();
  c_dec->add_option("-f,--filter", dec.filter, "daub4 or daub8")->capture_default_str();
  c_dec->add_option("-l,--levels", dec.levels, "Decomposition levels")->capture_default_str();

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "Extract feature vectors for every ROI of an archive as CSV");
  add_archive_options(c_feat, feat.archive);
  c_feat->add_option("out_csv", feat.out_csv, "Output CSV path")->required();
  c_feat->add_option("-f,--filter", feat.filter, "daub4 or daub8")->capture_default_str();
  c_feat->add_option("-k", feat.k, "Coefficients kept per level")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the three-level cascade on an archive");
  add_archive_options(c_tr, tr.archive);
  c_tr->add_option("model_dir", tr.model_dir, "Output model directory")->required();
  c_tr->add_option("-f,--filter", tr.filter, "daub4 or daub8")->capture_default_str();
  c_tr->add_option("-k", tr.k, "Coefficients kept per level")->capture_default_str();
  c_tr->add_option("-S,--hidden", tr.hidden, "Hidden neurons")->capture_default_str();
  c_tr->add_option("--mc,--momentum", tr.momentum, "Momentum constant in [0,1)")->capture_default_str();
  c_tr->add_option("--eta,--learning-rate", tr.learning_rate, "Learning rate")->capture_default_str();
  c_tr->add_option("--epochs", tr.max_epochs, "Maximum training epochs per net")->capture_default_str();
  c_tr->add_option("--target-accuracy", tr.target_accuracy, "Training accuracy that stops training")
      ->capture_default_str();
  c_tr->add_option("--n-train", tr.n_train, "Training ROIs (stratified)")->capture_default_str();
  c_tr->add_option("--seed", tr.seed, "Master seed for split, initialization and shuffling")->capture_default_str();

  DiagnoseArgs dg;
  auto* c_dg = app.add_subcommand("diagnose", "Diagnose one 128x128 ROI with a trained cascade");
  c_dg->add_option("model_dir", dg.model_dir, "Model directory written by 'train'")->required();
  c_dg->add_option("image", dg.image, "128x128 binary PGM")->required();

  GridArgs gr;
  gr.workers = std::max(1u, std::thread::hardware_concurrency());
  auto* c_gr = app.add_subcommand("grid", "Run an experiment grid and write TSV/text reports");
  add_archive_options(c_gr, gr.archive);
  c_gr->add_option("grid_file", gr.grid_file, "One experiment per line: id S MC wavelet eta max_epochs seed")
      ->required();
  c_gr->add_option("out", gr.out, "Report base path (.tsv, .txt, .losses.jsonl are appended)")->required();
  c_gr->add_option("--n-train", gr.n_train, "Training ROIs (stratified)")->capture_default_str();
  c_gr->add_option("--split-seed", gr.split_seed, "Seed of the training split")->capture_default_str();
  c_gr->add_option("-k", gr.k, "Coefficients kept per level")->capture_default_str();
  c_gr->add_option("--target-accuracy", gr.target_accuracy, "Training accuracy that stops training")
      ->capture_default_str();
  c_gr->add_option("-j,--workers", gr.workers, "Concurrent experiments")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;  // usage errors are validation errors
  }

  if (c_dec->parsed()) return cmd_decompose(dec, std::cout, std::cerr);
  if (c_feat->parsed()) return cmd_features(feat, std::cout, std::cerr);
  if (c_tr->parsed()) return cmd_train(tr, std::cout, std::cerr);
  if (c_dg->parsed()) return cmd_diagnose(dg, std::cout, std::cerr);
  if (c_gr->parsed()) return cmd_grid(gr, std::cout, std::cerr);
  return kValidation;
}
