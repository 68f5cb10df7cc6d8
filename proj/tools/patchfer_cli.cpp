// patchfer: train, evaluate and run the patch-based expression classifier.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "patchfer/patchfer.hpp"

namespace fs = std::filesystem;
using namespace patchfer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitConvergence = 4;

struct ConfigFlags {
  std::string kernel = "rbf";
  double c = 1.0;
  double gamma = 0.0;
  int degree = 3;
  double coef0 = 1.0;
  int lbp_bins = 64;
  int phog_bins = 9;
  int phog_levels = 3;
  int patch_size = 32;
  std::uint64_t seed = 0;
  std::string features = "both";
  std::string layout_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kernel", kernel, "SVM kernel")->check(CLI::IsMember({"linear", "poly", "rbf"}));
    cmd->add_option("--c", c, "SVM regularization C");
    cmd->add_option("--gamma", gamma, "RBF gamma (0 = 1 / reduced dimension)");
    cmd->add_option("--degree", degree, "polynomial kernel degree");
    cmd->add_option("--coef0", coef0, "polynomial kernel offset");
    cmd->add_option("--lbp-bins", lbp_bins, "LBP histogram bins")->check(CLI::IsMember({16, 32, 64, 128, 256}));
    cmd->add_option("--phog-bins", phog_bins, "PHOG orientation bins");
    cmd->add_option("--phog-levels", phog_levels, "PHOG pyramid levels");
    cmd->add_option("--patch-size", patch_size, "active patch side in pixels (multiple of 8)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--features", features, "feature families")->check(CLI::IsMember({"phog", "lbp", "both"}));
    cmd->add_option("--layout", layout_file, "JSON patch offset overrides")->check(CLI::ExistingFile);
  }

  PipelineConfig build() const {
    PipelineConfig cfg;
    cfg.kernel.kind = svm::kernel_kind_from_string(kernel);
    cfg.kernel.gamma = gamma;
    cfg.kernel.degree = degree;
    cfg.kernel.coef0 = coef0;
    cfg.svm_c = c;
    cfg.lbp_bins = lbp_bins;
    cfg.phog_bins = phog_bins;
    cfg.phog_levels = phog_levels;
    cfg.layout.side = patch_size;
    cfg.seed = seed;
    cfg.features = feature_set_from_string(features);
    if (!layout_file.empty()) {
      std::ifstream in(layout_file);
      try {
        cfg.layout = apply_layout_overrides(cfg.layout, nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(layout_file + ": " + e.what());
      }
    }
    cfg.validate();
    return cfg;
  }
};

void write_text_report(std::ostream& os, const eval::CrossValidationResult& r, const std::vector<std::string>& names) {
  for (std::size_t f = 0; f < r.per_fold.size(); ++f) {
    os << "Fold " << f + 1 << " (" << r.plan.folds[f].size() << " test images, average recognition rate "
       << eval::format_fixed(eval::average_recognition_rate(r.per_fold[f])) << "%)\n";
    eval::write_table(os, r.per_fold[f], names);
    os << '\n';
  }
  os << "Pooled over " << r.per_fold.size() << " folds (average recognition rate "
     << eval::format_fixed(r.pooled_rate) << "%)\n";
  eval::write_table(os, r.pooled, names);
  os << "\nMean of per-fold rates: " << eval::format_fixed(r.mean_of_fold_rates) << "%\n";
  os << "Overall accuracy (pooled): " << eval::format_fixed(eval::overall_accuracy(r.pooled)) << "%\n";
}

void write_csv_reports(const fs::path& dir, const eval::CrossValidationResult& r,
                       const std::vector<std::string>& names) {
  fs::create_directories(dir);
  std::ofstream conf(dir / "confusion.csv", std::ios::binary);
  std::ofstream rates(dir / "rates.csv", std::ios::binary);
  if (!conf || !rates) throw IoError("cannot write CSV reports into " + dir.string());
  conf << "scope,true,predicted,count,row_percent\n";
  rates << "scope,class,rate_percent\n";
  auto class_rates = [&](const std::string& scope, const eval::ConfusionMatrix& m) {
    for (int t = 0; t < m.classes(); ++t) {
      rates << scope << ',' << names[std::size_t(t)] << ',' << eval::format_fixed(m.percent(t, t), 6) << '\n';
    }
    rates << scope << ",average," << eval::format_fixed(eval::average_recognition_rate(m), 6) << '\n';
  };
  for (std::size_t f = 0; f < r.per_fold.size(); ++f) {
    const std::string scope = "fold" + std::to_string(f + 1);
    eval::write_confusion_csv_rows(conf, scope, r.per_fold[f], names);
    class_rates(scope, r.per_fold[f]);
  }
  eval::write_confusion_csv_rows(conf, "pooled", r.pooled, names);
  class_rates("pooled", r.pooled);
  rates << "mean_of_folds,average," << eval::format_fixed(r.mean_of_fold_rates, 6) << '\n';
}

int run_synth(const fs::path& out, int per_class, std::uint64_t seed) {
  const auto manifest = synth::write_dataset(out, seed, per_class);
  std::cout << "wrote " << per_class * kExpressionCount << " images and " << manifest.string() << '\n';
  return kExitOk;
}

int run_train(const fs::path& manifest_path, const fs::path& out, const ConfigFlags& flags) {
  const PipelineConfig cfg = flags.build();
  const auto manifest = load_manifest(manifest_path);
  const TrainedModel model = train(manifest, cfg);
  save_model(model, out);
  std::cout << "trained " << model.ensemble.members.size() << " pairwise SVMs on " << manifest.entries.size()
            << " images; reduced dimension " << model.projection.output_dims() << "; model written to "
            << out.string() << '\n';
  return kExitOk;
}

int run_evaluate(const fs::path& manifest_path, std::size_t folds, const fs::path& out_dir,
                 const ConfigFlags& flags) {
  const PipelineConfig cfg = flags.build();
  const auto manifest = load_manifest(manifest_path);
  const auto labels = manifest.labels();
  eval::stratified_folds(labels, folds, cfg.seed);  // fail fast before feature extraction
  check_training_classes(labels);
  const auto features = extract_dataset(manifest, cfg);
  const auto result = cross_validate(features, cfg, folds, cfg.seed);
  const auto names = default_class_names();
  write_text_report(std::cout, result, names);
  if (!out_dir.empty()) write_csv_reports(out_dir, result, names);
  return kExitOk;
}

int run_predict(const fs::path& model_path, const fs::path& image, const std::string& landmarks) {
  const TrainedModel model = load_model(model_path);
  const LandmarkSet lm = parse_landmarks(landmarks, 1);
  const auto p = predict(model, read_image(image), lm);
  std::cout << model.class_names[std::size_t(p.label)] << '\n';
  for (std::size_t k = 0; k < p.votes.size(); ++k) {
    std::cout << "  " << model.class_names[k] << ": " << p.votes[k] << " votes\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facial expression classification from active facial patches (PHOG + LBP, PCA-LDA, pairwise SVM)"};
  app.require_subcommand(1);

  fs::path synth_out;
  int per_class = 60;
  std::uint64_t synth_seed = 42;
  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic six-class dataset with a manifest");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--per-class", per_class, "images per class")->check(CLI::Range(10, 100000));
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  fs::path train_manifest, train_out;
  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model from a manifest");
  train_cmd->add_option("--manifest", train_manifest, "dataset manifest CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "model file to write")->required();
  train_flags.attach(train_cmd);

  fs::path eval_manifest, eval_out;
  std::size_t folds = 5;
  ConfigFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("evaluate", "stratified k-fold cross-validation");
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--folds", folds, "number of folds")->check(CLI::Range(2, 1000));
  eval_cmd->add_option("--out-dir", eval_out, "directory for confusion.csv and rates.csv");
  eval_flags.attach(eval_cmd);

  fs::path model_path, image_path;
  std::string landmarks;
  auto* predict_cmd = app.add_subcommand("predict", "classify one image");
  predict_cmd->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--image", image_path, "PGM or PNG image")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--landmarks", landmarks, "\"lex,ley,rex,rey,nx,ny,llx,lly,lrx,lry\"")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth_out, per_class, synth_seed);
    if (*train_cmd) return run_train(train_manifest, train_out, train_flags);
    if (*eval_cmd) return run_evaluate(eval_manifest, folds, eval_out, eval_flags);
    if (*predict_cmd) return run_predict(model_path, image_path, landmarks);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Convergence ? kExitConvergence : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
