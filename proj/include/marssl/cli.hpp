#pragma once

// marssl fit|predict|evaluate|synth --config <file.json> [overrides]
//
// Exit codes: 0 ok, 2 bad input or config, 3 fitting failure,
// 4 dimension mismatch between model and data, 5 misaligned files.

#include "marssl/io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace marssl::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kFitError = 3, kShapeError = 4, kAlignmentError = 5 };

/// Thrown by commands to report an exit code with a message.
struct Failure {
  int code;
  std::string message;
};

namespace detail {

inline const json& need(const json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) throw Failure{kInputError, std::string("config is missing '") + key + "'"};
  return cfg.at(key);
}

template <class T>
T get_or(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Failure{kInputError, std::string("config key '") + key + "': " + e.what()};
  }
}

inline std::string need_path(const json& cfg, const char* key) {
  const auto& v = need(cfg, key);
  if (!v.is_string()) throw Failure{kInputError, std::string("config key '") + key + "' must be a path string"};
  return v.get<std::string>();
}

inline std::uint64_t seed_of(const json& cfg) {
  if (const char* env = std::getenv("MARSSL_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw Failure{kInputError, "MARSSL_SEED is not an unsigned integer"};
    return v;
  }
  return get_or<std::uint64_t>(cfg, "seed", 0);
}

inline VbConfig vb_of(const json& cfg) {
  VbConfig vb;
  if (!cfg.contains("vb")) return vb;
  const auto& j = cfg.at("vb");
  vb.max_components = get_or(j, "max_components", vb.max_components);
  vb.dirichlet_concentration = get_or(j, "dirichlet_concentration", 1.0 / vb.max_components);
  vb.prior_mean_scale = get_or(j, "prior_mean_scale", vb.prior_mean_scale);
  vb.wishart_dof_offset = get_or(j, "wishart_dof_offset", vb.wishart_dof_offset);
  vb.max_iters = get_or(j, "max_iters", vb.max_iters);
  vb.elbo_tol = get_or(j, "elbo_tol", vb.elbo_tol);
  vb.reg_floor = get_or(j, "reg_floor", vb.reg_floor);
  return vb;
}

inline double kappa_of(const json& cfg) {
  if (!cfg.contains("kappa")) return 0.0;
  try {
    return scalar_from_json(cfg.at("kappa"));
  } catch (const std::exception& e) {
    throw Failure{kInputError, std::string("config key 'kappa': ") + e.what()};
  }
}

template <class F>
auto reading(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Failure{kInputError, e.what()};
  }
}

inline void write_file(const std::string& path, const std::string& text) {
  reading([&] {
    write_text_file(path, text);
    return 0;
  });
}

}  // namespace detail

/// Fits a model and writes it (with the optional PCA map) as JSON.
inline int cmd_fit(const json& cfg, std::ostream& out, std::ostream& err) {
  using namespace detail;
  const Method method = reading([&] { return parse_method(get_or<std::string>(cfg, "method", "mar")); });
  const std::string model_path = need_path(cfg, "model");
  const double kappa = kappa_of(cfg);
  const std::uint64_t seed = seed_of(cfg);
  SslOptions opt;
  opt.vb = reading([&] {
    auto vb = vb_of(cfg);
    vb.validate();
    return vb;
  });
  opt.min_class_samples_per_dim = get_or(cfg, "min_class_samples_per_dim", opt.min_class_samples_per_dim);

  const Dataset labeled_file = reading([&] { return read_dataset_csv(need_path(cfg, "labeled")); });
  std::vector<std::size_t> lab_rows, unl_rows;
  std::vector<Label> labels;
  for (std::size_t i = 0; i < labeled_file.labels.size(); ++i) {
    if (labeled_file.labels[i]) {
      lab_rows.push_back(i);
      labels.push_back(*labeled_file.labels[i]);
    } else {
      unl_rows.push_back(i);
    }
  }
  if (lab_rows.empty()) throw Failure{kInputError, "labeled file contains no labeled rows"};
  FeatureMatrix unlabeled = select_rows(labeled_file.features, unl_rows);

  const bool has_unlabeled_path = cfg.contains("unlabeled") && !cfg.at("unlabeled").is_null();
  if (method == Method::Supervised) {
    if (has_unlabeled_path) err << "warning: method=supervised ignores the unlabeled file\n";
    unlabeled.resize(0, labeled_file.features.cols());
  } else if (has_unlabeled_path) {
    const Dataset u = reading([&] { return read_dataset_csv(need_path(cfg, "unlabeled")); });
    if (u.features.cols() != labeled_file.features.cols())
      throw Failure{kShapeError, "labeled and unlabeled files have different feature counts"};
    unlabeled = vstack(unlabeled, u.features);
  }

  FeatureMatrix lab_x = select_rows(labeled_file.features, lab_rows);
  std::optional<PcaMap> pca;
  if (cfg.contains("pca_dim") && !cfg.at("pca_dim").is_null()) {
    const auto r = get_or<Eigen::Index>(cfg, "pca_dim", 0);
    const FeatureMatrix pooled = vstack(lab_x, unlabeled);
    try {
      auto fitted = fit_pca_checked(pooled, r);
      for (const auto& w : fitted.warnings) err << "warning: " << w.message << '\n';
      pca = std::move(fitted.map);
    } catch (const Error& e) {
      throw Failure{kInputError, std::string("pca: ") + e.what()};
    }
    lab_x = transform(*pca, lab_x);
    unlabeled = transform(*pca, unlabeled);
  }

  std::vector<Label> declared = get_or<std::vector<Label>>(cfg, "labels", {});
  const LabeledSet d1 = reading([&] { return make_labeled(lab_x, labels, declared); });
  const UnlabeledSet d0{unlabeled};
  if (method == Method::Mar && d0.size() == 0) throw Failure{kInputError, "method=mar needs unlabeled rows"};

  FitLog log;
  std::optional<MarModel> model;
  try {
    model.emplace(fit(method, d1, d0, kappa, opt, seed, &log));
  } catch (const Error& e) {
    throw Failure{kFitError, std::string("fit failed: ") + e.what()};
  }
  for (const auto& w : log.warnings) err << "warning: " << w.message << '\n';

  json doc = {{"format", "marssl-model"}, {"version", 1}, {"pca", pca ? to_json(*pca) : json(nullptr)}, {"model", to_json(*model)}};
  write_file(model_path, doc.dump(1) + "\n");

  out << "method=" << to_string(model->method()) << " augmented=" << model->augmented_count()
      << " residual=" << model->residual_count() << " w=" << format_double(model->w()) << " class_counts=";
  for (std::size_t y = 0; y < model->label_set().size(); ++y)
    out << (y ? "," : "") << model->label_set()[y] << ':' << model->class_counts()[y];
  out << '\n';
  return kOk;
}

struct LoadedModel {
  std::optional<PcaMap> pca;
  MarModel model;

  Eigen::Index input_dim() const { return pca ? pca->input_dim() : model.dim(); }
};

inline LoadedModel load_model(const std::string& path) {
  const json doc = read_json_file(path);
  try {
    std::optional<PcaMap> pca;
    if (doc.contains("pca") && !doc.at("pca").is_null()) pca = pca_from_json(doc.at("pca"));
    return LoadedModel{std::move(pca), mar_model_from_json(doc.at("model"))};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

/// Predicts every row of a dataset file with a saved model.
inline int cmd_predict(const json& cfg, std::ostream& out, std::ostream&) {
  using namespace detail;
  const LoadedModel lm = reading([&] { return load_model(need_path(cfg, "model")); });
  const Dataset test = reading([&] { return read_dataset_csv(need_path(cfg, "test")); });
  const std::string output = need_path(cfg, "output");
  if (test.features.cols() != lm.input_dim())
    throw Failure{kShapeError, "model expects " + std::to_string(lm.input_dim()) + " features, test file has " +
                                   std::to_string(test.features.cols())};
  const FeatureMatrix x = lm.pca ? transform(*lm.pca, test.features) : test.features;
  const auto preds = lm.model.predict_rows(x);
  write_file(output, predictions_csv(lm.model.label_set(), preds));
  out << "predicted " << preds.size() << " rows\n";
  return kOk;
}

/// Reliability diagram, ECE and accuracy of a predictions file against ground truth.
inline int cmd_evaluate(const json& cfg, std::ostream& out, std::ostream&) {
  using namespace detail;
  const std::string pred_path = need_path(cfg, "predictions");
  const std::string truth_path = need_path(cfg, "truth");
  const auto preds = reading([&] {
    std::ifstream in(pred_path);
    require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + pred_path);
    return parse_predictions_csv(in, pred_path);
  });
  const auto truth = reading([&] {
    std::ifstream in(truth_path);
    require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + truth_path);
    return parse_truth_csv(in, truth_path);
  });
  const auto bins = get_or<std::size_t>(cfg, "bins", 10);
  if (bins < 1) throw Failure{kInputError, "bins must be >= 1"};
  if (preds.size() != truth.labels.size())
    throw Failure{kAlignmentError, std::to_string(preds.size()) + " predictions vs " +
                                       std::to_string(truth.labels.size()) + " ground-truth rows"};
  if (preds.empty()) throw Failure{kInputError, "nothing to evaluate"};

  const auto diag = reliability_diagram(std::span<const Prediction>(preds), std::span<const Label>(truth.labels), bins);
  json summary = {{"n", preds.size()}, {"bins", bins}, {"ece", diag.ece}, {"accuracy", diag.overall_accuracy},
                  {"diagram", to_json(diag)}};
  if (truth.rare) {
    const auto dec = region_decomposed_errors(preds, truth.labels, *truth.rare, bins);
    summary["rare"] = to_json(dec.masked);
    summary["common"] = to_json(dec.unmasked);
    if (cfg.contains("rare_csv")) write_file(need_path(cfg, "rare_csv"), diagram_csv(dec.masked));
    if (cfg.contains("common_csv")) write_file(need_path(cfg, "common_csv"), diagram_csv(dec.unmasked));
  }
  if (cfg.contains("output_csv")) write_file(need_path(cfg, "output_csv"), diagram_csv(diag));
  if (cfg.contains("output_json")) write_file(need_path(cfg, "output_json"), summary.dump(1) + "\n");
  out << "ece=" << format_double(diag.ece) << " accuracy=" << format_double(diag.overall_accuracy) << '\n';
  return kOk;
}

/// Writes synthetic datasets: two_cluster, split (of an existing labeled file) or blobs.
inline int cmd_synth(const json& cfg, std::ostream& out, std::ostream&) {
  using namespace detail;
  const auto scenario = get_or<std::string>(cfg, "scenario", "two_cluster");
  const std::uint64_t seed = seed_of(cfg);
  auto path_in = [&](const std::string& name) {
    const auto dir = need_path(cfg, "out_dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    return (std::filesystem::path(dir) / name).string();
  };

  if (scenario == "two_cluster") {
    TwoClusterConfig tc;
    tc.n_labeled = get_or(cfg, "n_labeled", tc.n_labeled);
    tc.n_unlabeled = get_or(cfg, "n_unlabeled", tc.n_unlabeled);
    tc.cluster_separation = get_or(cfg, "cluster_separation", tc.cluster_separation);
    tc.class_boundary_axis = get_or(cfg, "class_boundary_axis", tc.class_boundary_axis);
    tc.noise_scale = get_or(cfg, "noise_scale", tc.noise_scale);
    tc.far_fraction = get_or(cfg, "far_fraction", tc.far_fraction);
    tc.dim = get_or(cfg, "dim", tc.dim);
    tc.seed = seed;
    const auto n_test = get_or<std::size_t>(cfg, "n_test", 0);
    const MarScenario sc = reading([&] { return gen_two_cluster_mar(tc); });
    write_file(path_in("labeled.csv"), labeled_csv(sc.labeled));
    write_file(path_in("unlabeled.csv"), unlabeled_csv(sc.unlabeled));
    write_file(path_in("unlabeled_truth.csv"), truth_csv(sc.unlabeled_truth, &sc.unlabeled_far));
    if (n_test > 0) {
      const auto test = sample_two_cluster(tc, n_test, 0.5, mix_seed(seed, 3));
      write_file(path_in("test.csv"), dataset_csv(test.features, nullptr));
      write_file(path_in("test_truth.csv"), truth_csv(test.labels, &test.far));
    }
    out << "two_cluster labeled=" << sc.labeled.size() << " unlabeled=" << sc.unlabeled.size() << " test=" << n_test
        << '\n';
    return kOk;
  }
  if (scenario == "split") {
    const Dataset ds = reading([&] { return read_dataset_csv(need_path(cfg, "dataset")); });
    std::vector<Label> labels;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (!ds.labels[i]) throw Failure{kInputError, "split dataset row " + std::to_string(i + 1) + " has no label"};
      labels.push_back(*ds.labels[i]);
    }
    MarSplitConfig sc;
    sc.rare_labels = get_or<std::vector<Label>>(cfg, "rare_labels", {});
    sc.n_labeled_total = get_or(cfg, "n_labeled_total", sc.n_labeled_total);
    sc.rare_label_fraction = get_or(cfg, "rare_label_fraction", sc.rare_label_fraction);
    sc.seed = seed;
    const MarSplit split = reading([&] { return mar_split_by_class(ds.features, labels, sc); });
    std::vector<bool> rare;
    for (Label y : split.unlabeled_truth)
      rare.push_back(std::find(sc.rare_labels.begin(), sc.rare_labels.end(), y) != sc.rare_labels.end());
    write_file(path_in("labeled.csv"), labeled_csv(split.labeled));
    write_file(path_in("unlabeled.csv"), unlabeled_csv(split.unlabeled));
    write_file(path_in("unlabeled_truth.csv"), truth_csv(split.unlabeled_truth, &rare));
    out << "split labeled=" << split.labeled.size() << " unlabeled=" << split.unlabeled.size() << '\n';
    return kOk;
  }
  if (scenario == "blobs") {
    BlobConfig bc;
    bc.n = get_or(cfg, "n", bc.n);
    bc.n_classes = get_or(cfg, "n_classes", bc.n_classes);
    bc.dim = get_or(cfg, "dim", bc.dim);
    bc.center_scale = get_or(cfg, "center_scale", bc.center_scale);
    bc.seed = seed;
    const auto [x, y] = reading([&] { return gen_class_blobs(bc); });
    std::vector<std::optional<Label>> labels(y.begin(), y.end());
    write_file(path_in("dataset.csv"), dataset_csv(x, &labels));
    out << "blobs n=" << x.rows() << " dim=" << x.cols() << '\n';
    return kOk;
  }
  throw Failure{kInputError, "unknown scenario '" + scenario + "'"};
}

/// Entry point shared by the binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Semi-supervised classification with reliable error probabilities under MAR labels", "marssl"};
  app.require_subcommand(1);

  struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> kappa, method, labeled, unlabeled, model, test, output, predictions, truth, out_dir;
    std::optional<int> pca_dim;
    std::optional<std::size_t> bins;
  } ov;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config, "JSON config file")->required();
    sub->add_option("--seed", ov.seed, "override the config seed");
  };
  auto* fit_cmd = app.add_subcommand("fit", "fit a model");
  add_common(fit_cmd);
  fit_cmd->add_option("--method", ov.method, "mar, mcar or supervised");
  fit_cmd->add_option("--kappa", ov.kappa, "likelihood-ratio threshold");
  fit_cmd->add_option("--pca-dim", ov.pca_dim, "reduce features with PCA first");
  fit_cmd->add_option("--labeled", ov.labeled);
  fit_cmd->add_option("--unlabeled", ov.unlabeled);
  fit_cmd->add_option("--model", ov.model, "output model file");
  auto* predict_cmd = app.add_subcommand("predict", "predict a dataset file");
  add_common(predict_cmd);
  predict_cmd->add_option("--model", ov.model);
  predict_cmd->add_option("--test", ov.test);
  predict_cmd->add_option("--output", ov.output);
  auto* eval_cmd = app.add_subcommand("evaluate", "reliability diagram of a predictions file");
  add_common(eval_cmd);
  eval_cmd->add_option("--predictions", ov.predictions);
  eval_cmd->add_option("--truth", ov.truth);
  eval_cmd->add_option("--bins", ov.bins);
  auto* synth_cmd = app.add_subcommand("synth", "write synthetic datasets");
  add_common(synth_cmd);
  synth_cmd->add_option("--out-dir", ov.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    json cfg = read_json_file(ov.config);
    if (!cfg.is_object()) throw Failure{kInputError, ov.config + ": config must be a JSON object"};
    if (ov.seed) cfg["seed"] = *ov.seed;
    if (ov.kappa) cfg["kappa"] = scalar_to_json(parse_double(*ov.kappa));
    if (ov.method) cfg["method"] = *ov.method;
    if (ov.pca_dim) cfg["pca_dim"] = *ov.pca_dim;
    if (ov.labeled) cfg["labeled"] = *ov.labeled;
    if (ov.unlabeled) cfg["unlabeled"] = *ov.unlabeled;
    if (ov.model) cfg["model"] = *ov.model;
    if (ov.test) cfg["test"] = *ov.test;
    if (ov.output) cfg["output"] = *ov.output;
    if (ov.predictions) cfg["predictions"] = *ov.predictions;
    if (ov.truth) cfg["truth"] = *ov.truth;
    if (ov.bins) cfg["bins"] = *ov.bins;
    if (ov.out_dir) cfg["out_dir"] = *ov.out_dir;

    if (fit_cmd->parsed()) return cmd_fit(cfg, out, err);
    if (predict_cmd->parsed()) return cmd_predict(cfg, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(cfg, out, err);
    return cmd_synth(cfg, out, err);
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::DimMismatch ? kShapeError
           : e.code() == ErrorCode::LengthMismatch ? kAlignmentError
                                                   : kInputError;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace marssl::cli
