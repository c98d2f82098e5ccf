// twoscale: command-line front end for the two-scale fMRI pipeline.

#include "twoscale/classify.hpp"
#include "twoscale/core_data.hpp"
#include "twoscale/csv.hpp"
#include "twoscale/embedding.hpp"
#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"
#include "twoscale/pipeline.hpp"
#include "twoscale/recurrence.hpp"
#include "twoscale/reho.hpp"
#include "twoscale/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using namespace twoscale;

namespace {

// Settings given on the command line, applied over the config file in order.
using Overrides = std::vector<std::pair<std::string, std::string>>;

void setting(CLI::App* app, Overrides& out, const std::string& flag, const std::string& key,
             const std::string& help) {
  app->add_option_function<std::string>(flag, [&out, key](const std::string& v) { out.emplace_back(key, v); }, help);
}

void switch_setting(CLI::App* app, Overrides& out, const std::string& flag, const std::string& key,
                    const std::string& help) {
  app->add_flag_callback(flag, [&out, key] { out.emplace_back(key, "true"); }, help);
}

void only_option(CLI::App* app, Overrides& out) {
  app->add_option_function<std::string>(
      "--only",
      [&out](const std::string& v) {
        const auto eq = v.find('=');
        if (eq == std::string::npos || trim(v.substr(0, eq)) != "network") {
          throw Error(ErrorCode::InvalidArgument, "--only expects network=<name>[,<name>...]");
        }
        out.emplace_back("networks", v.substr(eq + 1));
      },
      "Restrict to networks, e.g. network=default_mode");
}

void embedding_options(CLI::App* app, Overrides& out) {
  setting(app, out, "--tau", "tau", "Delay: auto or a positive integer");
  setting(app, out, "--max-lag", "max_lag", "Largest lag examined by the automatic delay rule");
  setting(app, out, "--dmax", "d_max", "Largest dimension on the Cao curve");
  setting(app, out, "--epsilon", "epsilon", "Saturation band for E1");
  setting(app, out, "--force-k", "force_k", "Pin the number of states K");
}

void cohort_options(CLI::App* app, fs::path& data, fs::path& manifest) {
  app->add_option("--data", data, "Dataset root")->required();
  app->add_option("--manifest", manifest, "Manifest CSV (default <data>/manifest.csv)");
}

pipeline::PipelineConfig make_config(const fs::path& config_file, const Overrides& overrides) {
  pipeline::PipelineConfig config;
  if (!config_file.empty()) config.load_file(config_file);
  for (const auto& [key, value] : overrides) config.set(key, value);
  return config;
}

void set_paths(pipeline::PipelineConfig& config, const fs::path& data, const fs::path& manifest) {
  if (!data.empty()) config.data_root = data;
  if (!manifest.empty()) config.manifest = manifest;
  if (config.manifest.empty() && !config.data_root.empty()) config.manifest = config.data_root / "manifest.csv";
  if (config.data_root.empty()) throw Error(ErrorCode::InvalidConfig, "no dataset root given (--data or data_root)");
}

embedding::EmbeddingSettings embedding_settings(const pipeline::PipelineConfig& c) {
  embedding::EmbeddingSettings s;
  s.tau = c.tau;
  s.max_lag = c.max_lag;
  s.d_max = c.d_max;
  s.epsilon = c.epsilon;
  s.force_k = c.force_k;
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

void print_error(std::string_view name, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = name;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale fMRI analysis: local recurrence features and network-level connectivity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::kVersion);
  unsigned jobs = 0;
  app.add_option("--jobs", jobs, "Worker thread cap (0 = all cores)");

  Overrides overrides;
  fs::path config_file, data, manifest, out, input, run_dir;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort or test signal");
  std::string kind = "two_class_cohort";
  double sep = 1.0, period = 40.0, phi = 0.5, sigma = 1.0, dt = 0.01;
  std::size_t subjects = 50, n_rois = 0, n_time = 190;
  std::uint64_t synth_seed = 7;
  std::string target = "default_mode";
  synth_cmd->add_option("--kind", kind, "two_class_cohort, sine, ar1, gaussian_noise or lorenz_x")
      ->capture_default_str();
  synth_cmd->add_option("--sep", sep, "Class separation in [0, 1]")->capture_default_str();
  synth_cmd->add_option("--subjects", subjects, "Subjects per class")->capture_default_str();
  synth_cmd->add_option("--n", n_rois, "ROI count of the target network (checked against the atlas)");
  synth_cmd->add_option("--N", n_time, "Timepoints per series")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--target", target, "Network carrying the class difference")->capture_default_str();
  synth_cmd->add_option("--period", period, "Sine period")->capture_default_str();
  synth_cmd->add_option("--phi", phi, "AR(1) coefficient")->capture_default_str();
  synth_cmd->add_option("--sigma", sigma, "Noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--dt", dt, "Lorenz step")->capture_default_str();
  synth_cmd->add_option("--out", out, "Output directory (cohort) or CSV file (signal)")->required();

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Load a dataset and print a validation report");
  cohort_options(validate_cmd, data, manifest);
  only_option(validate_cmd, overrides);

  // reho
  auto* reho_cmd = app.add_subcommand("reho", "Regional homogeneity map and representative series of a voxel block");
  bool neighbors_only = false;
  reho_cmd->add_option("--input", input, "Voxel CSV: x,y,z,samples...")->required();
  reho_cmd->add_option("--out", out, "Output directory")->required();
  reho_cmd->add_flag("--neighbors-only", neighbors_only, "Exclude the centre voxel from its cluster");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Delay, Cao curve and embedding of one series");
  std::size_t column = 0;
  embed_cmd->add_option("--input", input, "Series CSV")->required();
  embed_cmd->add_option("--column", column, "Column to read")->capture_default_str();
  embed_cmd->add_option("--out", out, "Output directory")->required();
  embedding_options(embed_cmd, overrides);

  // rqa
  auto* rqa_cmd = app.add_subcommand("rqa", "RQA features for every ROI of a cohort, or for one series");
  rqa_cmd->add_option("--data", data, "Dataset root");
  rqa_cmd->add_option("--manifest", manifest, "Manifest CSV");
  rqa_cmd->add_option("--input", input, "Single series CSV instead of a cohort");
  rqa_cmd->add_option("--out", out, "Output directory (cohort) or CSV file (single series)");
  embedding_options(rqa_cmd, overrides);
  setting(rqa_cmd, overrides, "--rr", "rr", "Target recurrence rate");
  setting(rqa_cmd, overrides, "--lmin", "l_min", "Minimum diagonal line length");
  setting(rqa_cmd, overrides, "--vmin", "v_min", "Minimum vertical line length");
  setting(rqa_cmd, overrides, "--render-subjects", "render_subjects", "Subjects whose plots are written");
  setting(rqa_cmd, overrides, "--size", "render_size", "Plot size in pixels");
  only_option(rqa_cmd, overrides);
  rqa_cmd->add_option("--config", config_file, "key=value config file");

  // rp-render
  auto* render_cmd = app.add_subcommand("rp-render", "Render the distance recurrence plot of one series as PGM");
  std::size_t size = 224;
  render_cmd->add_option("--input", input, "Series CSV")->required();
  render_cmd->add_option("--column", column, "Column to read")->capture_default_str();
  render_cmd->add_option("--size", size, "Output size in pixels")->capture_default_str();
  render_cmd->add_option("--out", out, "Output directory or .pgm path")->required();
  embedding_options(render_cmd, overrides);

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "Partial-correlation graphs, eigen features and top-ROI frequencies");
  cohort_options(graph_cmd, data, manifest);
  graph_cmd->add_option("--out", out, "Output directory")->required();
  setting(graph_cmd, overrides, "--shrinkage", "shrinkage", "Covariance shrinkage");
  setting(graph_cmd, overrides, "--edge-threshold", "edge_threshold", "Edge threshold for degrees");
  setting(graph_cmd, overrides, "--topk", "top_k", "ROIs counted per subject");
  switch_setting(graph_cmd, overrides, "--signed", "signed_edges", "Threshold signed weights, not magnitudes");
  switch_setting(graph_cmd, overrides, "--marginal", "marginal", "Use marginal instead of partial correlation");
  only_option(graph_cmd, overrides);
  graph_cmd->add_option("--config", config_file, "key=value config file");

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "Cross-validated bagged trees on one feature table");
  std::string family = "eigvec", network = "default_mode";
  fs::path labels_path;
  classify_cmd->add_option("--input", input, "graph features.csv or rqa features.csv")->required();
  classify_cmd->add_option("--labels", labels_path, "Manifest with labels (needed for RQA features)");
  classify_cmd->add_option("--features", family, "eigval, eigvec or rqa")->capture_default_str();
  classify_cmd->add_option("--network", network, "Network")->capture_default_str();
  classify_cmd->add_option("--out", out, "Write <features>_<network>.json and .csv here");
  setting(classify_cmd, overrides, "--folds", "folds", "Stratified folds");
  setting(classify_cmd, overrides, "--trees", "trees", "Bagged trees");
  setting(classify_cmd, overrides, "--seed", "seed", "Seed");
  setting(classify_cmd, overrides, "--max-depth", "max_depth", "Tree depth limit (0 = none)");
  setting(classify_cmd, overrides, "--min-leaf", "min_leaf", "Minimum samples per leaf");
  switch_setting(classify_cmd, overrides, "--per-fold-mean", "per_fold_mean", "Average per-fold metrics");

  // run
  auto* run_cmd = app.add_subcommand("run", "Full pipeline into a run directory");
  run_cmd->add_option("--config", config_file, "key=value config file");
  run_cmd->add_option("--data", data, "Dataset root");
  run_cmd->add_option("--manifest", manifest, "Manifest CSV");
  setting(run_cmd, overrides, "--out", "out", "Run directory");
  embedding_options(run_cmd, overrides);
  setting(run_cmd, overrides, "--rr", "rr", "Target recurrence rate");
  setting(run_cmd, overrides, "--lmin", "l_min", "Minimum diagonal line length");
  setting(run_cmd, overrides, "--vmin", "v_min", "Minimum vertical line length");
  setting(run_cmd, overrides, "--size", "render_size", "Plot size in pixels");
  setting(run_cmd, overrides, "--render-subjects", "render_subjects", "Subjects whose plots are written");
  setting(run_cmd, overrides, "--shrinkage", "shrinkage", "Covariance shrinkage");
  setting(run_cmd, overrides, "--edge-threshold", "edge_threshold", "Edge threshold for degrees");
  setting(run_cmd, overrides, "--topk", "top_k", "ROIs counted per subject");
  switch_setting(run_cmd, overrides, "--signed", "signed_edges", "Threshold signed weights");
  switch_setting(run_cmd, overrides, "--marginal", "marginal", "Marginal instead of partial correlation");
  setting(run_cmd, overrides, "--features", "features", "Comma list of eigval, eigvec, rqa");
  setting(run_cmd, overrides, "--folds", "folds", "Stratified folds");
  setting(run_cmd, overrides, "--trees", "trees", "Bagged trees");
  setting(run_cmd, overrides, "--seed", "seed", "Seed");
  setting(run_cmd, overrides, "--max-depth", "max_depth", "Tree depth limit (0 = none)");
  setting(run_cmd, overrides, "--min-leaf", "min_leaf", "Minimum samples per leaf");
  switch_setting(run_cmd, overrides, "--per-fold-mean", "per_fold_mean", "Average per-fold metrics");
  only_option(run_cmd, overrides);

  // report
  auto* report_cmd = app.add_subcommand("report", "Summarize a completed run");
  std::string format = "text";
  report_cmd->add_option("run", run_dir, "Run directory")->required();
  report_cmd->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(error_name(e.code()), e.what());
    return 1;
  }

  try {
    if (jobs > 0) set_max_jobs(jobs);

    if (*synth_cmd) {
      if (kind == "two_class_cohort") {
        synth::TwoClassOptions options;
        options.separation = sep;
        options.subjects_per_class = subjects;
        options.n_timepoints = n_time;
        options.seed = synth_seed;
        options.target = parse_network(target);
        if (n_rois != 0 && n_rois != roi_count(options.target)) {
          throw Error(ErrorCode::InvalidSpec, "--n " + std::to_string(n_rois) + " does not match the " +
                                                  std::string(network_name(options.target)) + " network (" +
                                                  std::to_string(roi_count(options.target)) + " ROIs)");
        }
        const auto cohort = synth::gen_two_class_cohort(options);
        write_cohort(cohort.dataset, out);
        nlohmann::ordered_json j;
        j["subjects"] = cohort.dataset.subjects.size();
        j["n_timepoints"] = cohort.dataset.n_timepoints;
        j["target"] = network_name(options.target);
        j["hub_roi"] = cohort.hub;
        j["diagonal_loading"] = cohort.diagonal_loading;
        std::cout << j.dump(2) << '\n';
      } else {
        synth::SignalSpec spec;
        spec.kind = synth::parse_signal_kind(kind);
        spec.n = n_time;
        spec.seed = synth_seed;
        spec.period = period;
        spec.phi = phi;
        spec.sigma = sigma;
        spec.dt = dt;
        const auto values = synth::gen_signal(spec);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        write_series_csv(out, values);
      }
      return 0;
    }

    if (*validate_cmd) {
      auto config = make_config({}, overrides);
      set_paths(config, data, manifest);
      const auto dataset = load_cohort(config.data_root, config.manifest, config.networks);
      std::cout << validate_dataset(dataset).to_json() << '\n';
      return 0;
    }

    if (*reho_cmd) {
      const auto block = reho::read_voxel_block(input);
      reho::RehoOptions options;
      options.include_center = !neighbors_only;
      const auto map = reho::reho_map(block, options);
      fs::create_directories(out);
      reho::write_reho_map(out / "reho_map.csv", map);
      const auto rep = reho::select_representative(block, map);
      write_series_csv(out / "representative.csv", rep.values);
      return 0;
    }

    if (*embed_cmd) {
      const auto config = make_config({}, overrides);
      const auto series = read_series_csv(input, column);
      const auto settings = embedding_settings(config);
      const auto result = embedding::embed_auto(series, settings);
      fs::create_directories(out);
      const std::size_t d_max = std::min(settings.d_max, (series.size() - 2) / result.params.tau);
      if (!result.degenerate && d_max >= 3) {
        const auto curve = embedding::cao_curves(series, result.params.tau, d_max);
        std::ofstream cao(out / "cao.csv");
        cao << "d,e1,e2\n";
        for (std::size_t d = 0; d < curve.e1.size(); ++d) {
          cao << d + 1 << ',' << format_double(curve.e1[d]) << ',' << format_double(curve.e2[d]) << '\n';
        }
      }
      {
        std::ofstream states(out / "states.csv");
        for (std::size_t i = 0; i < result.states.rows; ++i) {
          std::vector<std::string> fields;
          for (double v : result.states.row(i)) fields.push_back(format_double(v));
          write_csv_row(states, fields);
        }
      }
      nlohmann::ordered_json j;
      j["tau"] = result.params.tau;
      j["m"] = result.params.m;
      j["k"] = result.k;
      j["saturated"] = result.saturated;
      j["degenerate"] = result.degenerate;
      write_file(out / "params.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*rqa_cmd) {
      auto config = make_config(config_file, overrides);
      if (!input.empty()) {
        config.validate();
        pipeline::LocalOptions options;
        options.embedding = embedding_settings(config);
        options.rr = config.rr;
        options.l_min = config.l_min;
        options.v_min = config.v_min;
        RoiTimeSeries roi;
        roi.values = read_series_csv(input);
        auto result = pipeline::analyze_roi(roi, options, false);
        result.rqa.subject = input.stem().string();
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        pipeline::write_rqa_csv(out.empty() ? fs::path("/dev/stdout") : out, {result.rqa});
        return 0;
      }
      set_paths(config, data, manifest);
      if (!out.empty()) config.out = out;
      config.validate();
      const auto dataset = load_cohort(config.data_root, config.manifest, config.networks);
      const bool cached = pipeline::local_stage(config, dataset, config.out);
      std::cerr << (cached ? "rqa: reused " : "rqa: wrote ") << (config.out / "rqa" / "features.csv").string() << '\n';
      return 0;
    }

    if (*render_cmd) {
      const auto config = make_config({}, overrides);
      const auto series = read_series_csv(input, column);
      const auto result = embedding::embed_auto(series, embedding_settings(config));
      const auto distances = recurrence::recurrence_matrix(result.states);
      const auto image = recurrence::resize_bilinear(distances, size);
      fs::path target_file = out;
      if (out.extension() != ".pgm") {
        fs::create_directories(out);
        target_file = out / (input.stem().string() + ".pgm");
      } else if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
      }
      recurrence::render_grayscale(image, target_file);
      return 0;
    }

    if (*graph_cmd) {
      auto config = make_config(config_file, overrides);
      set_paths(config, data, manifest);
      config.out = out;
      config.validate();
      const auto dataset = load_cohort(config.data_root, config.manifest, config.networks);
      pipeline::graph_stage(config, dataset, out);
      return 0;
    }

    if (*classify_cmd) {
      auto config = make_config({}, overrides);
      config.validate();
      const auto kind_value = classify::parse_feature_kind(family);
      const auto net = parse_network(network);
      classify::FeatureTable table;
      if (kind_value == classify::FeatureKind::rqa) {
        if (labels_path.empty()) throw Error(ErrorCode::InvalidArgument, "--labels is required for RQA features");
        table = pipeline::rqa_feature_table(pipeline::read_rqa_csv(input), pipeline::read_labels(labels_path), net);
      } else {
        table = pipeline::graph_feature_table(pipeline::read_graph_features_csv(input), kind_value, net);
      }
      classify::CvOptions cv;
      cv.folds = config.folds;
      cv.trees = config.trees;
      cv.seed = config.seed;
      cv.per_fold_mean = config.per_fold_mean;
      if (config.max_depth > 0) cv.tree.max_depth = config.max_depth;
      cv.tree.min_leaf = config.min_leaf;
      auto result = classify::cross_validate(table, cv);
      result.network = std::string(network_name(net));
      const std::string json = result.to_json();
      if (!out.empty()) {
        const std::string stem = result.feature_kind + "_" + result.network;
        write_file(out / (stem + ".json"), json + "\n");
        write_file(out / (stem + ".csv"), classify::MetricsReport::csv_header() + "\n" + result.csv_row() + "\n");
      }
      std::cout << json << '\n';
      return 0;
    }

    if (*run_cmd) {
      auto config = make_config(config_file, overrides);
      set_paths(config, data, manifest);
      if (jobs > 0) config.jobs = jobs;
      const auto summary = pipeline::run_pipeline(config);
      std::cout << pipeline::report(summary.run_dir);
      return 0;
    }

    if (*report_cmd) {
      std::cout << pipeline::report(run_dir, format == "csv" ? pipeline::ReportFormat::csv
                                                             : pipeline::ReportFormat::text);
      return 0;
    }
  } catch (const Error& e) {
    print_error(error_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 3;
  }
  return 0;
}
