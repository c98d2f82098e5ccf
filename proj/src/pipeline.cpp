#include "twoscale/pipeline.hpp"

#include "twoscale/csv.hpp"
#include "twoscale/embedding.hpp"
#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace twoscale::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v.front() == '-') {
    throw Error(ErrorCode::InvalidConfig, key + ": expected a non-negative integer, got '" + value + "'");
  }
  try {
    return static_cast<std::size_t>(parse_integer(v, key));
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, key + ": expected a non-negative integer, got '" + value + "'");
  }
}

double to_real(const std::string& key, const std::string& value) {
  const auto parsed = try_parse_double(value);
  if (!parsed || !std::isfinite(*parsed)) {
    throw Error(ErrorCode::InvalidConfig, key + ": expected a finite number, got '" + value + "'");
  }
  return *parsed;
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, key + ": expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto& item : split_csv_line(value)) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

Error with_context(const Error& e, const std::string& context) {
  return Error(e.code(), context + ": " + e.what());
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void PipelineConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  if (key == "data_root") data_root = trim(value);
  else if (key == "manifest") manifest = trim(value);
  else if (key == "out") out = trim(value);
  else if (key == "tau") tau = trim(value) == "auto" ? 0 : to_size(key, value);
  else if (key == "max_lag") max_lag = to_size(key, value);
  else if (key == "d_max") d_max = to_size(key, value);
  else if (key == "epsilon") epsilon = to_real(key, value);
  else if (key == "force_k") force_k = to_size(key, value);
  else if (key == "rr") rr = to_real(key, value);
  else if (key == "l_min") l_min = to_size(key, value);
  else if (key == "v_min") v_min = to_size(key, value);
  else if (key == "render_size") render_size = to_size(key, value);
  else if (key == "render_subjects") render_subjects = to_size(key, value);
  else if (key == "shrinkage") shrinkage = to_real(key, value);
  else if (key == "edge_threshold") edge_threshold = to_real(key, value);
  else if (key == "signed_edges") signed_edges = to_bool(key, value);
  else if (key == "marginal") marginal = to_bool(key, value);
  else if (key == "top_k") top_k = to_size(key, value);
  else if (key == "folds") folds = to_size(key, value);
  else if (key == "trees") trees = to_size(key, value);
  else if (key == "seed") seed = to_size(key, value);
  else if (key == "max_depth") max_depth = to_size(key, value);
  else if (key == "min_leaf") min_leaf = to_size(key, value);
  else if (key == "per_fold_mean") per_fold_mean = to_bool(key, value);
  else if (key == "jobs") jobs = static_cast<unsigned>(to_size(key, value));
  else if (key == "features") {
    features.clear();
    for (const auto& item : split_list(value)) {
      try {
        features.push_back(classify::parse_feature_kind(item));
      } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("features: ") + e.what());
      }
    }
  } else if (key == "networks") {
    networks.clear();
    for (const auto& item : split_list(value)) {
      if (item == "all") {
        networks.assign(kAllNetworks.begin(), kAllNetworks.end());
        continue;
      }
      try {
        networks.push_back(parse_network(item));
      } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("networks: ") + e.what());
      }
    }
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
}

void PipelineConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (max_lag < 1) fail("max_lag must be >= 1");
  if (d_max < 3) fail("d_max must be >= 3");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(rr > 0.0 && rr < 1.0)) fail("rr must lie in (0, 1)");
  if (l_min < 1 || v_min < 1) fail("l_min and v_min must be >= 1");
  if (render_size < 2) fail("render_size must be >= 2");
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) fail("shrinkage must lie in [0, 1)");
  if (!(edge_threshold >= 0.0)) fail("edge_threshold must be >= 0");
  if (folds < 2) fail("folds must be >= 2");
  if (trees < 1) fail("trees must be >= 1");
  if (min_leaf < 1) fail("min_leaf must be >= 1");
  if (features.empty()) fail("features must name at least one family");
  if (networks.empty()) fail("networks must name at least one network");
  for (Network net : networks) {
    if (top_k < 1 || top_k > roi_count(net)) {
      fail("top_k must lie in [1, " + std::to_string(roi_count(net)) + "] for " + std::string(network_name(net)));
    }
  }
}

std::string PipelineConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["data_root"] = data_root.generic_string();
  kv["manifest"] = manifest.generic_string();
  kv["tau"] = tau == 0 ? "auto" : std::to_string(tau);
  kv["max_lag"] = std::to_string(max_lag);
  kv["d_max"] = std::to_string(d_max);
  kv["epsilon"] = format_double(epsilon);
  kv["force_k"] = std::to_string(force_k);
  kv["rr"] = format_double(rr);
  kv["l_min"] = std::to_string(l_min);
  kv["v_min"] = std::to_string(v_min);
  kv["render_size"] = std::to_string(render_size);
  kv["render_subjects"] = std::to_string(render_subjects);
  kv["shrinkage"] = format_double(shrinkage);
  kv["edge_threshold"] = format_double(edge_threshold);
  kv["signed_edges"] = signed_edges ? "true" : "false";
  kv["marginal"] = marginal ? "true" : "false";
  kv["top_k"] = std::to_string(top_k);
  kv["folds"] = std::to_string(folds);
  kv["trees"] = std::to_string(trees);
  kv["seed"] = std::to_string(seed);
  kv["max_depth"] = std::to_string(max_depth);
  kv["min_leaf"] = std::to_string(min_leaf);
  kv["per_fold_mean"] = per_fold_mean ? "true" : "false";
  std::string fam;
  for (auto f : features) fam += (fam.empty() ? "" : ",") + std::string(classify::feature_kind_name(f));
  kv["features"] = fam;
  std::string nets;
  for (auto n : networks) nets += (nets.empty() ? "" : ",") + std::string(network_name(n));
  kv["networks"] = nets;
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(canonical()); }
std::string PipelineConfig::hash_hex() const { return hex64(hash()); }

bool PipelineConfig::wants(classify::FeatureKind kind) const {
  return std::find(features.begin(), features.end(), kind) != features.end();
}

// ---------------------------------------------------------------- stage files

void write_rqa_csv(const fs::path& path, const std::vector<RqaRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "subject,network,roi,rr,det,lmean,lmax,lam,tt,entr\n";
  for (const auto& r : rows) {
    const auto& f = r.features;
    const std::string fields[] = {r.subject, std::string(network_name(r.network)), std::to_string(r.roi),
                                  format_double(f.rr), format_double(f.det), format_double(f.l_mean),
                                  format_double(f.l_max), format_double(f.lam), format_double(f.tt),
                                  format_double(f.entr)};
    write_csv_row(out, fields);
  }
}

std::vector<RqaRow> read_rqa_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<RqaRow> rows;
  for (const auto& row : table.rows) {
    if (row.size() != 10) throw Error(ErrorCode::ParseError, path.string() + ": expected 10 fields per row");
    RqaRow r;
    r.subject = row[0];
    r.network = parse_network(row[1]);
    r.roi = static_cast<std::size_t>(parse_integer(row[2], path.string()));
    double* targets[] = {&r.features.rr, &r.features.det, &r.features.l_mean, &r.features.l_max,
                         &r.features.lam, &r.features.tt, &r.features.entr};
    for (std::size_t k = 0; k < 7; ++k) *targets[k] = parse_double(row[3 + k], path.string());
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_graph_features_csv(const fs::path& path, const std::vector<GraphFeatureRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  std::size_t widest = 0;
  for (const auto& r : rows) widest = std::max(widest, r.values.size());
  out << "subject,label,network,feature_kind";
  for (std::size_t k = 1; k <= widest; ++k) out << ",f" << k;
  out << '\n';
  for (const auto& r : rows) {
    std::vector<std::string> fields = {r.subject, std::to_string(static_cast<int>(r.label)),
                                       std::string(network_name(r.network)),
                                       std::string(classify::feature_kind_name(r.kind))};
    for (double v : r.values) fields.push_back(format_double(v));
    write_csv_row(out, fields);
  }
}

std::vector<GraphFeatureRow> read_graph_features_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<GraphFeatureRow> rows;
  for (const auto& row : table.rows) {
    if (row.size() < 5) throw Error(ErrorCode::ParseError, path.string() + ": feature row too short");
    GraphFeatureRow r;
    r.subject = row[0];
    r.label = parse_label(row[1]);
    r.network = parse_network(row[2]);
    r.kind = classify::parse_feature_kind(row[3]);
    for (std::size_t k = 4; k < row.size(); ++k) {
      if (trim(row[k]).empty()) continue;
      r.values.push_back(parse_double(row[k], path.string()));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_adjacency_csv(const fs::path& path, const connectivity::BrainGraph& graph) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  write_csv_row(out, graph.roi_labels);
  std::vector<std::string> fields;
  for (Eigen::Index i = 0; i < graph.adjacency.rows(); ++i) {
    fields.clear();
    for (Eigen::Index j = 0; j < graph.adjacency.cols(); ++j) fields.push_back(format_double(graph.adjacency(i, j)));
    write_csv_row(out, fields);
  }
}

void write_frequency_csv(const fs::path& path, const std::vector<connectivity::FrequencyTable>& tables) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "class,ROI no.,Dosenbach ROI,Fraction of subj.,count,class_size\n";
  for (const auto& table : tables) {
    for (const auto& row : table.rows) {
      const std::string fields[] = {std::string(label_name(table.label)), std::to_string(row.roi + 1),
                                    row.roi_label, format_double(row.fraction), std::to_string(row.count),
                                    std::to_string(table.class_size)};
      write_csv_row(out, fields);
    }
  }
}

classify::FeatureTable graph_feature_table(const std::vector<GraphFeatureRow>& rows,
                                           classify::FeatureKind kind, Network network) {
  classify::FeatureTable table;
  table.provenance = kind;
  for (const auto& r : rows) {
    if (r.kind != kind || r.network != network) continue;
    table.ids.push_back(r.subject);
    table.rows.push_back(r.values);
    table.labels.push_back(static_cast<int>(r.label));
  }
  return table;
}

classify::FeatureTable rqa_feature_table(const std::vector<RqaRow>& rows,
                                         const std::map<std::string, Label>& labels, Network network) {
  classify::FeatureTable table;
  table.provenance = classify::FeatureKind::rqa;
  const std::size_t n = roi_count(network);
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    if (r.network != network) continue;
    if (r.roi >= n) throw Error(ErrorCode::ParseError, "RQA row ROI index out of range");
    auto [it, inserted] = index.try_emplace(r.subject, table.rows.size());
    if (inserted) {
      const auto label = labels.find(r.subject);
      if (label == labels.end()) throw Error(ErrorCode::InvalidArgument, "no label for subject '" + r.subject + "'");
      table.ids.push_back(r.subject);
      table.rows.emplace_back(7 * n, std::nan(""));
      table.labels.push_back(static_cast<int>(label->second));
    }
    const auto& f = r.features;
    const double values[] = {f.rr, f.det, f.l_mean, f.l_max, f.lam, f.tt, f.entr};
    std::copy(std::begin(values), std::end(values), table.rows[it->second].begin() + static_cast<std::ptrdiff_t>(7 * r.roi));
  }
  for (std::size_t s = 0; s < table.rows.size(); ++s) {
    for (double v : table.rows[s]) {
      if (std::isnan(v)) {
        throw Error(ErrorCode::InvalidArgument,
                    "subject '" + table.ids[s] + "' lacks RQA rows for some ROIs of " + std::string(network_name(network)));
      }
    }
  }
  return table;
}

std::map<std::string, Label> read_labels(const fs::path& manifest) {
  const CsvTable table = read_csv(manifest);
  std::map<std::string, Label> labels;
  for (const auto& row : table.rows) {
    if (row.size() < 2) throw Error(ErrorCode::ParseError, manifest.string() + ": short manifest row");
    labels[trim(row[0])] = parse_label(row[1]);
  }
  return labels;
}

LocalResult analyze_roi(const RoiTimeSeries& roi, const LocalOptions& options, bool keep_distances) {
  LocalResult result;
  result.rqa.network = roi.network;
  result.rqa.roi = roi.roi_id;
  result.embedding = embedding::embed_auto(roi.values, options.embedding);
  auto distances = recurrence::recurrence_matrix(result.embedding.states);
  const auto binary = recurrence::threshold(distances, recurrence::ThresholdRule::rate(options.rr));
  result.rqa.features = recurrence::rqa_measures(binary, options.l_min, options.v_min);
  result.embedding.states = {};
  if (keep_distances) result.distances = std::move(distances);
  return result;
}

// ------------------------------------------------------------------- stages

namespace {

struct RoiTask {
  std::size_t subject;
  Network network;
  std::size_t roi;
};

std::string local_stage_key(const PipelineConfig& c) {
  std::ostringstream key;
  key << "data_root=" << c.data_root.generic_string() << "\nmanifest=" << c.manifest.generic_string()
      << "\ntau=" << c.tau << "\nmax_lag=" << c.max_lag << "\nd_max=" << c.d_max
      << "\nepsilon=" << format_double(c.epsilon) << "\nforce_k=" << c.force_k << "\nrr=" << format_double(c.rr)
      << "\nl_min=" << c.l_min << "\nv_min=" << c.v_min << "\nrender_size=" << c.render_size
      << "\nrender_subjects=" << c.render_subjects << "\nnetworks=";
  for (auto n : c.networks) key << network_name(n) << ',';
  return key.str();
}

}  // namespace

bool local_stage(const PipelineConfig& config, const CohortDataset& dataset, const fs::path& run) {
  const fs::path stage = run / "rqa";
  const fs::path marker = stage / "stage.json";
  const std::string key = hex64(fnv1a(local_stage_key(config)));
  if (fs::exists(marker) && fs::exists(stage / "features.csv")) {
    const auto j = nlohmann::json::parse(read_text(marker), nullptr, false);
    if (!j.is_discarded() && j.value("key", "") == key && j.value("complete", false)) return true;
  }
  fs::create_directories(stage);
  fs::create_directories(run / "embedding");

  std::vector<RoiTask> tasks;
  for (std::size_t s = 0; s < dataset.subjects.size(); ++s) {
    for (Network net : config.networks) {
      for (std::size_t r = 0; r < roi_count(net); ++r) tasks.push_back({s, net, r});
    }
  }
  LocalOptions options;
  options.embedding.tau = config.tau;
  options.embedding.max_lag = config.max_lag;
  options.embedding.d_max = config.d_max;
  options.embedding.epsilon = config.epsilon;
  options.embedding.force_k = config.force_k;
  options.rr = config.rr;
  options.l_min = config.l_min;
  options.v_min = config.v_min;

  std::vector<LocalResult> results(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& task = tasks[t];
    const Subject& subject = dataset.subjects[task.subject];
    const auto& roi = subject.network(task.network)[task.roi];
    const bool render = task.subject < config.render_subjects;
    try {
      results[t] = analyze_roi(roi, options, render);
      results[t].rqa.subject = subject.subject_id;
      if (render) {
        const fs::path dir = run / "plots" / subject.subject_id;
        fs::create_directories(dir);
        const auto image = recurrence::resize_bilinear(results[t].distances, config.render_size);
        recurrence::render_grayscale(image, dir / (std::string(network_name(task.network)) + "_" +
                                                   std::to_string(task.roi + 1) + ".pgm"));
        results[t].distances = {};
      }
    } catch (const Error& e) {
      throw with_context(e, "local stage, subject '" + subject.subject_id + "', network " +
                                std::string(network_name(task.network)) + ", roi " + std::to_string(task.roi));
    }
  });

  std::vector<RqaRow> rows;
  rows.reserve(results.size());
  std::ofstream params(run / "embedding" / "params.csv");
  params << "subject,network,roi,tau,m,k,saturated,degenerate\n";
  for (auto& r : results) {
    params << r.rqa.subject << ',' << network_name(r.rqa.network) << ',' << r.rqa.roi << ','
           << r.embedding.params.tau << ',' << r.embedding.params.m << ',' << r.embedding.k << ','
           << (r.embedding.saturated ? 1 : 0) << ',' << (r.embedding.degenerate ? 1 : 0) << '\n';
    rows.push_back(std::move(r.rqa));
  }
  write_rqa_csv(stage / "features.csv", rows);
  ordered_json j;
  j["key"] = key;
  j["complete"] = true;
  write_text(marker, j.dump(2) + "\n");
  return false;
}

void graph_stage(const PipelineConfig& config, const CohortDataset& dataset, const fs::path& run) {
  const fs::path stage = run / "graph";
  fs::create_directories(stage / "adjacency");

  struct GraphTask {
    std::size_t subject;
    Network network;
  };
  std::vector<GraphTask> tasks;
  for (std::size_t s = 0; s < dataset.subjects.size(); ++s) {
    for (Network net : config.networks) tasks.push_back({s, net});
  }
  struct GraphResult {
    connectivity::BrainGraph graph;
    connectivity::EigenFeatures eigen;
    connectivity::RoiRanking ranking;
  };
  std::vector<GraphResult> results(tasks.size());
  connectivity::GraphOptions graph_options{config.shrinkage, config.marginal};
  connectivity::DegreeOptions degree_options{config.edge_threshold, config.signed_edges};
  parallel_for(tasks.size(), [&](std::size_t t) {
    const Subject& subject = dataset.subjects[tasks[t].subject];
    try {
      auto& r = results[t];
      r.graph = connectivity::build_graph(subject, tasks[t].network, graph_options);
      r.eigen = connectivity::eigen_features(r.graph.adjacency);
      r.ranking = connectivity::degree_and_rank(r.graph.adjacency, degree_options);
      const fs::path dir = stage / "adjacency" / subject.subject_id;
      fs::create_directories(dir);
      write_adjacency_csv(dir / (std::string(network_name(tasks[t].network)) + ".csv"), r.graph);
    } catch (const Error& e) {
      throw with_context(e, "graph stage, subject '" + subject.subject_id + "', network " +
                                std::string(network_name(tasks[t].network)));
    }
  });

  std::vector<GraphFeatureRow> rows;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Subject& subject = dataset.subjects[tasks[t].subject];
    const auto& eig = results[t].eigen;
    rows.push_back({subject.subject_id, subject.label, tasks[t].network, classify::FeatureKind::eigenvalues,
                    std::vector<double>(eig.eigenvalues.data(), eig.eigenvalues.data() + eig.eigenvalues.size())});
    rows.push_back({subject.subject_id, subject.label, tasks[t].network, classify::FeatureKind::leading_eigenvector,
                    std::vector<double>(eig.leading_vector.data(), eig.leading_vector.data() + eig.leading_vector.size())});
  }
  write_graph_features_csv(stage / "features.csv", rows);

  for (Network net : config.networks) {
    std::vector<connectivity::RoiRanking> rankings;
    std::vector<Label> labels;
    std::vector<std::string> roi_labels;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].network != net) continue;
      rankings.push_back(results[t].ranking);
      labels.push_back(dataset.subjects[tasks[t].subject].label);
      if (roi_labels.empty()) roi_labels = results[t].graph.roi_labels;
    }
    if (rankings.empty()) continue;
    write_frequency_csv(stage / ("frequency_" + std::string(network_name(net)) + ".csv"),
                        connectivity::top_roi_frequency(rankings, labels, roi_labels, config.top_k));
  }
}

std::vector<classify::MetricsReport> classify_stage(const PipelineConfig& config, const CohortDataset& dataset,
                                                    const fs::path& run) {
  const fs::path stage = run / "classify";
  fs::create_directories(stage);
  std::vector<GraphFeatureRow> graph_rows;
  if (config.wants(classify::FeatureKind::eigenvalues) || config.wants(classify::FeatureKind::leading_eigenvector)) {
    graph_rows = read_graph_features_csv(run / "graph" / "features.csv");
  }
  std::vector<RqaRow> rqa_rows;
  std::map<std::string, Label> labels;
  if (config.wants(classify::FeatureKind::rqa)) {
    rqa_rows = read_rqa_csv(run / "rqa" / "features.csv");
    for (const auto& s : dataset.subjects) labels[s.subject_id] = s.label;
  }

  classify::CvOptions cv;
  cv.folds = config.folds;
  cv.trees = config.trees;
  cv.seed = config.seed;
  cv.per_fold_mean = config.per_fold_mean;
  if (config.max_depth > 0) cv.tree.max_depth = config.max_depth;
  cv.tree.min_leaf = config.min_leaf;

  std::vector<classify::MetricsReport> reports;
  ordered_json all = ordered_json::array();
  std::ostringstream csv;
  csv << classify::MetricsReport::csv_header() << '\n';
  for (auto kind : config.features) {
    for (Network net : config.networks) {
      const auto table = kind == classify::FeatureKind::rqa ? rqa_feature_table(rqa_rows, labels, net)
                                                            : graph_feature_table(graph_rows, kind, net);
      classify::MetricsReport report;
      try {
        report = classify::cross_validate(table, cv);
      } catch (const Error& e) {
        throw with_context(e, "classify stage, features " + std::string(classify::feature_kind_name(kind)) +
                                  ", network " + std::string(network_name(net)));
      }
      report.network = std::string(network_name(net));
      const std::string json = report.to_json();
      write_text(stage / (report.feature_kind + "_" + report.network + ".json"), json + "\n");
      all.push_back(ordered_json::parse(json));
      csv << report.csv_row() << '\n';
      reports.push_back(std::move(report));
    }
  }
  write_text(stage / "metrics.csv", csv.str());
  write_text(stage / "metrics.json", all.dump(2) + "\n");
  return reports;
}

RunSummary run_pipeline(const PipelineConfig& config) {
  config.validate();
  const auto started = std::chrono::system_clock::now();
  if (config.jobs > 0) set_max_jobs(config.jobs);

  RunSummary summary;
  summary.run_dir = config.out;
  fs::create_directories(config.out);
  write_text(config.out / "config.txt", config.canonical());

  const CohortDataset dataset = load_cohort(config.data_root, config.manifest, config.networks);
  {
    const auto report = validate_dataset(dataset);
    write_text(config.out / "validation.json", report.to_json() + "\n");
  }

  if (config.wants(classify::FeatureKind::rqa)) {
    summary.local_stage_cached = local_stage(config, dataset, config.out);
  }
  graph_stage(config, dataset, config.out);
  summary.reports = classify_stage(config, dataset, config.out);

  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = config.hash_hex();
  manifest["seed"] = config.seed;
  manifest["subjects"] = dataset.subjects.size();
  manifest["n_timepoints"] = dataset.n_timepoints;
  manifest["stages"] = {"load", config.wants(classify::FeatureKind::rqa) ? "rqa" : "rqa(skipped)", "graph", "classify"};
  manifest["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  write_text(config.out / "manifest.json", manifest.dump(2) + "\n");

  const auto finished = std::chrono::system_clock::now();
  ordered_json times;
  times["started_unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(started.time_since_epoch()).count();
  times["finished_unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(finished.time_since_epoch()).count();
  times["local_stage_cached"] = summary.local_stage_cached;
  write_text(config.out / "timestamps.json", times.dump(2) + "\n");
  return summary;
}

// ------------------------------------------------------------------- report

namespace {

struct FrequencyEntry {
  std::string label;
  std::string roi_no;
  std::string roi_label;
  double fraction = 0.0;
};

std::string pad(const std::string& text, std::size_t width) {
  return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

}  // namespace

std::string report(const fs::path& run_dir, ReportFormat format) {
  const fs::path metrics_path = run_dir / "classify" / "metrics.json";
  if (!fs::exists(metrics_path)) {
    throw Error(ErrorCode::IncompleteRun, "run '" + run_dir.string() + "' has no classification results");
  }
  const auto metrics = nlohmann::json::parse(read_text(metrics_path), nullptr, false);
  if (metrics.is_discarded() || !metrics.is_array()) {
    throw Error(ErrorCode::IncompleteRun, "run '" + run_dir.string() + "': unreadable metrics.json");
  }

  std::vector<std::string> families;
  std::vector<std::string> networks;
  for (const auto& row : metrics) {
    const std::string fam = row.at("features");
    const std::string net = row.at("network");
    if (std::find(families.begin(), families.end(), fam) == families.end()) families.push_back(fam);
    if (std::find(networks.begin(), networks.end(), net) == networks.end()) networks.push_back(net);
  }

  std::vector<std::pair<std::string, std::vector<FrequencyEntry>>> frequency;
  for (const auto& net : networks) {
    const fs::path path = run_dir / "graph" / ("frequency_" + net + ".csv");
    if (!fs::exists(path)) continue;
    auto& entries = frequency.emplace_back(net, std::vector<FrequencyEntry>{}).second;
    for (const auto& row : read_csv(path).rows) {
      if (row.size() < 4) continue;
      entries.push_back({row[0], row[1], row[2], parse_double(row[3], path.string())});
    }
  }

  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "features,network,precision,recall,f1,accuracy\n";
    for (const auto& row : metrics) {
      const auto& m = row.at("metrics");
      out << row.at("features").get<std::string>() << ',' << row.at("network").get<std::string>() << ','
          << format_double(m.at("precision").get<double>()) << ',' << format_double(m.at("recall").get<double>())
          << ',' << format_double(m.at("f1").get<double>()) << ',' << format_double(m.at("accuracy").get<double>())
          << '\n';
    }
    out << "\nnetwork,class,roi_no,roi_label,fraction\n";
    for (const auto& [net, entries] : frequency) {
      for (const auto& e : entries) {
        const std::string fields[] = {net, e.label, e.roi_no, e.roi_label, format_double(e.fraction)};
        write_csv_row(out, fields);
      }
    }
    return out.str();
  }

  out << "Cross-validated ensemble performance\n";
  out << pad("Network", 20);
  for (const auto& fam : families) out << " | " << pad(fam, 30);
  out << '\n' << pad("", 20);
  for (std::size_t f = 0; f < families.size(); ++f) out << " | " << pad("Prec   Recall F1     Accuracy", 30);
  out << '\n';
  for (const auto& net : networks) {
    out << pad(net, 20);
    for (const auto& fam : families) {
      const auto it = std::find_if(metrics.begin(), metrics.end(), [&](const auto& row) {
        return row.at("features") == fam && row.at("network") == net;
      });
      if (it == metrics.end()) {
        out << " | " << pad("-", 30);
        continue;
      }
      const auto& m = it->at("metrics");
      out << " | " << fixed(m.at("precision").get<double>(), 2) << "   " << fixed(m.at("recall").get<double>(), 2)
          << "   " << fixed(m.at("f1").get<double>(), 2) << "   "
          << pad(fixed(100.0 * m.at("accuracy").get<double>(), 2) + "%", 9);
    }
    out << '\n';
  }

  for (const auto& [net, entries] : frequency) {
    out << "\nTop ROIs by degree, " << net << "\n";
    for (const std::string cls : {"class0", "class1"}) {
      out << "  " << cls << ":  ROI no.  Dosenbach ROI                 Fraction of subj.\n";
      std::size_t shown = 0;
      for (const auto& e : entries) {
        if (e.label != cls || shown >= 5) continue;
        out << "           " << pad(e.roi_no, 7) << "  " << pad(e.roi_label, 29) << " " << fixed(e.fraction, 2) << '\n';
        ++shown;
      }
    }
  }
  return out.str();
}

}  // namespace twoscale::pipeline
