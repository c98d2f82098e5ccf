#pragma once

#include "twoscale/classify.hpp"
#include "twoscale/connectivity.hpp"
#include "twoscale/core_data.hpp"
#include "twoscale/recurrence.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace twoscale::pipeline {

inline constexpr const char* kVersion = "1.0.0";

// Every tunable of a run. Keys in config files use the member names.
struct PipelineConfig {
  std::filesystem::path data_root;
  std::filesystem::path manifest;
  std::filesystem::path out = "run";

  // embedding
  std::size_t tau = 0;  // 0 = auto
  std::size_t max_lag = 20;
  std::size_t d_max = 10;
  double epsilon = 0.05;
  std::size_t force_k = 0;
  // recurrence
  double rr = 0.1;
  std::size_t l_min = 2;
  std::size_t v_min = 2;
  std::size_t render_size = 224;
  std::size_t render_subjects = 1;
  // connectivity
  double shrinkage = 0.1;
  double edge_threshold = 0.2;
  bool signed_edges = false;
  bool marginal = false;
  std::size_t top_k = 10;
  // classification
  std::size_t folds = 10;
  std::size_t trees = 400;
  std::uint64_t seed = 42;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  bool per_fold_mean = false;
  std::vector<classify::FeatureKind> features = {classify::FeatureKind::eigenvalues,
                                                 classify::FeatureKind::leading_eigenvector,
                                                 classify::FeatureKind::rqa};
  std::vector<Network> networks = {kAllNetworks.begin(), kAllNetworks.end()};
  unsigned jobs = 0;

  // Throws Error(InvalidConfig) for unknown keys or out-of-domain values.
  void set(const std::string& key, const std::string& value);
  // Flat key=value file; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void validate() const;

  // key=value lines of every setting that influences results (paths to the
  // data included, output directory and job count excluded), sorted by key.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  bool wants(classify::FeatureKind kind) const;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

struct RqaRow {
  std::string subject;
  Network network = Network::default_mode;
  std::size_t roi = 0;
  recurrence::RqaFeatures features;
};

void write_rqa_csv(const std::filesystem::path& path, const std::vector<RqaRow>& rows);
std::vector<RqaRow> read_rqa_csv(const std::filesystem::path& path);

struct GraphFeatureRow {
  std::string subject;
  Label label = Label::class0;
  Network network = Network::default_mode;
  classify::FeatureKind kind = classify::FeatureKind::eigenvalues;
  std::vector<double> values;
};

void write_graph_features_csv(const std::filesystem::path& path, const std::vector<GraphFeatureRow>& rows);
std::vector<GraphFeatureRow> read_graph_features_csv(const std::filesystem::path& path);

void write_adjacency_csv(const std::filesystem::path& path, const connectivity::BrainGraph& graph);
void write_frequency_csv(const std::filesystem::path& path,
                         const std::vector<connectivity::FrequencyTable>& tables);

// Feature tables for one network, rows in subject order.
classify::FeatureTable graph_feature_table(const std::vector<GraphFeatureRow>& rows,
                                           classify::FeatureKind kind, Network network);
// RQA table: the seven measures of every ROI, concatenated in ROI order.
// Labels come from `labels` (subject -> label).
classify::FeatureTable rqa_feature_table(const std::vector<RqaRow>& rows,
                                         const std::map<std::string, Label>& labels,
                                         Network network);

std::map<std::string, Label> read_labels(const std::filesystem::path& manifest);

struct LocalOptions {
  embedding::EmbeddingSettings embedding;
  double rr = 0.1;
  std::size_t l_min = 2;
  std::size_t v_min = 2;
};

struct LocalResult {
  RqaRow rqa;
  embedding::EmbeddingResult embedding;  // states dropped after use
  recurrence::SquareMatrix distances;
};

// Embedding, recurrence matrix and RQA for one ROI series.
LocalResult analyze_roi(const RoiTimeSeries& roi, const LocalOptions& options, bool keep_distances);

// Per-ROI embedding, recurrence and RQA into run/embedding and run/rqa, plus
// plots for the first `render_subjects` subjects. Returns true when a
// previous result for the same settings was reused.
bool local_stage(const PipelineConfig& config, const CohortDataset& dataset,
                 const std::filesystem::path& run);
// Graphs, eigen features and degree frequency tables into run/graph.
void graph_stage(const PipelineConfig& config, const CohortDataset& dataset,
                 const std::filesystem::path& run);
// Cross-validation for every requested family and network into
// run/classify. Reads the feature files the earlier stages wrote.
std::vector<classify::MetricsReport> classify_stage(const PipelineConfig& config,
                                                    const CohortDataset& dataset,
                                                    const std::filesystem::path& run);

struct RunSummary {
  std::filesystem::path run_dir;
  std::vector<classify::MetricsReport> reports;
  bool local_stage_cached = false;
};

// Full pipeline into config.out. Stages write into subdirectories
// (embedding/, rqa/, plots/, graph/, classify/). The local stage is
// skipped when its outputs already exist for the same settings.
RunSummary run_pipeline(const PipelineConfig& config);

enum class ReportFormat { text, csv };

// Throws Error(IncompleteRun) if the classification stage has not finished.
std::string report(const std::filesystem::path& run_dir, ReportFormat format = ReportFormat::text);

}  // namespace twoscale::pipeline
