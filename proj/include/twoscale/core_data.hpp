#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twoscale {

// The six Dosenbach networks. Enumerator order is the canonical output order.
enum class Network {
  default_mode,
  frontoparietal,
  cingulo_opercular,
  sensorimotor,
  occipital,
  cerebellum,
};

inline constexpr std::array<Network, 6> kAllNetworks = {
    Network::default_mode, Network::frontoparietal, Network::cingulo_opercular,
    Network::sensorimotor, Network::occipital,      Network::cerebellum,
};

inline constexpr std::size_t kTotalRois = 160;

constexpr std::size_t roi_count(Network network) noexcept {
  switch (network) {
    case Network::default_mode: return 34;
    case Network::frontoparietal: return 21;
    case Network::cingulo_opercular: return 32;
    case Network::sensorimotor: return 33;
    case Network::occipital: return 22;
    case Network::cerebellum: return 18;
  }
  return 0;
}

std::string_view network_name(Network network) noexcept;
// Throws Error(InvalidArgument) for unknown names.
Network parse_network(std::string_view name);

// Synthetic anatomical label used when no atlas label is available,
// e.g. "default_mode_07".
std::string default_roi_label(Network network, std::size_t roi_id);

enum class Label { class0 = 0, class1 = 1 };

// Accepts 0/1, class0/class1 and HC/MCI (case-insensitive).
Label parse_label(std::string_view text);
std::string_view label_name(Label label) noexcept;

struct RoiTimeSeries {
  std::size_t roi_id = 0;
  std::string roi_label;
  Network network = Network::default_mode;
  std::vector<double> values;
};

struct Subject {
  std::string subject_id;
  Label label = Label::class0;
  // Only networks that were loaded or generated are present.
  std::map<Network, std::vector<RoiTimeSeries>> networks;

  const std::vector<RoiTimeSeries>& network(Network net) const;
};

struct CohortDataset {
  std::vector<Subject> subjects;
  std::size_t n_timepoints = 0;
};

// Checks the in-memory invariants (ROI counts, equal lengths, finiteness).
// Throws the same error codes as load_cohort.
void check_subject(const Subject& subject, std::size_t n_timepoints);

// Reads `manifest` (header subject_id,label,path). Relative subject paths are
// resolved against `root`. Each subject directory must hold one
// `<network>.csv` per network: rows are timepoints, columns are ROIs and the
// header carries ROI labels.
CohortDataset load_cohort(const std::filesystem::path& root,
                          const std::filesystem::path& manifest);

// Restricts loading to a subset of networks; the others are not read.
CohortDataset load_cohort(const std::filesystem::path& root,
                          const std::filesystem::path& manifest,
                          std::span<const Network> networks);

// Writes `root/manifest.csv` plus one directory per subject. Values use the
// shortest decimal form that round-trips exactly.
void write_cohort(const CohortDataset& dataset, const std::filesystem::path& root);

// Single-series helpers used by the CLI for per-ROI commands: one column,
// optional header.
std::vector<double> read_series_csv(const std::filesystem::path& path, std::size_t column = 0);
void write_series_csv(const std::filesystem::path& path, std::span<const double> values,
                      std::string_view header = "value");

struct ConstantSeries {
  std::string subject_id;
  Network network;
  std::size_t roi_id;
  std::string roi_label;
};

struct ValidationReport {
  std::size_t subject_count = 0;
  std::vector<std::pair<std::string, std::size_t>> timepoints;  // subject -> N
  std::size_t class0_count = 0;
  std::size_t class1_count = 0;
  std::vector<ConstantSeries> constant_series;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

ValidationReport validate_dataset(const CohortDataset& dataset);

}  // namespace twoscale
