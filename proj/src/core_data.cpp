#include "twoscale/core_data.hpp"

#include "twoscale/csv.hpp"
#include "twoscale/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace twoscale {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string where(std::string_view subject, Network network) {
  return "subject '" + std::string(subject) + "', network " + std::string(network_name(network));
}

std::vector<RoiTimeSeries> load_network_file(const fs::path& file, const std::string& subject_id,
                                             Network network) {
  if (!fs::exists(file)) {
    throw Error(ErrorCode::MissingNetworkFile,
                where(subject_id, network) + ": missing file '" + file.string() + "'");
  }
  const CsvTable table = read_csv(file);
  const std::size_t expected = roi_count(network);
  if (table.header.size() != expected) {
    throw Error(ErrorCode::RoiCountMismatch,
                where(subject_id, network) + ": expected " + std::to_string(expected) +
                    " ROIs, found " + std::to_string(table.header.size()));
  }
  std::vector<RoiTimeSeries> rois(expected);
  for (std::size_t r = 0; r < expected; ++r) {
    rois[r].roi_id = r;
    rois[r].roi_label = trim(table.header[r]);
    rois[r].network = network;
    rois[r].values.reserve(table.rows.size());
  }
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    const auto& row = table.rows[t];
    if (row.size() != expected) {
      throw Error(ErrorCode::LengthMismatch,
                  where(subject_id, network) + ": timepoint " + std::to_string(t) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(expected));
    }
    for (std::size_t r = 0; r < expected; ++r) {
      const auto value = try_parse_double(row[r]);
      if (!value) {
        throw Error(ErrorCode::ParseError, where(subject_id, network) + ", roi " +
                                               std::to_string(r) + ", timepoint " +
                                               std::to_string(t) + ": not a number: '" +
                                               row[r] + "'");
      }
      if (!std::isfinite(*value)) {
        throw Error(ErrorCode::NonFiniteSample, where(subject_id, network) + ", roi " +
                                                    std::to_string(r) + ", timepoint " +
                                                    std::to_string(t) + ": non-finite sample");
      }
      rois[r].values.push_back(*value);
    }
  }
  return rois;
}

}  // namespace

std::string_view network_name(Network network) noexcept {
  switch (network) {
    case Network::default_mode: return "default_mode";
    case Network::frontoparietal: return "frontoparietal";
    case Network::cingulo_opercular: return "cingulo_opercular";
    case Network::sensorimotor: return "sensorimotor";
    case Network::occipital: return "occipital";
    case Network::cerebellum: return "cerebellum";
  }
  return "unknown";
}

Network parse_network(std::string_view name) {
  const std::string key = lower(trim(name));
  for (Network net : kAllNetworks) {
    if (network_name(net) == key) return net;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown network '" + std::string(name) + "'");
}

std::string default_roi_label(Network network, std::size_t roi_id) {
  std::ostringstream out;
  out << network_name(network) << '_';
  if (roi_id + 1 < 10) out << '0';
  out << roi_id + 1;
  return out.str();
}

Label parse_label(std::string_view text) {
  const std::string key = lower(trim(text));
  if (key == "0" || key == "class0" || key == "hc") return Label::class0;
  if (key == "1" || key == "class1" || key == "mci") return Label::class1;
  throw Error(ErrorCode::InvalidLabel,
              "label '" + std::string(text) + "' is not binary (expected 0/1, class0/class1, HC/MCI)");
}

std::string_view label_name(Label label) noexcept {
  return label == Label::class0 ? "class0" : "class1";
}

const std::vector<RoiTimeSeries>& Subject::network(Network net) const {
  auto it = networks.find(net);
  if (it == networks.end()) {
    throw Error(ErrorCode::MissingNetworkFile,
                where(subject_id, net) + ": network not present");
  }
  return it->second;
}

void check_subject(const Subject& subject, std::size_t n_timepoints) {
  if (n_timepoints < 2) {
    throw Error(ErrorCode::LengthMismatch,
                "subject '" + subject.subject_id + "': need at least 2 timepoints");
  }
  for (const auto& [net, rois] : subject.networks) {
    if (rois.size() != roi_count(net)) {
      throw Error(ErrorCode::RoiCountMismatch,
                  where(subject.subject_id, net) + ": expected " +
                      std::to_string(roi_count(net)) + " ROIs, found " +
                      std::to_string(rois.size()));
    }
    for (const auto& roi : rois) {
      if (roi.values.size() != n_timepoints) {
        throw Error(ErrorCode::LengthMismatch,
                    where(subject.subject_id, net) + ", roi " + std::to_string(roi.roi_id) +
                        ": length " + std::to_string(roi.values.size()) + ", expected " +
                        std::to_string(n_timepoints));
      }
      for (std::size_t t = 0; t < roi.values.size(); ++t) {
        if (!std::isfinite(roi.values[t])) {
          throw Error(ErrorCode::NonFiniteSample,
                      where(subject.subject_id, net) + ", roi " + std::to_string(roi.roi_id) +
                          ", timepoint " + std::to_string(t) + ": non-finite sample");
        }
      }
    }
  }
}

CohortDataset load_cohort(const fs::path& root, const fs::path& manifest) {
  return load_cohort(root, manifest, kAllNetworks);
}

CohortDataset load_cohort(const fs::path& root, const fs::path& manifest,
                          std::span<const Network> networks) {
  const CsvTable table = read_csv(manifest);
  std::vector<std::string> header;
  for (const auto& h : table.header) header.push_back(lower(trim(h)));
  if (header != std::vector<std::string>{"subject_id", "label", "path"}) {
    throw Error(ErrorCode::ParseError, "manifest '" + manifest.string() +
                                           "': header must be subject_id,label,path");
  }
  CohortDataset dataset;
  bool have_length = false;
  for (const auto& row : table.rows) {
    if (row.size() != 3) {
      throw Error(ErrorCode::ParseError,
                  "manifest '" + manifest.string() + "': expected 3 fields per row");
    }
    Subject subject;
    subject.subject_id = trim(row[0]);
    subject.label = parse_label(row[1]);
    fs::path dir = trim(row[2]);
    if (dir.is_relative()) dir = root / dir;
    for (Network net : networks) {
      const fs::path file = dir / (std::string(network_name(net)) + ".csv");
      subject.networks[net] = load_network_file(file, subject.subject_id, net);
    }
    for (const auto& [net, rois] : subject.networks) {
      const std::size_t n = rois.front().values.size();
      if (!have_length) {
        dataset.n_timepoints = n;
        have_length = true;
      } else if (n != dataset.n_timepoints) {
        throw Error(ErrorCode::LengthMismatch,
                    where(subject.subject_id, net) + ": " + std::to_string(n) +
                        " timepoints, expected " + std::to_string(dataset.n_timepoints));
      }
    }
    check_subject(subject, dataset.n_timepoints);
    dataset.subjects.push_back(std::move(subject));
  }
  return dataset;
}

void write_cohort(const CohortDataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  std::ofstream manifest(root / "manifest.csv");
  if (!manifest) throw Error(ErrorCode::IoError, "cannot write manifest in '" + root.string() + "'");
  manifest << "subject_id,label,path\n";
  for (const auto& subject : dataset.subjects) {
    const fs::path dir = root / subject.subject_id;
    fs::create_directories(dir);
    const std::string fields[] = {subject.subject_id,
                                  std::to_string(static_cast<int>(subject.label)),
                                  subject.subject_id};
    write_csv_row(manifest, fields);
    for (const auto& [net, rois] : subject.networks) {
      const fs::path file = dir / (std::string(network_name(net)) + ".csv");
      std::ofstream out(file);
      if (!out) throw Error(ErrorCode::IoError, "cannot write '" + file.string() + "'");
      std::vector<std::string> row;
      for (const auto& roi : rois) row.push_back(roi.roi_label);
      write_csv_row(out, row);
      const std::size_t n = rois.empty() ? 0 : rois.front().values.size();
      for (std::size_t t = 0; t < n; ++t) {
        row.clear();
        for (const auto& roi : rois) row.push_back(format_double(roi.values[t]));
        write_csv_row(out, row);
      }
    }
  }
}

std::vector<double> read_series_csv(const fs::path& path, std::size_t column) {
  const CsvTable table = read_csv(path, false);
  std::vector<double> values;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (column >= row.size()) {
      throw Error(ErrorCode::ParseError, path.string() + ": row " + std::to_string(i) +
                                             " has no column " + std::to_string(column));
    }
    const auto value = try_parse_double(row[column]);
    if (!value) {
      if (i == 0) continue;  // header
      throw Error(ErrorCode::ParseError, path.string() + ": row " + std::to_string(i) +
                                             ": not a number: '" + row[column] + "'");
    }
    if (!std::isfinite(*value)) {
      throw Error(ErrorCode::NonFiniteSample,
                  path.string() + ": non-finite sample at row " + std::to_string(i));
    }
    values.push_back(*value);
  }
  return values;
}

void write_series_csv(const fs::path& path, std::span<const double> values,
                      std::string_view header) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << header << '\n';
  for (double v : values) out << format_double(v) << '\n';
}

ValidationReport validate_dataset(const CohortDataset& dataset) {
  ValidationReport report;
  report.subject_count = dataset.subjects.size();
  if (dataset.subjects.empty()) report.warnings.push_back("dataset has no subjects");
  for (const auto& subject : dataset.subjects) {
    std::size_t n = 0;
    for (const auto& [net, rois] : subject.networks) {
      for (const auto& roi : rois) {
        n = roi.values.size();
        const bool constant =
            std::adjacent_find(roi.values.begin(), roi.values.end(), std::not_equal_to<>()) ==
            roi.values.end();
        if (constant) report.constant_series.push_back({subject.subject_id, net, roi.roi_id, roi.roi_label});
      }
    }
    report.timepoints.emplace_back(subject.subject_id, n);
    (subject.label == Label::class0 ? report.class0_count : report.class1_count) += 1;
  }
  if (!dataset.subjects.empty() && (report.class0_count < 2 || report.class1_count < 2)) {
    report.warnings.push_back("fewer than 2 subjects in some class; classification is not possible");
  }
  if (!report.constant_series.empty()) {
    report.warnings.push_back(std::to_string(report.constant_series.size()) +
                              " constant ROI series flagged");
  }
  return report;
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["subject_count"] = subject_count;
  j["class_counts"] = {{"class0", class0_count}, {"class1", class1_count}};
  auto& n = j["timepoints"] = nlohmann::ordered_json::object();
  for (const auto& [id, count] : timepoints) n[id] = count;
  auto& flagged = j["constant_series"] = nlohmann::ordered_json::array();
  for (const auto& c : constant_series) {
    flagged.push_back({{"subject", c.subject_id},
                       {"network", network_name(c.network)},
                       {"roi", c.roi_id},
                       {"roi_label", c.roi_label}});
  }
  j["warnings"] = warnings;
  return j.dump(2);
}

}  // namespace twoscale
