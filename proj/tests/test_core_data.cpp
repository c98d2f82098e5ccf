#include "test_util.hpp"

#include "twoscale/core_data.hpp"
#include "twoscale/csv.hpp"
#include "twoscale/synth.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <numeric>

using namespace twoscale;
namespace fs = std::filesystem;

namespace {

CohortDataset small_cohort(std::size_t per_class = 2, std::size_t n = 24) {
  synth::TwoClassOptions o;
  o.subjects_per_class = per_class;
  o.n_timepoints = n;
  o.seed = 11;
  return synth::gen_two_class_cohort(o).dataset;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Rewrites one network file of one subject through `edit` on its parsed rows.
template <class Edit>
void edit_network_file(const fs::path& file, Edit edit) {
  auto table = read_csv(file);
  edit(table);
  std::ofstream out(file);
  write_csv_row(out, table.header);
  for (const auto& row : table.rows) write_csv_row(out, row);
}

}  // namespace

TEST_CASE("network atlas sizes") {
  CHECK(roi_count(Network::default_mode) == 34);
  CHECK(roi_count(Network::frontoparietal) == 21);
  CHECK(roi_count(Network::cingulo_opercular) == 32);
  CHECK(roi_count(Network::sensorimotor) == 33);
  CHECK(roi_count(Network::occipital) == 22);
  CHECK(roi_count(Network::cerebellum) == 18);
  std::size_t total = 0;
  for (auto n : kAllNetworks) total += roi_count(n);
  CHECK(total == 160);
  for (auto n : kAllNetworks) CHECK(parse_network(network_name(n)) == n);
  CHECK_ERROR_CODE(parse_network("visual"), ErrorCode::InvalidArgument);
}

TEST_CASE("labels") {
  CHECK(parse_label("0") == Label::class0);
  CHECK(parse_label("class1") == Label::class1);
  CHECK(parse_label("HC") == Label::class0);
  CHECK(parse_label("MCI") == Label::class1);
  CHECK_ERROR_CODE(parse_label("2"), ErrorCode::InvalidLabel);
  CHECK_ERROR_CODE(parse_label(""), ErrorCode::InvalidLabel);
}

TEST_CASE("cohort round trip is lossless") {
  TempDir dir;
  const auto original = small_cohort();
  write_cohort(original, dir / "a");
  const auto loaded = load_cohort(dir / "a", dir / "a" / "manifest.csv");
  REQUIRE(loaded.subjects.size() == 4);
  CHECK(loaded.n_timepoints == 24);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(loaded.subjects[s].subject_id == original.subjects[s].subject_id);
    CHECK(loaded.subjects[s].label == original.subjects[s].label);
    std::size_t rois = 0;
    for (auto net : kAllNetworks) {
      const auto& a = original.subjects[s].network(net);
      const auto& b = loaded.subjects[s].network(net);
      REQUIRE(a.size() == b.size());
      rois += b.size();
      for (std::size_t r = 0; r < a.size(); ++r) CHECK(a[r].values == b[r].values);
    }
    CHECK(rois == 160);
  }
  write_cohort(loaded, dir / "b");
  for (auto net : kAllNetworks) {
    const std::string file = std::string(network_name(net)) + ".csv";
    CHECK(slurp(dir / "a" / "sub-001" / file) == slurp(dir / "b" / "sub-001" / file));
  }
}

TEST_CASE("network subset loading") {
  TempDir dir;
  write_cohort(small_cohort(), dir.path());
  const std::vector<Network> only = {Network::cerebellum};
  const auto ds = load_cohort(dir.path(), dir / "manifest.csv", only);
  CHECK(ds.subjects[0].networks.size() == 1);
  CHECK(ds.subjects[0].network(Network::cerebellum).size() == 18);
  CHECK_ERROR_CODE(ds.subjects[0].network(Network::occipital), ErrorCode::MissingNetworkFile);
}

TEST_CASE("ingestion errors") {
  TempDir dir;
  write_cohort(small_cohort(), dir.path());
  const fs::path manifest = dir / "manifest.csv";

  SUBCASE("missing network file") {
    fs::remove(dir / "sub-002" / "occipital.csv");
    CHECK_ERROR_CODE(load_cohort(dir.path(), manifest), ErrorCode::MissingNetworkFile);
  }
  SUBCASE("roi count mismatch names both counts") {
    edit_network_file(dir / "sub-001" / "default_mode.csv", [](CsvTable& t) {
      t.header.pop_back();
      for (auto& row : t.rows) row.pop_back();
    });
    try {
      load_cohort(dir.path(), manifest);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RoiCountMismatch);
      CHECK(std::string(e.what()).find("expected 34") != std::string::npos);
      CHECK(std::string(e.what()).find("found 33") != std::string::npos);
    }
  }
  SUBCASE("non-finite sample reports its location") {
    edit_network_file(dir / "sub-003" / "sensorimotor.csv", [](CsvTable& t) { t.rows[5][2] = "nan"; });
    try {
      load_cohort(dir.path(), manifest);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteSample);
      const std::string what = e.what();
      CHECK(what.find("sub-003") != std::string::npos);
      CHECK(what.find("sensorimotor") != std::string::npos);
    }
  }
  SUBCASE("length mismatch across networks") {
    edit_network_file(dir / "sub-001" / "cerebellum.csv", [](CsvTable& t) { t.rows.pop_back(); });
    CHECK_ERROR_CODE(load_cohort(dir.path(), manifest), ErrorCode::LengthMismatch);
  }
  SUBCASE("labels outside {0,1}") {
    std::ofstream(manifest) << "subject_id,label,path\nsub-001,3,sub-001\n";
    CHECK_ERROR_CODE(load_cohort(dir.path(), manifest), ErrorCode::InvalidLabel);
  }
}

TEST_CASE("validation report") {
  auto ds = small_cohort(3);
  auto& roi = ds.subjects[1].networks[Network::occipital][4];
  std::fill(roi.values.begin(), roi.values.end(), 0.0);
  const auto report = validate_dataset(ds);
  CHECK(report.subject_count == 6);
  CHECK(report.class0_count == 3);
  CHECK(report.class1_count == 3);
  REQUIRE(report.constant_series.size() == 1);
  CHECK(report.constant_series[0].subject_id == ds.subjects[1].subject_id);
  CHECK(report.constant_series[0].roi_id == 4);
  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["class_counts"]["class0"] == 3);
  CHECK(j["class_counts"]["class1"] == 3);

  const auto empty = validate_dataset(CohortDataset{});
  CHECK(empty.subject_count == 0);
  CHECK_FALSE(empty.warnings.empty());
}

TEST_CASE("csv number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
    CHECK(parse_double(format_double(v), "test") == v);
  }
  const auto fields = split_csv_line(R"(a,"b,c","d""e",)");
  REQUIRE(fields.size() == 4);
  CHECK(fields[1] == "b,c");
  CHECK(fields[2] == "d\"e");
  CHECK(fields[3].empty());
}
