#include "test_util.hpp"

#include "twoscale/pipeline.hpp"
#include "twoscale/synth.hpp"

#include <json.hpp>

#include <cstdlib>
#include <set>
#include <fstream>
#include <sstream>

using namespace twoscale;
using namespace twoscale::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineConfig small_run(const TempDir& dir) {
  synth::TwoClassOptions o;
  o.subjects_per_class = 6;
  o.n_timepoints = 60;
  o.seed = 3;
  write_cohort(synth::gen_two_class_cohort(o).dataset, dir / "data");
  PipelineConfig c;
  c.data_root = dir / "data";
  c.manifest = dir / "data" / "manifest.csv";
  c.out = dir / "run";
  c.networks = {Network::default_mode, Network::cerebellum};
  c.folds = 3;
  c.trees = 15;
  c.render_size = 32;
  return c;
}

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(TWOSCALE_CLI) + " " + args + " > /dev/null 2> " + err.string();
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("config keys and validation") {
  PipelineConfig c;
  c.set("tau", "auto");
  CHECK(c.tau == 0);
  c.set("tau", "4");
  CHECK(c.tau == 4);
  c.set("networks", "default_mode, occipital");
  CHECK(c.networks == std::vector<Network>{Network::default_mode, Network::occipital});
  c.set("features", "eigvec,rqa");
  CHECK(c.wants(classify::FeatureKind::rqa));
  CHECK_FALSE(c.wants(classify::FeatureKind::eigenvalues));
  c.set("signed_edges", "true");
  CHECK(c.signed_edges);

  CHECK_ERROR_CODE(c.set("colour", "blue"), ErrorCode::InvalidConfig);
  CHECK_ERROR_CODE(c.set("folds", "-3"), ErrorCode::InvalidConfig);
  CHECK_ERROR_CODE(c.set("rr", "abc"), ErrorCode::InvalidConfig);
  CHECK_ERROR_CODE(c.set("networks", "visual"), ErrorCode::InvalidConfig);

  PipelineConfig bad;
  bad.rr = 1.5;
  CHECK_ERROR_CODE(bad.validate(), ErrorCode::InvalidConfig);
  bad = PipelineConfig{};
  bad.top_k = 19;
  bad.networks = {Network::cerebellum};
  CHECK_ERROR_CODE(bad.validate(), ErrorCode::InvalidConfig);
  CHECK_NOTHROW(PipelineConfig{}.validate());
}

TEST_CASE("config file and hash") {
  TempDir dir;
  std::ofstream(dir / "run.cfg") << "# comment\nrr = 0.05\n\nfolds=5  # inline\nseed=9\n";
  PipelineConfig c;
  c.load_file(dir / "run.cfg");
  CHECK(c.rr == 0.05);
  CHECK(c.folds == 5);
  CHECK(c.seed == 9);

  PipelineConfig d = c;
  d.out = "elsewhere";
  d.jobs = 3;
  CHECK(c.hash() == d.hash());
  d.trees = 401;
  CHECK(c.hash() != d.hash());
  CHECK(c.hash_hex().size() == 16);

  std::ofstream(dir / "broken.cfg") << "rr 0.1\n";
  CHECK_ERROR_CODE(c.load_file(dir / "broken.cfg"), ErrorCode::InvalidConfig);
}

TEST_CASE("end-to-end run") {
  TempDir dir;
  auto config = small_run(dir);
  const auto first = run_pipeline(config);
  CHECK_FALSE(first.local_stage_cached);
  CHECK(first.reports.size() == 6);

  const fs::path run = config.out;
  for (const char* f : {"manifest.json", "timestamps.json", "embedding/params.csv", "rqa/features.csv",
                        "graph/features.csv", "graph/frequency_default_mode.csv", "classify/metrics.csv",
                        "classify/eigvec_cerebellum.json", "classify/rqa_default_mode.json",
                        "graph/adjacency/sub-001/default_mode.csv", "plots/sub-001/cerebellum_18.pgm"}) {
    CHECK_MESSAGE(fs::exists(run / f), f);
  }
  CHECK_FALSE(fs::exists(run / "plots" / "sub-002"));
  CHECK_FALSE(fs::exists(run / "classify" / "eigvec_occipital.json"));

  const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
  CHECK(manifest["config_hash"] == config.hash_hex());
  CHECK(manifest["seed"] == 42);
  CHECK(manifest["version"] == kVersion);

  const auto metrics = nlohmann::json::parse(slurp(run / "classify" / "metrics.json"));
  std::set<std::string> families;
  for (const auto& row : metrics) families.insert(row["features"].get<std::string>());
  CHECK(families == std::set<std::string>{"eigval", "eigvec", "rqa"});

  SUBCASE("rerun reuses the local stage and reproduces metrics") {
    const std::string before = slurp(run / "classify" / "metrics.json");
    const auto again = run_pipeline(config);
    CHECK(again.local_stage_cached);
    CHECK(slurp(run / "classify" / "metrics.json") == before);

    auto fresh = config;
    fresh.out = dir / "run2";
    fresh.jobs = 1;
    run_pipeline(fresh);
    CHECK(slurp(fresh.out / "classify" / "metrics.json") == before);
    CHECK(slurp(fresh.out / "rqa" / "features.csv") == slurp(run / "rqa" / "features.csv"));
  }
  SUBCASE("changed local settings invalidate the cache") {
    auto changed = config;
    changed.rr = 0.2;
    CHECK_FALSE(run_pipeline(changed).local_stage_cached);
  }
  SUBCASE("report") {
    const std::string text = report(run);
    CHECK(text.find("default_mode") != std::string::npos);
    CHECK(text.find("cerebellum") != std::string::npos);
    CHECK(text.find("Fraction of subj.") != std::string::npos);
    const std::string csv = report(run, ReportFormat::csv);
    CHECK(csv.rfind("features,network,precision,recall,f1,accuracy\n", 0) == 0);
    CHECK_ERROR_CODE(report(dir / "nothing"), ErrorCode::IncompleteRun);
  }
  SUBCASE("frequency file columns") {
    std::ifstream in(run / "graph" / "frequency_cerebellum.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "class,ROI no.,Dosenbach ROI,Fraction of subj.,count,class_size");
  }
}

TEST_CASE("stage failures carry context") {
  TempDir dir;
  auto config = small_run(dir);
  fs::remove(dir / "data" / "sub-004" / "cerebellum.csv");
  try {
    run_pipeline(config);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingNetworkFile);
    CHECK(std::string(e.what()).find("sub-004") != std::string::npos);
  }
}

TEST_CASE("command line") {
  TempDir dir;
  const fs::path err = dir / "stderr.txt";
  const std::string data = (dir / "data").string();
  REQUIRE(run_cli("synth --kind two_class_cohort --subjects 5 --n 34 --N 60 --seed 2 --out " + data, err) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.csv"));

  CHECK(run_cli("validate --data " + data, err) == 0);
  CHECK(run_cli("run --data " + data + " --out " + (dir / "run").string() +
                    " --only network=default_mode --features eigvec,eigval --folds 5 --trees 11",
                err) == 0);
  CHECK(fs::exists(dir / "run" / "classify" / "eigvec_default_mode.json"));
  CHECK_FALSE(fs::exists(dir / "run" / "classify" / "eigvec_occipital.json"));
  CHECK_FALSE(fs::exists(dir / "run" / "rqa"));
  CHECK(run_cli("report " + (dir / "run").string() + " --format csv", err) == 0);

  CHECK(run_cli("report " + (dir / "missing").string(), err) != 0);
  const auto j = nlohmann::json::parse(slurp(err));
  CHECK(j["error"] == "IncompleteRun");

  CHECK(run_cli("synth --n 30 --out " + (dir / "x").string(), err) != 0);
  CHECK(nlohmann::json::parse(slurp(err))["error"] == "InvalidSpec");

  const std::string series = (dir / "sine.csv").string();
  REQUIRE(run_cli("synth --kind sine --N 200 --out " + series, err) == 0);
  CHECK(run_cli("embed --input " + series + " --dmax 6 --out " + (dir / "emb").string(), err) == 0);
  CHECK(slurp(dir / "emb" / "cao.csv").rfind("d,e1,e2\n", 0) == 0);
  CHECK(run_cli("rp-render --input " + series + " --size 64 --out " + (dir / "rp.pgm").string(), err) == 0);
  CHECK(slurp(dir / "rp.pgm").rfind("P5\n64 64\n255\n", 0) == 0);
  CHECK(run_cli("rqa --input " + series + " --out " + (dir / "rqa.csv").string(), err) == 0);
  CHECK(slurp(dir / "rqa.csv").rfind("subject,network,roi,rr,det,lmean,lmax,lam,tt,entr\n", 0) == 0);
  CHECK(run_cli("graph --data " + data + " --only network=cerebellum --out " + (dir / "g").string(), err) == 0);
  CHECK(run_cli("classify --input " + (dir / "g" / "graph" / "features.csv").string() +
                    " --features eigval --network cerebellum --folds 5 --trees 5",
                err) == 0);
  CHECK(run_cli("frobnicate", err) != 0);
}
