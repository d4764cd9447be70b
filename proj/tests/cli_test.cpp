#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include "cvsep/io.hpp"

namespace {

namespace fs = std::filesystem;
using cvsep::json;

const std::string kCli = CVSEP_CLI_PATH;
const std::string kRef = CVSEP_REFERENCE_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("cvsep_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, cvsep::read_text_file(out), cvsep::read_text_file(err)};
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, AnalyzeReportsPartialTransposeSpectrum) {
  const auto r = run("analyze '" + kRef + "/gamma_AC_prime.json' --ppt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.at("eigenvalues").size(), 4u);
  EXPECT_TRUE(j.at("separable").get<bool>());
  EXPECT_NEAR(j.at("eigenvalues")[0].get<double>(), 39.835, 0.01);
  EXPECT_NEAR(j.at("eigenvalues")[3].get<double>(), 9.3736, 0.01);
}

TEST_F(CliTest, AnalyzeDuanOnMeasuredOutput) {
  const auto r = run("analyze '" + kRef + "/gamma_AB_prime.json' --duan");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_GT(j.at("product").get<double>(), 1.0);
  EXPECT_GT(j.at("g_opt").get<double>(), 0.0);
}

TEST_F(CliTest, ValidationFailuresExitWithTwo) {
  cvsep::write_text_file(path("asym.json"), R"({"gamma": [[1, 0.5], [0, 1]]})");
  EXPECT_EQ(run("analyze '" + path("asym.json") + "'").code, 2);
  cvsep::write_text_file(path("odd.json"), R"({"gamma": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]})");
  EXPECT_EQ(run("analyze '" + path("odd.json") + "'").code, 2);
  EXPECT_EQ(run("dephase '" + kRef + "/gamma_AC_prime.json' --invert --sigma2 0.01").code, 2);
  EXPECT_EQ(run("run-protocol --loss 1.5").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  cvsep::write_text_file(path("empty.csv"), "");
  EXPECT_EQ(run("tomography --in '" + path("empty.csv") + "'").code, 2);
}

TEST_F(CliTest, MissingInputExitsWithOne) {
  EXPECT_EQ(run("analyze '" + path("missing.json") + "'").code, 1);
}

TEST_F(CliTest, NoSqueezingGivesUnitProductEverywhere) {
  const auto r = run("run-protocol --r 0 --out '" + path("zero") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto trace = cvsep::read_json_file(path("zero/trace.json"));
  for (const auto& p : trace.at("criterion_curve")) ASSERT_NEAR(p.at("product").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(path("zero/criterion_curve.csv")));
  EXPECT_TRUE(fs::exists(path("zero/manifest.json")));
}

TEST_F(CliTest, SimulationIsByteIdenticalAcrossThreadCounts) {
  const std::string args = "simulate --r 0.5 --outer 12 --inner 7 --seed 99 ";
  ASSERT_EQ(run(args + "--threads 1 --out '" + path("t1") + "'").code, 0);
  ASSERT_EQ(run(args + "--threads 3 --out '" + path("t3") + "'").code, 0);
  for (const char* f : {"samples.csv", "samples.json", "manifest.json"})
    EXPECT_EQ(cvsep::sha256_file(path("t1/") + f), cvsep::sha256_file(path("t3/") + f)) << f;
  ASSERT_EQ(run(args + "--grid --threads 2 --out '" + path("g2") + "'").code, 0);
  ASSERT_EQ(run(args + "--grid --threads 5 --out '" + path("g5") + "'").code, 0);
  EXPECT_EQ(cvsep::sha256_file(path("g2/samples.csv")), cvsep::sha256_file(path("g5/samples.csv")));
  EXPECT_NE(cvsep::sha256_file(path("t1/samples.csv")), cvsep::sha256_file(path("g2/samples.csv")));
}

TEST_F(CliTest, ReplayReproducesAndDetectsTampering) {
  ASSERT_EQ(run("simulate --r 0.4 --outer 6 --inner 5 --seed 3 --out '" + path("orig") + "'").code, 0);
  const auto ok = run("replay '" + path("orig/manifest.json") + "' --out '" + path("again") + "'");
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(cvsep::sha256_file(path("orig/samples.csv")), cvsep::sha256_file(path("again/samples.csv")));

  auto m = cvsep::read_json_file(path("orig/manifest.json"));
  m["outputs"][0]["sha256"] = std::string(64, '0');
  cvsep::write_json_file(path("tampered.json"), m);
  EXPECT_EQ(run("replay '" + path("tampered.json") + "' --out '" + path("again2") + "'").code, 3);
}

TEST_F(CliTest, SingleFileOutputsCarryReplayableManifests) {
  ASSERT_EQ(run("simulate --r 0.5 --outer 8 --inner 10 --seed 4 --out '" + path("s") + "'").code, 0);
  ASSERT_EQ(run("tomography --in '" + path("s/samples.csv") + "' --shuffled --seed 6 --out '" + path("t.json") + "'").code,
            0);
  ASSERT_TRUE(fs::exists(path("t.manifest.json")));
  const auto m = cvsep::RunManifest::from_json(cvsep::read_json_file(path("t.manifest.json")));
  EXPECT_EQ(m.command, "tomography");
  EXPECT_EQ(m.inputs.size(), 2u);
  EXPECT_EQ(m.outputs.front().second, cvsep::sha256_file(path("t.json")));
  const auto ok = run("replay '" + path("t.manifest.json") + "' --out '" + path("again") + "'");
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(cvsep::sha256_file(path("again/t.json")), cvsep::sha256_file(path("t.json")));

  ASSERT_EQ(run("report --out '" + path("report.json") + "'").code, 0);
  EXPECT_EQ(run("replay '" + path("report.manifest.json") + "' --out '" + path("r2") + "'").code, 0);

  // A changed input is refused rather than silently replayed.
  cvsep::write_text_file(path("s/samples.json"), cvsep::read_text_file(path("s/samples.json")) + " ");
  EXPECT_EQ(run("replay '" + path("t.manifest.json") + "' --out '" + path("again3") + "'").code, 2);
}

TEST_F(CliTest, SeedFromEnvironmentIsRecorded) {
  ASSERT_EQ(run("simulate --outer 3 --inner 2 --out '" + path("e") + "'").code, 0);
  const auto m = cvsep::RunManifest::from_json(cvsep::read_json_file(path("e/manifest.json")));
  EXPECT_NE(std::find(m.argv.begin(), m.argv.end(), "--seed"), m.argv.end());
}

TEST_F(CliTest, TomographyCorrectionRestoresEntanglement) {
  ASSERT_EQ(run("simulate --r 0.5 --variant a-posteriori --outer 20 --inner 50 --seed 5 --out '" + path("s") + "'").code,
            0);
  const auto plain = run("tomography --in '" + path("s/samples.csv") + "' --pair \"A',B'\"");
  ASSERT_EQ(plain.code, 0) << plain.err;
  const auto corrected = run("tomography --in '" + path("s/samples.csv") + "' --pair \"A',B'\" --correct");
  ASSERT_EQ(corrected.code, 0) << corrected.err;
  EXPECT_GT(json::parse(plain.out).at("product").get<double>(), 1.0);
  EXPECT_LT(json::parse(corrected.out).at("product").get<double>(), 1.0);
}

TEST_F(CliTest, ReportReproducesReferenceNumbers) {
  const auto r = run("report --reference '" + kRef + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).is_object());
}

}  // namespace
