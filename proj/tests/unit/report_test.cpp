#include <gtest/gtest.h>

#include "mpcprobe/report.hpp"
#include "mpcprobe/synthetic.hpp"
#include "test_support.hpp"

using namespace mpcprobe;

namespace {

EvalRecord rec(std::string id, Task t, Combination c, Scheme s, bool correct, std::int64_t deg, std::int64_t wavg) {
  EvalRecord r;
  r.dataset = "U3";
  r.instance_id = std::move(id);
  r.task = t;
  r.combination = c;
  r.scheme = s;
  r.correct = correct;
  r.gold = "[BENNY]";
  r.predicted = correct ? "[BENNY]" : "[CAM]";
  r.deg_u = deg;
  r.w_avg_o_rounded = wavg;
  r.w_avg_o_u = {wavg, 1};
  return r;
}

// Three instances, AR / CONV, with 2, 1 and 3 correct answers per scheme.
std::vector<EvalRecord> fixture() {
  std::vector<EvalRecord> out;
  const bool pattern[3][3] = {{true, true, false}, {true, false, false}, {true, true, true}};
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < 3; ++i) {
      out.push_back(rec("c" + std::to_string(i), Task::kAR, Combination::kConv, kAllSchemes[s], pattern[s][i], 1 + 2 * i,
                        i == 2 ? 4 : 1));
    }
  }
  return out;
}

void check_golden(const std::string& rel, const std::string& actual) {
  const auto path = support::golden_dir() / rel;
  if (support::regenerate_goldens()) {
    write_file_atomic(path, actual);
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << "missing golden " << path << " (set MPC_PROBE_REGEN_GOLDENS=1)";
  EXPECT_EQ(read_file(path), actual) << "golden mismatch: " << rel;
}

}  // namespace

TEST(Report, CsvRowsFromHandCountedFixture) {
  const auto csv = emit_csv(build_report(fixture()));
  const auto lines = split(csv, '\n');
  ASSERT_GE(lines.size(), 5u);
  EXPECT_EQ(lines[0], "dataset,task,combination,scheme,metric,value,n");
  EXPECT_EQ(lines[1], "U3,AR,CONV,verbose,accuracy,0.667,3");
  EXPECT_EQ(lines[2], "U3,AR,CONV,medium,accuracy,0.333,3");
  EXPECT_EQ(lines[3], "U3,AR,CONV,concise,accuracy,1.000,3");
  // mean(0.667, 0.333, 1.000) = 0.6667; 1 - 0.6667 / 1.000 = 33.3%
  EXPECT_EQ(lines[4], "U3,AR,CONV,concise,gap_rel,33.3,3");
  EXPECT_NE(csv.find("U3,AR,CONV,verbose,acc@deg=3,1.000,1\n"), std::string::npos);
  EXPECT_NE(csv.find("# coverage dataset=U3 task=AR combination=CONV scheme=verbose key=deg present=1;3;5 empty=2;4\n"),
            std::string::npos);
  EXPECT_NE(csv.find("key=wavg present=1;4 empty=2;3\n"), std::string::npos);
}

TEST(Report, CsvGolden) { check_golden("report/fixture.csv", emit_csv(build_report(fixture()))); }

TEST(Report, IndependentOfRecordOrder) {
  auto recs = fixture();
  const auto a = emit_csv(build_report(recs));
  std::reverse(recs.begin(), recs.end());
  EXPECT_EQ(emit_csv(build_report(recs)), a);
  EXPECT_EQ(emit_json(build_report(recs)).dump(), emit_json(build_report(fixture())).dump());
}

TEST(Report, JsonCarriesExactAggregates) {
  auto j = emit_json(build_report(fixture()));
  ASSERT_EQ(j["accuracy"].size(), 3u);
  EXPECT_EQ(j["accuracy"][0]["correct"], 2);
  EXPECT_EQ(j["gaps"][0]["best_scheme"], "concise");
  EXPECT_EQ(j["gaps"][0]["gap_rel_percent"], "33.3");
  EXPECT_EQ(j["slices"]["deg"]["buckets"].size(), 9u);
}

TEST(Report, EmitWritesFilesAndPlots) {
  support::TempDir dir("report");
  emit_report(build_report(fixture()), dir.path() / "out", true);
  EXPECT_EQ(read_file(dir.path() / "out" / "report.csv"), emit_csv(build_report(fixture())));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "report.json"));
  std::size_t svgs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "out" / "plots")) {
    if (e.path().extension() == ".svg") {
      ++svgs;
      EXPECT_EQ(read_file(e.path()).rfind("<svg", 0), 0u);
    }
  }
  EXPECT_GT(svgs, 0u);
}

TEST(Report, EmptyRecordsGiveHeaderOnly) {
  EXPECT_EQ(emit_csv(build_report({})), "dataset,task,combination,scheme,metric,value,n\n");
}
