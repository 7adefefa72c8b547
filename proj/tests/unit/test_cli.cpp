#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "crossgrasp/data.hpp"
#include "crossgrasp/synth.hpp"
#include "crossgrasp/train.hpp"
#include "support.hpp"

using namespace crossgrasp;
using nlohmann::json;
using testing_support::fixture;
using testing_support::read_text;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "crossgrasp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "crossgrasp_cli" / (std::string(info->test_suite_name()) + "_" + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json read_json(const fs::path& p) { return json::parse(read_text(p)); }

// Two-finger fixture hand, `count` synthetic grasps.
fs::path small_dataset(const fs::path& dir, int count) {
  Dataset data;
  data.hands.emplace("duo", HandEntry{fixture("two_finger.urdf").string(), load_urdf(fixture("two_finger.urdf"))});
  DataRng rng(4);
  SynthConfig sc;
  sc.points = 96;
  data.samples = synth_grasps(data.hand("duo"), "duo", random_objects(count, rng), count, sc);
  write_dataset(dir / "data.jsonl", data);
  return dir / "data.jsonl";
}

}  // namespace

TEST(Tokenize, FixtureAndIdempotence) {
  const fs::path dir = workdir();
  const CliResult a = invoke({"tokenize", fixture("three_finger.urdf").string(), "-o", (dir / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  const json tokens = read_json(dir / "a" / "tokens.json");
  EXPECT_EQ(tokens["M"], 12);
  int rho = 0;
  for (const auto& r : tokens["rho"]) rho += r.get<bool>() ? 1 : 0;
  EXPECT_EQ(rho, 9);
  EXPECT_TRUE(fs::exists(dir / "a" / "resolved_config.toml"));
  ASSERT_EQ(invoke({"tokenize", fixture("three_finger.urdf").string(), "-o", (dir / "b").string()}).code, 0);
  EXPECT_EQ(read_text(dir / "a" / "tokens.json"), read_text(dir / "b" / "tokens.json"));
}

TEST(Tokenize, MalformedIsAnInputError) {
  const fs::path dir = workdir();
  const CliResult r = invoke({"tokenize", fixture("malformed.urdf").string(), "-o", dir.string()});
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_NE(r.err.find("MalformedDocument"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, ParseErrorsAndHelp) {
  EXPECT_EQ(invoke({"tokenize"}).code, cli::kInputError);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kInputError);
  EXPECT_EQ(invoke({}).code, cli::kInputError);
  const CliResult help = invoke({"train", "--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("--loss"), std::string::npos);
  EXPECT_NE(help.out.find("[kal]"), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const fs::path dir = workdir();
  std::ofstream(dir / "cfg.toml") << "seed=5\n[kal-weights]\nq=[0.3,0.1]\nlambda=[1,1,1,0,0,0]\n";
  const CliResult r = invoke({"--config", (dir / "cfg.toml").string(), "kal-weights", fixture("planar_finger.urdf").string(), "--q",
                     "0.0,0.0", "-o", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = read_json(dir / "kal_weights.json");
  EXPECT_EQ(doc["q"], json::array({0.0, 0.0}));
  EXPECT_EQ(doc["lambda"], json::array({1.0, 1.0, 1.0, 0.0, 0.0, 0.0}));
  const std::string snap = read_text(dir / "resolved_config.toml");
  EXPECT_NE(snap.find("seed=5"), std::string::npos);
  EXPECT_NE(snap.find("[kal-weights]"), std::string::npos);
  // the snapshot replays to the same output
  const CliResult again = invoke({"--config", (dir / "resolved_config.toml").string(), "kal-weights", "-o", (dir / "replay").string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(read_text(dir / "kal_weights.json"), read_text(dir / "replay" / "kal_weights.json"));
}

TEST(KalWeights, MeanOneAndDatasetTable) {
  const fs::path dir = workdir();
  ASSERT_EQ(invoke({"kal-weights", fixture("three_finger.urdf").string(), "-o", dir.string()}).code, 0);
  const auto w = read_json(dir / "kal_weights.json")["weights"][0].get<std::vector<double>>();
  ASSERT_EQ(w.size(), 9u);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0) / 9.0, 1.0, 1e-9);

  const fs::path data = small_dataset(dir, 3);
  ASSERT_EQ(invoke({"kal-weights", "--dataset", data.string(), "-o", (dir / "t").string()}).code, 0);
  EXPECT_EQ(read_json(dir / "t" / "kal_weights.json")["weights"].size(), 3u);
  EXPECT_EQ(invoke({"kal-weights", fixture("planar_finger.urdf").string(), "--q", "1,2,3", "-o", dir.string()}).code,
            cli::kInputError);
}

TEST(Eigengrasps, RankOneDataAlignsWithGenerator) {
  const fs::path dir = workdir();
  Dataset data;
  data.hands.emplace("duo", HandEntry{fixture("two_finger.urdf").string(), load_urdf(fixture("two_finger.urdf"))});
  const Eigen::Vector4d v = Eigen::Vector4d(0.5, 0.3, -0.2, 0.1).normalized();
  for (int i = 0; i < 12; ++i) {
    GraspSample s;
    s.hand_id = "duo";
    s.object_id = "o";
    s.cloud = Cloud::Random(8, 3) * 0.02;
    s.q = (0.1 * (i - 5.5)) * v;
    data.samples.push_back(s);
  }
  write_dataset(dir / "rank1.jsonl", data);
  ASSERT_EQ(invoke({"eigengrasps", (dir / "rank1.jsonl").string(), "-o", (dir / "a").string()}).code, 0);
  const json doc = read_json(dir / "a" / "eigengrasps.json");
  EXPECT_EQ(doc["K"], 9);
  EXPECT_EQ(doc["d"], 4);
  const auto e1 = doc["E"][0].get<std::vector<double>>();
  EXPECT_NEAR(std::abs(Eigen::Map<const Eigen::Vector4d>(e1.data()).dot(v)), 1.0, 1e-9);
  ASSERT_EQ(invoke({"eigengrasps", (dir / "rank1.jsonl").string(), "-o", (dir / "b").string()}).code, 0);
  EXPECT_EQ(read_text(dir / "a" / "eigengrasps.json"), read_text(dir / "b" / "eigengrasps.json"));
  EXPECT_EQ(invoke({"eigengrasps", (dir / "rank1.jsonl").string(), "--hand", "nope", "-o", dir.string()}).code,
            cli::kInputError);
}

TEST(Synth, ThreeByThreeWithTwoHundredGrasps) {
  const fs::path dir = workdir();
  const CliResult r = invoke({"--seed", "1", "synth", "--grasps", "200", "--objects", "10", "--points", "128", "-o", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset data = load_dataset(dir / "grasps.jsonl");
  EXPECT_EQ(data.samples.size(), 200u);
  EXPECT_EQ(data.hand("synth").dof(), 9);
  EXPECT_EQ(load_urdf(dir / "hand.urdf"), data.hand("synth"));
}

TEST(Synth, SeedChangesData) {
  const fs::path dir = workdir();
  for (const char* seed : {"1", "2"})
    ASSERT_EQ(invoke({"--seed", seed, "synth", "--grasps", "3", "--objects", "2", "--points", "64", "-o", (dir / seed).string()}).code, 0);
  ASSERT_EQ(invoke({"--seed", "1", "synth", "--grasps", "3", "--objects", "2", "--points", "64", "-o", (dir / "1b").string()}).code, 0);
  EXPECT_EQ(read_text(dir / "1" / "grasps.jsonl"), read_text(dir / "1b" / "grasps.jsonl"));
  EXPECT_NE(read_text(dir / "1" / "grasps.jsonl"), read_text(dir / "2" / "grasps.jsonl"));
  EXPECT_EQ(invoke({"synth", "--fingers", "0", "-o", dir.string()}).code, cli::kInputError);
}

TEST(Pretrain, SeededRunsAgreeAndMissingDatasetFails) {
  const fs::path dir = workdir();
  const std::vector<std::string> args{"pretrain-object", "--primitives", "4", "--points", "64", "--preset", "tiny",
                                      "--epochs", "4", "--decoder-points", "16", "--decoder-hidden", "8"};
  auto with_out = [&](const std::string& sub) {
    auto a = args;
    a.insert(a.end(), {"-o", (dir / sub).string()});
    return a;
  };
  ASSERT_EQ(invoke(with_out("a")).code, 0);
  ASSERT_EQ(invoke(with_out("b")).code, 0);
  const auto ca = read_json(dir / "a" / "object_ae.json")["chamfer"].get<std::vector<double>>();
  const auto cb = read_json(dir / "b" / "object_ae.json")["chamfer"].get<std::vector<double>>();
  ASSERT_EQ(ca.size(), 4u);
  EXPECT_NEAR(ca.back(), cb.back(), 1e-9);
  EXPECT_EQ(invoke({"pretrain-object", (dir / "absent.jsonl").string(), "-o", dir.string()}).code, cli::kInputError);
}

TEST(Train, MseFlagResumeAndOutputs) {
  const fs::path dir = workdir();
  const fs::path data = small_dataset(dir, 4);
  const std::vector<std::string> base{"train", data.string(), "--model", "small", "--log-every", "0", "--no-augment"};
  auto run = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a);
  };
  ASSERT_EQ(run({"--epochs", "2", "--loss", "mse", "-o", (dir / "mse").string()}).code, 0);
  EXPECT_EQ(read_json(dir / "mse" / "checkpoint.json")["train_config"]["loss"], "mse");
  EXPECT_EQ(run({"--loss", "huber", "-o", (dir / "x").string()}).code, cli::kInputError);

  ASSERT_EQ(run({"--epochs", "4", "-o", (dir / "full").string()}).code, 0);
  ASSERT_EQ(run({"--epochs", "2", "-o", (dir / "half").string()}).code, 0);
  ASSERT_EQ(run({"--epochs", "4", "--resume", (dir / "half" / "checkpoint.json").string(), "-o", (dir / "resumed").string()}).code, 0);
  const std::string metrics = read_text(dir / "resumed" / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "epoch,L_eig,L_KAL,L_total,wall_time_s");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 5);
  const json a = read_json(dir / "full" / "checkpoint.json")["params"];
  const json b = read_json(dir / "resumed" / "checkpoint.json")["params"];
  EXPECT_EQ(a, b);
}

TEST(Train, DivergenceIsANumericFailure) {
  const fs::path dir = workdir();
  const fs::path data = small_dataset(dir, 2);
  const CliResult r = invoke({"train", data.string(), "--model", "small", "--epochs", "30", "--lr", "1e150", "--log-every", "0",
                     "--no-augment", "-o", dir.string()});
  EXPECT_EQ(r.code, cli::kNumericError) << r.err;
  EXPECT_NE(r.err.find("DegenerateInput"), std::string::npos);
}

TEST(PredictEvaluate, ShapesDumpAndDeterminism) {
  const fs::path dir = workdir();
  const fs::path data = small_dataset(dir, 5);
  ASSERT_EQ(invoke({"train", data.string(), "--model", "small", "--epochs", "1", "--log-every", "0", "-o", (dir / "m").string()}).code, 0);
  const fs::path ckpt = dir / "m" / "checkpoint.json";

  const Dataset loaded = load_dataset(data);
  write_xyz(dir / "cloud.xyz", loaded.samples[0].cloud);
  const WristPose& w = loaded.samples[0].wrist;
  std::ostringstream wrist;
  wrist << std::setprecision(17) << w.t[0] << ',' << w.t[1] << ',' << w.t[2];
  for (int i = 0; i < 6; ++i) wrist << ',' << w.r6[i];
  const CliResult p = invoke({"predict", "--checkpoint", ckpt.string(), "--urdf", fixture("two_finger.urdf").string(), "--cloud",
                     (dir / "cloud.xyz").string(), "--wrist", wrist.str(), "--geometry", "-o", (dir / "p").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  const json grasp = read_json(dir / "p" / "grasp.json");
  EXPECT_EQ(grasp["q"].size(), 4u);
  EXPECT_GE(grasp["wall_time_s"].get<double>(), 0.0);
  const json geo = read_json(dir / "p" / "geometry.json");
  EXPECT_EQ(geo["primitives"].size(), load_urdf(fixture("two_finger.urdf")).links().size());
  EXPECT_EQ(geo["primitives"][0]["pose"].size(), 4u);
  EXPECT_EQ(invoke({"predict", "--checkpoint", ckpt.string(), "--urdf", fixture("two_finger.urdf").string(), "--cloud",
                 (dir / "cloud.xyz").string(), "--wrist", "0,0,0", "-o", (dir / "p").string()}).code,
            cli::kInputError);

  for (const char* sub : {"e1", "e2"}) {
    const CliResult e = invoke({"--seed", "3", "evaluate", ckpt.string(), data.string(), "-o", (dir / sub).string()});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_NE(e.out.find("proxy"), std::string::npos);
  }
  const std::string csv = read_text(dir / "e1" / "verdicts.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,stable,fc_margin,contact_count,penetration");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(csv, read_text(dir / "e2" / "verdicts.csv"));
  const json summary = read_json(dir / "e1" / "summary.json");
  for (const char* key : {"proxy_success_rate", "random_baseline_success_rate", "open_hand_baseline_success_rate", "disclaimer"})
    EXPECT_TRUE(summary.contains(key)) << key;
}
