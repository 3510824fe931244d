#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include "drfwi/cli.hpp"

using namespace drfwi;
using namespace drfwi::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("drfwi_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  nlohmann::json tiny(const std::string& mode = "s-denorm", int fwi_epochs = 2) const {
    return {
        {"paths", {{"output_dir", (dir_ / "runs").string()}}},
        {"model", {{"source", "marmousi_like"}, {"nz", 12}, {"nx", 20}, {"dz", 10.0}, {"dx", 10.0}}},
        {"initial", {{"kind", "smooth"}, {"sigma_z", 2.0}, {"sigma_x", 2.0}}},
        {"physics", {{"dt", 0.001}, {"nt", 101}, {"f_peak", 25.0}}},
        {"acquisition",
         {{"sources", {{"row", 1}, {"first", 5}, {"spacing", 10}, {"count", 2}}},
          {"receivers", {{"row", 1}}}}},
        {"network", {{"depth", 2}, {"width", 8}, {"seed", 3}}},
        {"training",
         {{"mode", mode}, {"pretrain_epochs", 3}, {"pretrain_lr", 1e-3}, {"fwi_epochs", fwi_epochs},
          {"fwi_lr", 1e-3}}},
    };
  }

  fs::path write_config(const nlohmann::json& j, const std::string& name = "run.json") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  int invoke(std::vector<std::string> args, std::string* out_text = nullptr,
             std::string* err_text = nullptr) const {
    args.insert(args.begin(), "drfwi");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
  }

  fs::path dir_;
};

}  // namespace

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Lists, ParseAndReject) {
  EXPECT_EQ(parse_size_list("250, 500,1000"), (std::vector<std::size_t>{250, 500, 1000}));
  EXPECT_EQ(parse_double_list("5e-5,1e-4"), (std::vector<double>{5e-5, 1e-4}));
  EXPECT_THROW(parse_size_list(""), InputError);
  EXPECT_THROW(parse_size_list("1,,2"), InputError);
  EXPECT_THROW(parse_size_list("10x"), InputError);
  EXPECT_THROW(parse_size_list("-3"), InputError);
  EXPECT_THROW(parse_double_list("0"), InputError);
  EXPECT_THROW(parse_double_list("abc"), InputError);
}

TEST_F(CliTest, DefaultsResolveToFullScaleAcquisition) {
  const RunConfig cfg = parse_config("{}", dir_);
  EXPECT_EQ(cfg.truth->nz(), 94u);
  EXPECT_EQ(cfg.truth->nx(), 288u);
  ASSERT_EQ(cfg.geom.sources.size(), 13u);
  EXPECT_EQ(cfg.geom.sources[1].col - cfg.geom.sources[0].col, 20u);  // 300 m at 15 m
  EXPECT_EQ(cfg.geom.sources[0].row, 1u);
  EXPECT_EQ(cfg.geom.receivers.size(), 288u);
  EXPECT_EQ(cfg.geom.nt, 1000u);
  EXPECT_EQ(cfg.wavelet.peak_frequency, 8.0);
  EXPECT_EQ(cfg.network.width, 128u);
  EXPECT_EQ(cfg.spectrum_columns, default_profile_columns(288));
}

TEST_F(CliTest, ErrorsNameTheKeyPath) {
  auto message = [&](const nlohmann::json& j) {
    try {
      parse_config(j.dump(), dir_);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  nlohmann::json j = tiny();
  j["training"]["fwi_epoch"] = 3;
  EXPECT_NE(message(j).find("training.fwi_epoch"), std::string::npos) << message(j);
  j = tiny();
  j["physics"]["dt"] = "fast";
  EXPECT_NE(message(j).find("physics.dt"), std::string::npos) << message(j);
  j = tiny();
  j["training"]["mode"] = "denorm";
  EXPECT_NE(message(j).find("training.mode"), std::string::npos) << message(j);
  j = tiny();
  j["acquisition"]["sources"]["row"] = 0;
  EXPECT_NE(message(j).find("acquisition.sources"), std::string::npos) << message(j);
  j = tiny();
  j["initial"] = {{"kind", "file"}, {"file", "missing.bin"}};
  EXPECT_NE(message(j).find("initial.file"), std::string::npos) << message(j);
}

TEST_F(CliTest, UnstableTimeStepIsRejectedBeforeDispatch) {
  nlohmann::json j = tiny();
  j["physics"]["dt"] = 0.01;
  std::string err;
  EXPECT_EQ(invoke({"forward", "--config", write_config(j).string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("cfl"), std::string::npos) << err;
  EXPECT_FALSE(fs::exists(dir_ / "runs"));
}

TEST_F(CliTest, OverridesReplaceValuesAndChangeTheRunDirectory) {
  const fs::path cfg = write_config(tiny());
  const std::string o1[] = {"training.fwi_epochs=7", "network.seed=11"};
  const RunConfig a = load_config(cfg, o1);
  EXPECT_EQ(a.training.fwi_epochs, 7u);
  EXPECT_EQ(a.network.seed, 11u);
  const RunConfig b = load_config(cfg);
  EXPECT_NE(run_directory(a, "invert"), run_directory(b, "invert"));
  EXPECT_EQ(run_directory(b, "invert"), run_directory(load_config(cfg), "invert"));
  const std::string bad[] = {"training.fwi_epochs"};
  EXPECT_THROW(load_config(cfg, bad), ConfigError);
}

TEST_F(CliTest, ForwardWritesOneFilePerSourceMatchingSimulate) {
  nlohmann::json j = tiny();
  j["acquisition"]["sources"]["count"] = 1;
  const RunConfig cfg = parse_config(j.dump(), dir_);
  const fs::path out = cmd_forward(cfg);
  std::size_t shots = 0;
  for (const auto& e : fs::directory_iterator(out)) shots += e.path().extension() == ".bin" && e.path().stem().string().rfind("shot_", 0) == 0;
  EXPECT_EQ(shots, 1u);
  const ShotRecord direct = simulate(*cfg.truth, cfg.geom, cfg.wavelet, 0, cfg.wave);
  const ShotRecord saved = load_shot(out / "shot_000.bin");
  ASSERT_EQ(saved.traces.size(), direct.traces.size());
  for (std::size_t k = 0; k < direct.traces.size(); ++k) {
    EXPECT_EQ(saved.traces[k], static_cast<double>(static_cast<float>(direct.traces[k])));
  }
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "config.json"));
}

TEST_F(CliTest, StaticDenormWithZeroEpochsReproducesTheInitialModelFile) {
  const RunConfig cfg = parse_config(tiny("s-denorm", 0).dump(), dir_);
  const fs::path out = cmd_invert(cfg);
  EXPECT_EQ(slurp(out / "final_model.bin"), slurp(out / "initial_model.bin"));
  EXPECT_EQ(count_lines(out / "curves.csv"), 1u);
}

TEST_F(CliTest, InvertWritesTheFullReport) {
  const RunConfig cfg = parse_config(tiny("pretrain", 2).dump(), dir_);
  const fs::path out = cmd_invert(cfg);
  for (const char* f : {"config.json", "final_model.bin", "final_model.json", "initial_model.bin",
                        "true_model.bin", "curves.csv", "timing.csv", "metrics.json",
                        "similarity.csv", "loss.svg", "error.svg"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::size_t checkpoints = 0;
  for (const auto& e : fs::directory_iterator(out / "checkpoints")) checkpoints += e.path().extension() == ".bin";
  EXPECT_EQ(checkpoints, 3u);
  EXPECT_EQ(count_lines(out / "curves.csv"), 1u + 3u + 2u);
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  EXPECT_EQ(metrics["mode"], "pretrain");
  EXPECT_TRUE(metrics["final"].contains("ssim"));
  EXPECT_EQ(slurp(out / "config.json"), cfg.resolved_json + "\n");
  EXPECT_NE(slurp(out / "loss.svg").find("<polyline"), std::string::npos);
}

TEST_F(CliTest, DenormRunsKeepTwoCheckpointsAndAdaptiveSavesTheTrainedInit) {
  const fs::path out = cmd_invert(parse_config(tiny("a-denorm", 2).dump(), dir_));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "INI.bin"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "final.bin"));
  EXPECT_FALSE(fs::exists(out / "checkpoints" / "stage1.bin"));
  EXPECT_TRUE(fs::exists(out / "final_init.bin"));
}

TEST_F(CliTest, InvertIsByteReproducible) {
  const fs::path cfg = write_config(tiny("a-denorm", 3));
  std::string path1, path2;
  ASSERT_EQ(invoke({"invert", "-q", "--config", cfg.string()}, &path1), 0);
  const std::string first = slurp(fs::path(path1.substr(0, path1.size() - 1)) / "final_model.bin");
  const std::string curves = slurp(fs::path(path1.substr(0, path1.size() - 1)) / "curves.csv");
  ASSERT_EQ(invoke({"invert", "-q", "--config", cfg.string()}, &path2), 0);
  EXPECT_EQ(path1, path2);
  const fs::path out = path2.substr(0, path2.size() - 1);
  EXPECT_EQ(slurp(out / "final_model.bin"), first);
  EXPECT_EQ(slurp(out / "curves.csv"), curves);
}

TEST_F(CliTest, InvertCanReadObservedDataFromForwardOutput) {
  const RunConfig base = parse_config(tiny("s-denorm", 2).dump(), dir_);
  const fs::path shots = cmd_forward(base);
  nlohmann::json j = tiny("s-denorm", 2);
  j["paths"]["observed_dir"] = shots.string();
  const fs::path out = cmd_invert(parse_config(j.dump(), dir_));
  const fs::path direct = cmd_invert(base);
  // Shot files hold float32, so losses agree to single precision.
  std::istringstream a(slurp(out / "curves.csv")), b(slurp(direct / "curves.csv"));
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  std::getline(a, la);
  std::getline(b, lb);
  const double loss_a = std::stod(la.substr(la.find(',', 4) + 1));
  const double loss_b = std::stod(lb.substr(lb.find(',', 4) + 1));
  EXPECT_NEAR(loss_a, loss_b, 1e-5 * loss_b);
}

TEST_F(CliTest, SweepEnumeratesTheGrid) {
  const fs::path cfg = write_config(tiny("pretrain", 1));
  std::string out;
  ASSERT_EQ(invoke({"sweep", "--config", cfg.string(), "--epochs", "2", "--lrs", "1e-3"}, &out), 0);
  fs::path d = out.substr(0, out.size() - 1);
  EXPECT_EQ(count_lines(d / "sweep.csv"), 2u);
  ASSERT_EQ(invoke({"sweep", "--config", cfg.string(), "--epochs", "2,4", "--lrs", "1e-3,1e-4"}, &out), 0);
  d = out.substr(0, out.size() - 1);
  const std::string csv = slurp(d / "sweep.csv");
  EXPECT_EQ(count_lines(d / "sweep.csv"), 5u);
  std::size_t marked = 0;
  for (std::size_t pos = 0; (pos = csv.find(",1,\"", pos)) != std::string::npos; ++pos) ++marked;
  EXPECT_EQ(marked, 1u);
  EXPECT_NE(slurp(d / "sweep.svg").find("<circle"), std::string::npos);
}

TEST_F(CliTest, MalformedSweepListIsAUsageError) {
  const fs::path cfg = write_config(tiny("pretrain", 1));
  std::string err;
  EXPECT_EQ(invoke({"sweep", "--config", cfg.string(), "--epochs", "2,,4", "--lrs", "1e-3"}, nullptr, &err), 2);
  EXPECT_NE(err.find("malformed"), std::string::npos);
  EXPECT_EQ(invoke({"sweep", "--config", cfg.string(), "--epochs", "2", "--lrs", "fast"}), 2);
}

TEST_F(CliTest, MetricsOfIdenticalModelsHaveZeroError) {
  const VelocityModel m = marmousi_like(12, 20, 10.0, 10.0);
  write_model(m, dir_ / "a.bin");
  write_model(m, dir_ / "b.bin");
  std::string out;
  ASSERT_EQ(invoke({"metrics", "--model", (dir_ / "a.bin").string(), "--reference", (dir_ / "b.bin").string()}, &out), 0);
  const auto j = nlohmann::json::parse(out);
  EXPECT_EQ(j["mse"].get<double>(), 0.0);
  EXPECT_EQ(j["mae"].get<double>(), 0.0);
  EXPECT_NEAR(j["ssim"].get<double>(), 1.0, 1e-12);
  const VelocityModel back = read_model(dir_ / "a.bin");
  EXPECT_EQ(back.dz(), 10.0);
  for (std::size_t k = 0; k < m.values().size(); ++k) {
    EXPECT_EQ(back.values()[k], static_cast<double>(static_cast<float>(m.values()[k])));
  }
}

TEST_F(CliTest, SpectrumOfConstantModelIsZero) {
  write_model(VelocityModel(Field2D(16, 20, 2.5), 10.0, 10.0), dir_ / "c.bin");
  std::string out;
  ASSERT_EQ(invoke({"spectrum", "--model", (dir_ / "c.bin").string(), "--out", (dir_ / "s").string()}, &out), 0);
  std::istringstream csv(slurp(dir_ / "s" / "spectrum.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "column,wavenumber,magnitude");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::stod(line.substr(line.rfind(',') + 1)), 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4u * (16 / 2 + 1));
  EXPECT_TRUE(fs::exists(dir_ / "s" / "spectrum.svg"));
}

TEST_F(CliTest, SpectrumFromConfigComparesBothTargets) {
  const fs::path cfg = write_config(tiny());
  std::string out;
  ASSERT_EQ(invoke({"spectrum", "--config", cfg.string(), "--columns", "4,15"}, &out), 0);
  const fs::path d = out.substr(0, out.size() - 1);
  const std::string csv = slurp(d / "spectrum.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "column,wavenumber,denorm_target,pretrain_target");
  EXPECT_EQ(count_lines(d / "spectrum.csv"), 1u + 2u * (12 / 2 + 1));
}

TEST_F(CliTest, ParamdiagOfIdenticalCheckpointsGivesUnitSimilarity) {
  SirenSpec spec;
  spec.depth = 2;
  spec.width = 6;
  spec.output_init = OutputInit::siren;
  const SirenNetwork net = init_network(spec);
  save_network(net, dir_ / "a.bin");
  save_network(net, dir_ / "b.bin");
  std::string out;
  ASSERT_EQ(invoke({"paramdiag", "--ini", (dir_ / "a.bin").string(), "--final", (dir_ / "b.bin").string(),
                    "--out", (dir_ / "p").string()}, &out), 0);
  const auto j = nlohmann::json::parse(slurp(dir_ / "p" / "similarity.json"));
  ASSERT_EQ(j.size(), 1u);
  std::size_t weights = 0;
  for (const auto& row : j[0]["rows"]) {
    const std::string layer = row["layer"];
    // Zero-initialized biases have no direction, so their CS is undefined.
    if (layer.find(".weight") != std::string::npos) {
      ASSERT_FALSE(row["cs"].is_null()) << layer;
      ++weights;
    }
    if (!row["cs"].is_null()) EXPECT_NEAR(row["cs"].get<double>(), 1.0, 1e-15) << layer;
    EXPECT_EQ(row["ed"].get<double>(), 0.0);
  }
  EXPECT_EQ(weights, 3u);
}

TEST_F(CliTest, ParamdiagReadsAnInvertDirectory) {
  const fs::path run = cmd_invert(parse_config(tiny("pretrain", 1).dump(), dir_));
  std::string out;
  ASSERT_EQ(invoke({"paramdiag", "--run", run.string()}, &out), 0);
  EXPECT_NE(out.find("Stage 1 vs Stage 2"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(invoke({}), 2);
  EXPECT_EQ(invoke({"invert"}), 2);
  EXPECT_EQ(invoke({"bogus"}), 2);
  EXPECT_EQ(invoke({"paramdiag"}), 2);
  EXPECT_EQ(invoke({"--help"}), 0);
}
