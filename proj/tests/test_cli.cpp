#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zic/hash.hpp"
#include "zic/model_io.hpp"

namespace fs = std::filesystem;
using namespace zic;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("zic_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  int zic(const std::string& args) {
    const std::string cmd = std::string(ZIC_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    stderr_ = read_file(path("stderr.txt"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string train_config(long n_channels) const {
    return "n_channels=" + std::to_string(n_channels) +
           "\nepochs_per_channel=2\nbatch=64\nalpha_min=0.5\nalpha_max=1\nhidden=8\npower_hidden=4\nseed=11\n";
  }

  fs::path dir_;
  std::string stderr_;
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_F(CliTest, MissingConfigIsUsageError) {
  EXPECT_EQ(zic("train --config " + path("nope.cfg") + " --out " + path("m.model")), 2);
  EXPECT_NE(stderr_.find("nope.cfg"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandOrFlagIsUsageError) {
  EXPECT_EQ(zic("fly"), 2);
  EXPECT_EQ(zic("train --bogus 1"), 2);
}

TEST_F(CliTest, InvalidConfigFails) {
  write("bad.cfg", "batch=0\n");
  EXPECT_EQ(zic("train --config " + path("bad.cfg") + " --out " + path("m.model")), 1);
  EXPECT_NE(stderr_.find("batch"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("m.model")));
}

TEST_F(CliTest, DivergentTrainingFails) {
  write("t.cfg", train_config(2) + "lr=inf\n");
  EXPECT_NE(zic("train --config " + path("t.cfg") + " --out " + path("m.model")), 0);
  EXPECT_FALSE(fs::exists(path("m.model")));
}

TEST_F(CliTest, UntrainedModelIsWrittenWithManifest) {
  write("t.cfg", train_config(0));
  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --out " + path("m.model")), 0) << stderr_;
  EXPECT_NO_THROW(load_model(path("m.model")));
  const std::string manifest = read_file(path("m.model.manifest"));
  EXPECT_EQ(manifest.rfind("ZICMANIFEST 1\n", 0), 0u);
  EXPECT_NE(manifest.find("command=train"), std::string::npos);
  EXPECT_NE(manifest.find("seed=11"), std::string::npos);
  EXPECT_NE(manifest.find("produced=" + git_blob_hash_of_file(path("m.model"))), std::string::npos);
  EXPECT_NE(manifest.find("consumed=" + git_blob_hash_of_file(path("t.cfg"))), std::string::npos);
  EXPECT_EQ(load_model(path("m.model")).info.manifest, "m.model.manifest");
}

TEST_F(CliTest, TrainingIsByteReproducible) {
  write("t.cfg", train_config(3));
  fs::create_directories(dir_ / "a");
  fs::create_directories(dir_ / "b");
  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --out " + path("a/m.model")), 0) << stderr_;
  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --out " + path("b/m.model")), 0) << stderr_;
  EXPECT_EQ(read_file(path("a/m.model")), read_file(path("b/m.model")));
  EXPECT_EQ(read_file(path("a/m.model.train.csv")), read_file(path("b/m.model.train.csv")));
  EXPECT_EQ(lines_of(read_file(path("a/m.model.train.csv"))).size(), 4u);

  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --seed 12 --out " + path("c.model")), 0);
  EXPECT_NE(read_file(path("c.model")), read_file(path("a/m.model")));
}

TEST_F(CliTest, BaselineEvalRowsAndReproducibility) {
  write("e.cfg", "snr_db=10\nalpha=0,0.5,1\nn_channel_draws=2\nn_symbols_per_point=4000\nseed=3\n");
  ASSERT_EQ(zic("eval --config " + path("e.cfg") + " --scheme baseline1,baseline2 --out " + path("a.csv")), 0)
      << stderr_;
  ASSERT_EQ(zic("eval --config " + path("e.cfg") + " --scheme baseline1,baseline2 --threads 2 --out " +
                path("b.csv")),
            0);
  const std::string a = read_file(path("a.csv"));
  EXPECT_EQ(a, read_file(path("b.csv")));
  const auto rows = lines_of(a);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "scheme,snr_db,alpha,ber1,ber2,ber_worst,stderr,n_bits");
  EXPECT_EQ(rows[1].rfind("baseline1,10,0,", 0), 0u);
  EXPECT_EQ(rows[4].rfind("baseline2,10,0,", 0), 0u);
  EXPECT_EQ(a.find('\r'), std::string::npos);
  EXPECT_TRUE(fs::exists(path("a.csv.manifest")));
}

TEST_F(CliTest, DaeEvalNamesTheMissingInterval) {
  write("t.cfg", train_config(0));
  fs::create_directories(dir_ / "models");
  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --out " + path("models/m.model")), 0);
  write("e.cfg", "snr_db=10\nalpha=0.75,1.25\nn_channel_draws=1\nn_symbols_per_point=1000\n");
  EXPECT_EQ(zic("eval --config " + path("e.cfg") + " --scheme dae --model-dir " + path("models") + " --out " +
                path("r.csv")),
            1);
  EXPECT_NE(stderr_.find("[1, 1.5)"), std::string::npos) << stderr_;
  EXPECT_FALSE(fs::exists(path("r.csv")));

  write("ok.cfg", "snr_db=10\nalpha=0.75\nn_channel_draws=1\nn_symbols_per_point=1000\n");
  EXPECT_EQ(zic("eval --config " + path("ok.cfg") + " --scheme dae --model-dir " + path("models") + " --out " +
                path("r.csv")),
            0)
      << stderr_;
  EXPECT_EQ(lines_of(read_file(path("r.csv"))).size(), 2u);
}

TEST_F(CliTest, ExportConstellation) {
  write("t.cfg", train_config(3));
  ASSERT_EQ(zic("train --config " + path("t.cfg") + " --out " + path("m.model")), 0);
  ASSERT_EQ(zic("export-constellation --model " + path("m.model") + " --alpha 0.75 --out " + path("c.csv")), 0)
      << stderr_;
  const auto rows = lines_of(read_file(path("c.csv")));
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "user,bits,re,im");

  LoadedModel loaded = load_model(path("m.model"));
  const auto [c1, c2] = encode_constellation(loaded.model, std::sqrt(0.75));
  double power[2] = {0.0, 0.0};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string user, bits, re, im;
    std::getline(in, user, ',');
    std::getline(in, bits, ',');
    std::getline(in, re, ',');
    std::getline(in, im, ',');
    const double x = std::stod(re), y = std::stod(im);
    power[user == "2"] += (x * x + y * y) / 4.0;
  }
  EXPECT_NEAR(power[0], c1.avg_power, 1e-9);
  EXPECT_NEAR(power[1], c2.avg_power, 1e-9);

  EXPECT_EQ(zic("export-constellation --model " + path("m.model") + " --alpha 1.5 --out " + path("x.csv")), 1);
  EXPECT_NE(stderr_.find("outside"), std::string::npos);
}

TEST_F(CliTest, SelftestPasses) {
  EXPECT_EQ(zic("selftest"), 0) << stderr_;
  const std::string out = read_file(path("stdout.txt"));
  EXPECT_EQ(out.find("FAIL"), std::string::npos) << out;
  EXPECT_NE(out.find("PASS"), std::string::npos);
}
