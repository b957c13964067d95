#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace inkgan;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Checkpoint sample_checkpoint() {
  std::mt19937_64 rng(1);
  Checkpoint c;
  c.metadata["name"] = "test";
  c.metadata["epoch"] = "3";
  c.tensors["b/weight"] = testing_support::random_tensor<float>({2, 3, 4, 4}, rng);
  c.tensors["a/bias"] = testing_support::random_tensor<float>({5}, rng);
  return c;
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  testing_support::TempDir dir("ckpt");
  const auto c = sample_checkpoint();
  save_checkpoint(dir.path() / "sub" / "a.gnm", c);
  const auto back = load_checkpoint(dir.path() / "sub" / "a.gnm");
  save_checkpoint(dir.path() / "b.gnm", back);
  EXPECT_EQ(slurp(dir.path() / "sub" / "a.gnm"), slurp(dir.path() / "b.gnm"));
  EXPECT_EQ(back.meta("name"), "test");
  const auto& t = back.tensor("b/weight");
  EXPECT_EQ(t.shape(), c.tensors.at("b/weight").shape());
  EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), c.tensors.at("b/weight").values().begin()));
  EXPECT_THROW(back.tensor("missing"), FormatError);
  EXPECT_THROW(back.meta("missing"), FormatError);
}

TEST(Checkpoint, StartsWithMagic) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  EXPECT_EQ(bytes.substr(0, 4), "GNM1");
}

TEST(Checkpoint, CorruptInputsAreFormatErrors) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError) << cut;
  }
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
  // encode always stamps the current version, so forge one by hand.
  auto forged = encode_checkpoint(sample_checkpoint());
  const auto pos = forged.find("format_version=1");
  ASSERT_NE(pos, std::string::npos);
  forged[pos + 15] = '7';
  EXPECT_THROW(decode_checkpoint(forged), FormatError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.gnm"), IoError);
}

TEST(Config, KeyValueRoundtripIsExact) {
  auto cfg = TrainConfig::desk();
  cfg.loss.lambda_tv = 1e-4;
  cfg.adam.alpha = 0.1 + 0.2;  // not representable in short decimal
  cfg.seed = 17;
  cfg.loss.objective = Objective::pix2pix_tv;
  const auto back = apply_key_values(TrainConfig{}, to_key_values(cfg));
  EXPECT_EQ(to_key_values(back), to_key_values(cfg));
  EXPECT_EQ(back.adam.alpha, cfg.adam.alpha);
  EXPECT_EQ(back.objective(), Objective::pix2pix_tv);
}

TEST(Config, DefaultsAreFullScale) {
  const TrainConfig c;
  EXPECT_EQ(c.loss.lambda_l1, 100.0);
  EXPECT_EQ(c.loss.lambda_tv, 1e-4);
  EXPECT_EQ(c.loss.lambda_cyc, 10.0);
  EXPECT_EQ(c.adam.alpha, 2e-4);
  EXPECT_EQ(c.adam.beta1, 0.5);
  EXPECT_EQ(c.epochs, 150U);
  EXPECT_EQ(c.image_size, 256U);
  EXPECT_EQ(c.unet_depth, 8U);
  EXPECT_NO_THROW(c.validate());
  EXPECT_NO_THROW(TrainConfig::desk().validate());
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
  EXPECT_THROW(apply_key_values(TrainConfig{}, {{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(apply_key_values(TrainConfig{}, {{"epochs", "many"}}), ConfigError);
  EXPECT_THROW(apply_key_values(TrainConfig{}, {{"lr", "1e-3x"}}), ConfigError);
  EXPECT_THROW(apply_key_values(TrainConfig{}, {{"objective", "wgan"}}), ConfigError);
  try {
    apply_key_values(TrainConfig{}, {{"batch_size", "-3"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
}

TEST(Config, ValidateCatchesInconsistentSizes) {
  auto c = TrainConfig::desk();
  c.image_size = 40;  // not divisible by 2^4
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::desk();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::desk();
  c.loss.lambda_l1 = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ParseFileWithCommentsAndOverrides) {
  testing_support::TempDir dir("cfg");
  std::ofstream(dir.path() / "c.txt") << "# run settings\n"
                                         "epochs = 5   # short\n"
                                         "\n"
                                         "  lambda_l1=50\n"
                                         "epochs = 7\n";
  const auto kv = read_key_values(dir.path() / "c.txt");
  EXPECT_EQ(kv.at("epochs"), "7");
  EXPECT_EQ(kv.at("lambda_l1"), "50");
  const auto cfg = apply_key_values(TrainConfig::desk(), kv);
  EXPECT_EQ(cfg.epochs, 7U);
  EXPECT_EQ(cfg.loss.lambda_l1, 50.0);
  EXPECT_EQ(cfg.image_size, 64U);
  EXPECT_THROW(parse_key_values("epochs 5\n"), ConfigError);
  EXPECT_THROW(read_key_values(dir.path() / "none.txt"), IoError);
}

TEST(Config, FormattedOutputParsesBack) {
  const auto kv = to_key_values(TrainConfig::desk());
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
}
