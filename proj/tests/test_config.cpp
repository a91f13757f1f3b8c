#include <gtest/gtest.h>

#include "entrokeys/config.hpp"

using namespace entrokeys;

TEST(Config, DumpThenReloadIsIdentity) {
  RunConfig c;
  c.discovery.weights.kappa = 0.123456789;
  c.discovery.num_keypoints = 7;
  c.discovery.seed = 18446744073709551615ull;
  c.discovery.overlap_form = OverlapForm::kLiteral;
  c.discovery.movement_units = MovementUnits::kPixel;
  const std::string text = dump_config(c);
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.discovery.weights.kappa, 0.123456789);
  EXPECT_EQ(back.discovery.seed, 18446744073709551615ull);
}

TEST(Config, EveryKeyDumped) {
  const std::string text = dump_config(RunConfig{});
  for (const char* k : {"lambda_me", "lambda_mce", "lambda_it", "lambda_s", "lambda_o", "kappa", "m_d", "beta",
                        "sigma_g", "tau", "eta", "region_size", "bandwidth", "num_keypoints", "iterations", "seed"}) {
    EXPECT_NE(text.find(std::string(k) + " = "), std::string::npos) << k;
  }
}

TEST(Config, CommentsAndBlankLines) {
  RunConfig c;
  apply_config_text(c, "# weights\n\nlambda_s = 5   # halve\n  kappa=0.5\n");
  EXPECT_EQ(c.discovery.weights.lambda_s, 5.0);
  EXPECT_EQ(c.discovery.weights.kappa, 0.5);
}

TEST(Config, ErrorsCarryLineNumbers) {
  RunConfig c;
  try {
    apply_config_text(c, "kappa = 0.5\nbogus = 1\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(apply_config_text(c, "kappa 0.5\n"), ValidationError);
  EXPECT_THROW(apply_config_text(c, "num_keypoints = 2.5\n"), ValidationError);
  EXPECT_THROW(apply_config_text(c, "tau = abc\n"), ValidationError);
  EXPECT_THROW(apply_config_text(c, "init = random\n"), ValidationError);
}

TEST(Config, WeightsFlag) {
  RunConfig c;
  apply_weights(c, "me=0, s=5,lambda_o=2,kappa=0.25");
  EXPECT_EQ(c.discovery.weights.lambda_me, 0.0);
  EXPECT_EQ(c.discovery.weights.lambda_s, 5.0);
  EXPECT_EQ(c.discovery.weights.lambda_o, 2.0);
  EXPECT_EQ(c.discovery.weights.kappa, 0.25);
  EXPECT_THROW(apply_weights(c, "me=-1"), ValidationError);
  EXPECT_THROW(apply_weights(c, "foo=1"), ValidationError);
  EXPECT_THROW(apply_weights(c, "me"), ValidationError);
}

TEST(Config, ValidateCatchesBadValues) {
  RunConfig c;
  apply_assignment(c, "region_size=4");
  EXPECT_THROW(validate(c), ValidationError);
  RunConfig d;
  apply_assignment(d, "momentum=1");
  EXPECT_THROW(validate(d), ValidationError);
  RunConfig e;
  EXPECT_NO_THROW(validate(e));
}
