#include <cstdlib>

#include <gtest/gtest.h>

#include "patchcon/config.hpp"

using namespace patchcon;

TEST(Config, DefaultsAreTheReferenceSettings) {
    const TrainConfig c = parse_config("", false);
    EXPECT_EQ(c.batch_size, 8);
    EXPECT_EQ(c.lr_initial, 1e-3);
    EXPECT_EQ(c.lr_decay_factor, 0.1);
    EXPECT_EQ(c.lr_decay_every, 80);
    EXPECT_EQ(c.epochs, 240);
    EXPECT_EQ(c.grid_n, 16);
    EXPECT_EQ(c.contrastive.temperature, 0.05);
    EXPECT_EQ(c.contrastive.alpha, 0.02);
    EXPECT_EQ(c.contrastive.beta, 0.1);
    EXPECT_EQ(c.bank_capacity, 1024u);
    EXPECT_EQ(c.augmentation.output_size, 256);
    EXPECT_EQ(c.augmentation.horizontal_flip_prob, 0.5);
    EXPECT_EQ(c.augmentation.rotation_degrees.lo, -180.0);
    EXPECT_EQ(c.augmentation.rotation_degrees.hi, 180.0);
    EXPECT_EQ(c.augmentation.brightness_scale.lo, 0.5);
    EXPECT_EQ(c.augmentation.contrast_scale.hi, 1.5);
}

TEST(Config, LearningRateStepsDownEveryDecayInterval) {
    const TrainConfig c;
    EXPECT_DOUBLE_EQ(c.learning_rate(0), 1e-3);
    EXPECT_DOUBLE_EQ(c.learning_rate(79), 1e-3);
    EXPECT_DOUBLE_EQ(c.learning_rate(80), 1e-4);
    EXPECT_DOUBLE_EQ(c.learning_rate(159), 1e-4);
    EXPECT_DOUBLE_EQ(c.learning_rate(160), 1e-5);
    EXPECT_DOUBLE_EQ(c.learning_rate(239), 1e-5);
}

TEST(Config, ParsesValuesAndComments) {
    const auto c = parse_config("# tuned\ntrain.epochs = 12\nloss.alpha=0.5   # density\nloss.contrastive = false\n"
                                "train.seed = 18446744073709551615\n",
                                false);
    EXPECT_EQ(c.epochs, 12);
    EXPECT_EQ(c.contrastive.alpha, 0.5);
    EXPECT_FALSE(c.contrastive_enabled);
    EXPECT_EQ(c.seed, 18446744073709551615ull);
}

TEST(Config, TextFormRoundTrips) {
    auto c = parse_config("loss.temperature = 0.07\nmodel.base_width = 8\naug.rotation_min = -33.25\n", false);
    const auto text = to_text(c);
    EXPECT_EQ(to_text(parse_config(text, false)), text);
    EXPECT_NE(text.find("loss.temperature = 0.07\n"), std::string::npos);
}

TEST(Config, ReportsEveryProblemAtOnce) {
    try {
        parse_config("train.epochs = -1\nno.such.key = 3\nloss.alpha = abc\njunk line\n", false);
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        ASSERT_EQ(e.problems().size(), 4u);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("no.such.key"), std::string::npos);
        EXPECT_NE(msg.find("loss.alpha"), std::string::npos);
        EXPECT_NE(msg.find("train.epochs"), std::string::npos);
        EXPECT_NE(msg.find("line 4"), std::string::npos);
    }
}

TEST(Config, RejectsGridThatDoesNotDivideImageSize) {
    EXPECT_THROW(parse_config("patch.grid_n = 6\n", false), ConfigError);
    EXPECT_THROW(parse_config("model.depth = 9\n", false), ConfigError);
}

TEST(Config, EnvironmentOverridesFileValues) {
    ::setenv("PATCHCON_TRAIN_EPOCHS", "7", 1);
    ::setenv("PATCHCON_LOSS_BETA", "0.25", 1);
    const auto c = parse_config("train.epochs = 12\n");
    const auto ignored = parse_config("train.epochs = 12\n", false);
    ::unsetenv("PATCHCON_TRAIN_EPOCHS");
    ::unsetenv("PATCHCON_LOSS_BETA");
    EXPECT_EQ(c.epochs, 7);
    EXPECT_EQ(c.contrastive.beta, 0.25);
    EXPECT_EQ(ignored.epochs, 12);
}

TEST(Config, BadEnvironmentValueIsReported) {
    ::setenv("PATCHCON_TRAIN_BATCH_SIZE", "eight", 1);
    EXPECT_THROW(parse_config(""), ConfigError);
    ::unsetenv("PATCHCON_TRAIN_BATCH_SIZE");
}
