#include <gtest/gtest.h>

#include <filesystem>

#include <unistd.h>

#include "properties.hpp"

using namespace midcs;

TEST(Properties, QuantizationContraction) {
  const auto o = props::quantization_contraction(1, 50000);
  EXPECT_TRUE(o.ok) << o.detail;
}

TEST(Properties, EntropySubadditivity) {
  const auto o = props::entropy_subadditivity(2);
  EXPECT_TRUE(o.ok) << o.detail;
  EXPECT_GT(o.cases, 100u);
}

TEST(Properties, EnergyScalingTranslation) {
  const auto o = props::energy_scaling_translation(3);
  EXPECT_TRUE(o.ok) << o.detail;
}

TEST(Properties, CorrelationMonotone) {
  const auto o = props::correlation_monotone(4);
  EXPECT_TRUE(o.ok) << o.detail;
}

TEST(Properties, DeltaMonotone) {
  const auto o = props::delta_monotone(5);
  EXPECT_TRUE(o.ok) << o.detail;
}

TEST(Properties, ManifestReplay) {
  const auto dir = std::filesystem::temp_directory_path() / ("midcs-props-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  const auto o = props::manifest_replay(dir, 6);
  EXPECT_TRUE(o.ok) << o.detail;
  EXPECT_EQ(o.cases, cli::commands().size());
}
