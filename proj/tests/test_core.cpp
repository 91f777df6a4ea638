#include <gtest/gtest.h>

#include <random>

#include "wban/core.hpp"

using namespace wban;

TEST(ValidateConfig, DefaultsAreValidAndSplitLoad) {
  Config c = default_config();
  c.network.n_nodes = 4;
  c.network.n_relays = 2;
  c.network.per_node_rate = {10, 10, 10, 10};
  const auto v = validate_config(c);
  EXPECT_DOUBLE_EQ(load_direct(v.network), 20.0);
  EXPECT_DOUBLE_EQ(load_forwarded(v.network), 20.0);
}

TEST(ValidateConfig, RelaysExceedingNodesNamesInvariant) {
  Config c = default_config();
  c.network.n_relays = 5;
  try {
    validate_config(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "n_relays exceeds n_nodes");
    EXPECT_EQ(e.code(), "CONFIG");
  }
}

TEST(ValidateConfig, CollectsEveryViolation) {
  Config c = default_config();
  c.network.payload_bits = 0;
  c.network.est_period = -1;
  c.mac.m_r = 0;
  try {
    validate_config(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.violations().size(), 3u);
  }
}

TEST(ValidateConfig, PowerOrderingEnforced) {
  Config c = default_config();
  c.rf_power.p_sleep = 1.0;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(ValidateConfig, PreambleMustBridgeSleep) {
  Config c = default_config();
  c.bcc_timing.t_pream = 1e-3;
  c.mac.r_s = 5e-3;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Defaults, Cc2420TimingValues) {
  const Config c = default_config();
  EXPECT_DOUBLE_EQ(c.bcc_timing.t_slot, 23e-6);
  EXPECT_DOUBLE_EQ(c.bcc_timing.t_data, 0.2e-3);
  EXPECT_DOUBLE_EQ(c.rf_timing.t_slot, 0.192e-3);
  EXPECT_DOUBLE_EQ(c.rf_timing.t_cca, 0.25e-3);
  EXPECT_DOUBLE_EQ(c.rf_timing.t_data, 1.12e-3);
  EXPECT_DOUBLE_EQ(c.rf_timing.t_ack, 0.352e-3);
  EXPECT_DOUBLE_EQ(c.rf_timing.t_att, 0.384e-3);
  EXPECT_DOUBLE_EQ(c.bcc_timing.t_att, 0.1e-3);
  EXPECT_DOUBLE_EQ(c.network.payload_bits, 800.0);
}

TEST(Defaults, DataTimeIsFlaggedAgainstPhyRate) {
  // 800 bits at 250 kb/s take 3.2 ms, the default data time is 1.12 ms.
  const auto v = validate_config(default_config());
  ASSERT_EQ(v.warnings.size(), 1u);
}

TEST(Defaults, PowerFromCurrents) {
  const auto p = cc2420_power(1.8);
  EXPECT_NEAR(p.p_tx, 19.7e-3 * 1.8, 1e-15);
  EXPECT_NEAR(p.p_rx, 17.4e-3 * 1.8, 1e-15);
  const auto b = bcc_default_power();
  EXPECT_DOUBLE_EQ(b.p_rx, 2.1e-3);
  EXPECT_DOUBLE_EQ(b.p_tx, 0.6e-3);
}

TEST(SnrFromRssi, DecibelSteps) {
  EXPECT_DOUBLE_EQ(snr_from_rssi(-95, -95), 1.0);
  EXPECT_NEAR(snr_from_rssi(-85, -95), 10.0, 1e-12);
  EXPECT_NEAR(snr_from_rssi(-75, -95), 100.0, 1e-10);
  EXPECT_GE(snr_from_rssi(-400, -95), 0.0);
}

TEST(LoadDecomposition, HoldsForEveryRelayCount) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> rate(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    NetworkConfig n;
    n.n_nodes = 1 + trial % 12;
    n.per_node_rate.clear();
    for (int i = 0; i < n.n_nodes; ++i) n.per_node_rate.push_back(rate(rng));
    for (int r = 1; r <= n.n_nodes; ++r) {
      n.n_relays = r;
      EXPECT_NEAR(load_direct(n) + load_forwarded(n), total_load(n), 1e-9);
    }
  }
}

TEST(Preamble, DerivedFromDutyCycleWhenUnset) {
  MacParams m;
  m.r_s = 10e-3;
  m.r_l = 2e-3;
  TimingParams t = bcc_default_timing();
  EXPECT_DOUBLE_EQ(preamble_duration(t, m), 12e-3);
  t.t_pream = 15e-3;
  EXPECT_DOUBLE_EQ(preamble_duration(t, m), 15e-3);
}
