#include <doctest.h>

#include "edca/timing.hpp"

using namespace edca;

TEST_CASE("ERP-OFDM frame airtime") {
  PhyParams phy;
  // 1030 byte MPDU at 54 Mb/s: 16 + 6 + 8240 bits over 216 bits/symbol -> 39 symbols
  CHECK(frame_duration_us(1030, 54, phy) == doctest::Approx(20 + 39 * 4 + 6));
  // 14 byte ACK at 6 Mb/s: 134 bits over 24 -> 6 symbols
  CHECK(frame_duration_us(14, 6, phy) == doctest::Approx(20 + 24 + 6));
  CHECK(aifs_us(2, phy) == doctest::Approx(28));
  CHECK(aifs_us(7, phy) == doctest::Approx(73));
}

TEST_CASE("exchange times") {
  PhyParams phy;
  const double ack = 50, tp = 182;
  const auto o = exchange_overhead(phy);
  CHECK(o.ack_us == doctest::Approx(ack));
  CHECK(o.ack_timeout_us == doctest::Approx(10 + ack + 9));
  CHECK(success_busy_us(tp, phy, AccessMode::basic) == doctest::Approx(tp + 1 + 10 + ack + 1));
  CHECK(collision_busy_us(tp, phy, AccessMode::basic) == doctest::Approx(tp + 10 + ack + 9));
  // RTS/CTS collisions cost the RTS plus the CTS timeout, whatever the payload
  CHECK(collision_busy_us(tp, phy, AccessMode::rts_cts) == collision_busy_us(2 * tp, phy, AccessMode::rts_cts));
  CHECK(success_busy_us(tp, phy, AccessMode::rts_cts) > success_busy_us(tp, phy, AccessMode::basic));
}
