#include "lsm/spikes.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace lsm;

namespace {

SpikeRaster random_raster(std::size_t channels, TimeMs duration, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<SpikeEvent> ev;
  for (TimeMs t = 0; t < duration; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      if (coin(rng)) ev.push_back({c, t});
  return SpikeRaster(channels, duration, ev);
}

// Brute-force count of spikes in (k*step - window, k*step].
double window_rate(const SpikeRaster& r, std::size_t ch, TimeMs k, TimeMs window, TimeMs step) {
  int n = 0;
  for (const auto& e : r.events())
    if (e.channel == ch && e.time > k * step - window && e.time <= k * step) ++n;
  return n * 1000.0 / static_cast<double>(window);
}

}  // namespace

TEST_CASE("raster normalizes and validates events") {
  SpikeRaster r(3, 10, {{2, 5}, {0, 5}, {1, 1}, {0, 5}});
  REQUIRE(r.size() == 3);
  CHECK(r.events()[0] == SpikeEvent{1, 1});
  CHECK(r.events()[1] == SpikeEvent{0, 5});
  CHECK(r.events()[2] == SpikeEvent{2, 5});
  CHECK(r.counts() == std::vector<std::size_t>{1, 1, 1});
  CHECK_THROWS_AS(SpikeRaster(3, 10, {{3, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeRaster(3, 10, {{0, 10}}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeRaster(3, 10, {{0, -1}}), std::invalid_argument);
}

TEST_CASE("single spike gives 20 Hz over its 50 ms window") {
  SpikeRaster r(1, 200, {{0, 10}});
  const auto rates = extract_rates(r);
  REQUIRE(rates.n_steps() == 200);
  for (TimeMs k = 0; k < 200; ++k)
    CHECK(rates.values(0, k) == (k >= 10 && k <= 59 ? 20.0 : 0.0));
}

TEST_CASE("empty raster gives zero rates") {
  const auto rates = extract_rates(SpikeRaster(4, 100));
  CHECK(rates.values.rows() == 4);
  CHECK(rates.values.isZero(0.0));
}

TEST_CASE("periodic spikes reach 100 Hz after a full window") {
  std::vector<SpikeEvent> ev;
  for (TimeMs t = 0; t < 300; t += 10) ev.push_back({0, t});
  const SpikeRaster r(1, 300, ev);
  const auto rates = extract_rates(r);
  for (TimeMs k = 0; k < 300; ++k) {
    CHECK(rates.values(0, k) == window_rate(r, 0, k, 50, 1));
    if (k >= 50) CHECK(rates.values(0, k) == 100.0);
  }
}

TEST_CASE("rates match a brute-force window count") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = random_raster(6, 157, 0.05, seed);
    for (auto [window, step] : {std::pair<TimeMs, TimeMs>{50, 1}, {50, 5}, {20, 2}, {7, 7}}) {
      const auto rates = extract_rates(r, window, step);
      REQUIRE(rates.n_steps() == static_cast<std::size_t>((157 + step - 1) / step));
      for (std::size_t c = 0; c < 6; ++c)
        for (Eigen::Index k = 0; k < rates.values.cols(); ++k)
          CHECK(rates.values(static_cast<Eigen::Index>(c), k) == window_rate(r, c, k, window, step));
    }
  }
}

TEST_CASE("rate extraction rejects bad arguments") {
  CHECK_THROWS_AS(extract_rates(SpikeRaster(0, 10)), std::invalid_argument);
  CHECK_THROWS_AS(extract_rates(SpikeRaster(1, 10), 50, 3), std::invalid_argument);
  CHECK_THROWS_AS(extract_rates(SpikeRaster(1, 10), 0, 1), std::invalid_argument);
}

TEST_CASE("rates are bounded and conserve spike counts") {
  const auto r = random_raster(5, 400, 0.3, 11);
  const auto rates = extract_rates(r);
  CHECK(rates.values.minCoeff() >= 0.0);
  CHECK(rates.values.maxCoeff() <= 1000.0);
  // Every spike before duration - window is seen by exactly window columns.
  std::vector<SpikeEvent> early;
  for (const auto& e : r.events())
    if (e.time < 350) early.push_back(e);
  const SpikeRaster trimmed(5, 400, early);
  const auto tr = extract_rates(trimmed);
  const auto counts = trimmed.counts();
  for (std::size_t c = 0; c < 5; ++c)
    CHECK(tr.values.row(static_cast<Eigen::Index>(c)).sum() / 1000.0 ==
          doctest::Approx(static_cast<double>(counts[c])).epsilon(1e-12));
}

TEST_CASE("rates of disjoint channel sets stack") {
  const auto a = random_raster(3, 120, 0.1, 1);
  const auto b = random_raster(2, 120, 0.1, 2);
  std::vector<SpikeEvent> ev(a.events().begin(), a.events().end());
  for (auto e : b.events()) ev.push_back({e.channel + 3, e.time});
  const auto joint = extract_rates(SpikeRaster(5, 120, ev));
  CHECK(joint.values.topRows(3) == extract_rates(a).values);
  CHECK(joint.values.bottomRows(2) == extract_rates(b).values);
}

TEST_CASE("concat_rasters boundaries and round trip") {
  const SpikeRaster a(2, 200, {{0, 1}, {1, 199}});
  const SpikeRaster b(2, 200, {{1, 0}});
  {
    std::vector<SpikeRaster> v{a, b};
    auto [joined, bounds] = concat_rasters(v);
    CHECK(joined.duration() == 400);
    CHECK(bounds == std::vector<TimeMs>{0, 200});
    CHECK(joined.events()[2] == SpikeEvent{1, 200});
    const auto parts = split_raster(joined, bounds);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0] == a);
    CHECK(parts[1] == b);
  }
  {
    std::vector<SpikeRaster> v{a};
    auto [joined, bounds] = concat_rasters(v);
    CHECK(joined == a);
    CHECK(bounds == std::vector<TimeMs>{0});
  }
  {
    std::vector<SpikeRaster> v{SpikeRaster(1, 100), SpikeRaster(1, 200), SpikeRaster(1, 300)};
    auto [joined, bounds] = concat_rasters(v);
    CHECK(joined.duration() == 600);
    CHECK(bounds == std::vector<TimeMs>{0, 100, 300});
  }
  std::vector<SpikeRaster> bad{SpikeRaster(1, 10), SpikeRaster(2, 10)};
  CHECK_THROWS_AS(concat_rasters(bad), std::invalid_argument);
}

TEST_CASE("concat_rates joins blocks column-wise") {
  std::vector<RateMatrix> blocks{extract_rates(random_raster(3, 30, 0.2, 1)),
                                 extract_rates(random_raster(3, 20, 0.2, 2))};
  auto [joined, bounds] = concat_rates(blocks);
  CHECK(joined.values.cols() == 50);
  CHECK(bounds == std::vector<TimeMs>{0, 30});
  CHECK(joined.values.rightCols(20) == blocks[1].values);
  std::vector<RateMatrix> bad{blocks[0], extract_rates(random_raster(2, 5, 0.2, 3))};
  CHECK_THROWS_AS(concat_rates(bad), std::invalid_argument);
}

TEST_CASE("raster CSV round trip") {
  const auto r = random_raster(4, 90, 0.1, 5);
  std::stringstream s;
  write_raster_csv(r, s);
  CHECK(s.str().rfind("# channels=4 duration_ms=90\nchannel,time_ms\n", 0) == 0);
  CHECK(read_raster_csv(s) == r);
  std::stringstream bad("channel,time_ms\n0,1\n");
  CHECK_THROWS(read_raster_csv(bad));
}
