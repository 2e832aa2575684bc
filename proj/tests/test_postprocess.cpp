#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "sedkit/postprocess.hpp"
#include "sedkit/rng.hpp"

using namespace sedkit;

namespace {

// Straight-line reference: pad with zeros, sort each window, take middle.
std::vector<std::uint8_t> median_reference(const std::vector<std::uint8_t>& column, int window) {
  const int half = window / 2;
  std::vector<std::uint8_t> out(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    std::vector<std::uint8_t> win;
    for (int k = -half; k <= half; ++k) {
      const auto j = static_cast<std::int64_t>(i) + k;
      win.push_back(j >= 0 && j < static_cast<std::int64_t>(column.size()) ? column[static_cast<std::size_t>(j)]
                                                                           : 0);
    }
    std::sort(win.begin(), win.end());
    out[i] = win[static_cast<std::size_t>(half)];
  }
  return out;
}

std::vector<std::uint8_t> bits(std::initializer_list<int> v) {
  std::vector<std::uint8_t> out;
  for (int x : v) out.push_back(static_cast<std::uint8_t>(x));
  return out;
}

}  // namespace

TEST_CASE("binarize uses an inclusive threshold") {
  Tensor probs({3, 1});
  probs.data = {0.2, 0.5, 0.9};
  auto b = binarize_column(probs, 0, 0.5);
  CHECK(b == bits({0, 1, 1}));

  Tensor flat({4, 1});
  std::fill(flat.data.begin(), flat.data.end(), 0.5);
  CHECK(binarize_column(flat, 0, 0.5) == bits({1, 1, 1, 1}));
}

TEST_CASE("binarize positives shrink as the threshold rises") {
  Rng rng(1);
  Tensor probs({64, 1});
  for (double& v : probs.data) v = rng.uniform();
  const auto low = binarize_column(probs, 0, 0.3);
  const auto high = binarize_column(probs, 0, 0.6);
  for (std::size_t i = 0; i < low.size(); ++i)
    if (high[i]) CHECK(low[i]);
}

TEST_CASE("median filter removes isolated spikes and fills single gaps") {
  CHECK(median_filter(bits({0, 0, 0, 1, 0, 0, 0})) == bits({0, 0, 0, 0, 0, 0, 0}));
  CHECK(median_filter(bits({1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1})) == bits({1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}));
}

TEST_CASE("median filter keeps all-ones runs of length >= 4") {
  for (int len = 4; len <= 10; ++len) {
    std::vector<std::uint8_t> ones(static_cast<std::size_t>(len), 1);
    CHECK(median_filter(ones) == ones);
  }
}

TEST_CASE("median filter rejects even windows") {
  CHECK_THROWS_AS(median_filter(bits({1, 0, 1}), 4), ConfigError);
}

TEST_CASE("median filter equals the brute-force reference on random signals") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto len = 1 + rng.uniform_int(64);
    std::vector<std::uint8_t> column(static_cast<std::size_t>(len));
    for (auto& v : column) v = rng.bernoulli(0.5) ? 1 : 0;
    const int window = 1 + 2 * static_cast<int>(rng.uniform_int(5));
    CHECK(median_filter(column, window) == median_reference(column, window));
  }
}

TEST_CASE("frames_to_events: coarse grid keeps the two runs apart") {
  const double delta = 32.0 * 363.0 / 22050.0;  // 0.52680...
  auto events = frames_to_events(bits({0, 1, 1, 0, 1, 1, 0}), delta, "cls", 10.0);
  REQUIRE(events.size() == 2);
  CHECK(events[0].onset == Catch::Approx(0.527).margin(5e-4));
  CHECK(events[0].offset == Catch::Approx(1.580).margin(5e-4));
  CHECK(events[1].onset == Catch::Approx(2.107).margin(5e-4));
  CHECK(events[1].offset == Catch::Approx(3.161).margin(5e-4));
}

TEST_CASE("frames_to_events: fine grid merges the runs") {
  const double delta = 4.0 * 363.0 / 22050.0;  // 0.06585...
  auto events = frames_to_events(bits({0, 1, 1, 0, 1, 1, 0}), delta, "cls", 10.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].onset == Catch::Approx(0.0659).margin(5e-4));
  CHECK(events[0].offset == Catch::Approx(0.395).margin(5e-4));
}

TEST_CASE("frames_to_events: all zeros decode to nothing") {
  CHECK(frames_to_events(bits({0, 0, 0, 0}), 0.5, "cls", 10.0).empty());
}

TEST_CASE("frames_to_events: an exact 200 ms gap stays split") {
  // Runs [0,0.2] and [0.4,0.6]: the gap is exactly the tolerance.
  auto events = frames_to_events(bits({1, 0, 1}), 0.2, "cls", 10.0);
  REQUIRE(events.size() == 2);
}

TEST_CASE("frames_to_events output is disjoint with gaps >= tolerance") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto len = 1 + rng.uniform_int(80);
    std::vector<std::uint8_t> column(static_cast<std::size_t>(len));
    for (auto& v : column) v = rng.bernoulli(0.4) ? 1 : 0;
    const double delta = rng.uniform(0.02, 0.7);
    const double clip_len = static_cast<double>(len) * delta + rng.uniform(0.0, 1.0);
    auto events = frames_to_events(column, delta, "cls", clip_len);
    for (std::size_t i = 0; i < events.size(); ++i) {
      CHECK(events[i].onset < events[i].offset);
      CHECK(events[i].offset <= clip_len + 1e-12);
      if (i > 0) CHECK(events[i].onset - events[i - 1].offset >= 0.2 - 1e-12);
    }
  }
}

TEST_CASE("rasterize and decode round-trip events aligned to the grid") {
  // Events with durations that are multiples of delta, gaps >= tolerance.
  const double delta = 0.25;
  std::vector<std::uint8_t> column(40, 0);
  // [1.0, 2.0) -> frames 4..7, [5.0, 6.5) -> frames 20..25.
  for (int i = 4; i < 8; ++i) column[static_cast<std::size_t>(i)] = 1;
  for (int i = 20; i < 26; ++i) column[static_cast<std::size_t>(i)] = 1;
  auto events = frames_to_events(column, delta, "cls", 10.0, /*gap_tol=*/0.0);
  REQUIRE(events.size() == 2);
  CHECK(events[0].onset == Catch::Approx(1.0));
  CHECK(events[0].offset == Catch::Approx(2.0));
  CHECK(events[1].onset == Catch::Approx(5.0));
  CHECK(events[1].offset == Catch::Approx(6.5));
}

TEST_CASE("decode keys event lists by threshold and keeps classes independent") {
  PredictionMatrix pred;
  pred.clip_id = "clip0";
  pred.frame_duration = 0.5;
  pred.clip_length = 10.0;
  pred.probs = Tensor({20, 3});
  for (std::int64_t t = 0; t < 20; ++t) pred.probs(t, 0) = 0.9;  // class A only

  const std::vector<std::string> names = {"A", "B", "C"};
  auto decoded = decode(pred, names, {0.5}, 7, 0.2);
  REQUIRE(decoded.count(0.5) == 1);
  const auto& events = decoded.at(0.5);
  REQUIRE(events.size() == 1);
  CHECK(events[0].label == "A");
  CHECK(events[0].onset == Catch::Approx(0.0));
  CHECK(events[0].offset == Catch::Approx(10.0));
}

TEST_CASE("decode agrees with direct recomputation on random inputs") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    PredictionMatrix pred;
    pred.clip_id = "clip";
    pred.frame_duration = rng.uniform(0.05, 0.6);
    pred.probs = Tensor({4 + rng.uniform_int(60), 2});
    pred.clip_length = static_cast<double>(pred.probs.dim(0)) * pred.frame_duration;
    for (double& v : pred.probs.data) v = rng.uniform();

    const std::vector<std::string> names = {"x", "y"};
    const std::vector<double> taus = {0.25, 0.5, 0.75};
    auto decoded = decode(pred, names, taus);

    for (double tau : taus) {
      std::vector<TimedEvent> expected;
      for (std::size_t c = 0; c < names.size(); ++c) {
        std::vector<std::uint8_t> column(static_cast<std::size_t>(pred.probs.dim(0)));
        for (std::int64_t t = 0; t < pred.probs.dim(0); ++t)
          column[static_cast<std::size_t>(t)] = pred.probs(t, static_cast<std::int64_t>(c)) >= tau ? 1 : 0;
        auto filtered = median_reference(column, 7);
        auto evs = frames_to_events(filtered, pred.frame_duration, names[c], pred.clip_length);
        expected.insert(expected.end(), evs.begin(), evs.end());
      }
      sort_events(expected);
      const auto& got = decoded.at(tau);
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].label == expected[i].label);
        CHECK(got[i].onset == Catch::Approx(expected[i].onset));
        CHECK(got[i].offset == Catch::Approx(expected[i].offset));
      }
    }
  }
}
