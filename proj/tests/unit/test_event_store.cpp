#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "nhp/error.hpp"
#include "nhp/event_store.hpp"

using namespace nhp;

namespace {

GeoGrid grid() { return GeoGrid::build({0.0, 0.0}, {1.0, 1.0}, 10, 10); }

EventRecord rec(std::string id, long long series, double t, GeoPoint at = {0.5, 0.5}) {
  return {std::move(id), series, at, t, 0};
}

}  // namespace

TEST(Timestamp, IsoAndNumericForms) {
  EXPECT_EQ(parse_timestamp("1970-01-01"), 0.0);
  EXPECT_EQ(parse_timestamp("1970-01-02T00:00:00Z"), 1.0);
  EXPECT_EQ(parse_timestamp("2000-03-01"), 11017.0);
  EXPECT_DOUBLE_EQ(parse_timestamp("1970-01-01T12:00"), 0.5);
  EXPECT_DOUBLE_EQ(parse_timestamp("1970-01-01 06:00:00.0"), 0.25);
  EXPECT_EQ(parse_timestamp(" 123.5 "), 123.5);
}

TEST(Timestamp, MalformedIsParseError) {
  for (const char* bad : {"", "yesterday", "2021-02-30", "2021-13-01", "2021-01-01T25:00", "2021/01/01"}) {
    try {
      parse_timestamp(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kParse) << bad;
    }
  }
}

TEST(EventStore, SeriesIndexIsChronological) {
  const std::vector<EventRecord> r = {rec("a", 3, 10), rec("b", 3, 2), rec("c", 0, 5), rec("d", 1, 7),
                                      rec("e", 3, 6)};
  const EventStore s = EventStore::from_records(grid(), r);
  EXPECT_EQ(s.labels(), (std::vector<int>{1, 3}));
  EXPECT_EQ(s.series_count(), 2u);
  std::vector<std::string> ids;
  for (std::size_t i : s.series(3)) ids.push_back(s.crimes()[i].id);
  EXPECT_EQ(ids, (std::vector<std::string>{"b", "e", "a"}));
  ASSERT_EQ(s.singletons().size(), 1u);
  EXPECT_EQ(s.crimes()[s.singletons()[0]].id, "c");
  EXPECT_THROW(s.series(2), Error);
}

TEST(EventStore, RejectsBadRowsAndKeepsTheRest) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<EventRecord> r = {rec("a", 1, 1), rec("a", 1, 2), rec("b", -1, 3), rec("c", 0, nan),
                                      rec("d", 0, 4, {2.0, 0.5}), rec("", 0, 5),
                                      rec("e", 5'000'000'000LL, 6), rec("f", 2, 7)};
  std::vector<Rejection> rej;
  const EventStore s = EventStore::from_records(grid(), r, &rej);
  EXPECT_EQ(s.size(), 2u);
  std::vector<std::size_t> rows;
  for (const auto& x : rej) rows.push_back(x.row);
  EXPECT_EQ(rows, (std::vector<std::size_t>{2, 3, 4, 5, 6, 7}));
  EXPECT_NE(rej[0].reason.find("duplicate"), std::string::npos);
}

TEST(EventStore, WindowIsHalfOpen) {
  std::vector<EventRecord> r;
  for (int k = 0; k < 10; ++k) r.push_back(rec(fmt::format("x{}", k), 0, k));
  const EventStore s = EventStore::from_records(grid(), r);
  const auto w = s.window(3.0, 7.0);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w.front().t, 3.0);
  EXPECT_EQ(w.back().t, 6.0);
  EXPECT_TRUE(s.window(20.0, 30.0).empty());
}

TEST(EventStore, CsvReadReportsRowNumbers) {
  std::stringstream in(
      "timestamp,lat,lon,series,id\n"
      "1970-01-05,0.5,0.5,1,a\n"
      "oops,0.5,0.5,1,b\n"
      "3,0.5,0.5,x,c\n"
      "4,0.5\n"
      "5,9,9,0,d\n"
      "6,0.25,0.75,0,e\n");
  const IngestResult r = ingest_events(in, grid());
  EXPECT_EQ(r.store.size(), 2u);
  std::vector<std::size_t> rows;
  for (const auto& x : r.rejections) rows.push_back(x.row);
  EXPECT_EQ(rows, (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_EQ(r.store.crimes()[0].t, 4.0);
}

TEST(EventStore, CsvHeaderMustNameEveryColumn) {
  std::stringstream in("id,lat,lon,timestamp\n");
  EXPECT_THROW(read_events_csv(in, nullptr), Error);
}

TEST(EventStore, CsvRoundTrip) {
  const std::vector<EventRecord> r = {rec("a", 1, 1.25, {0.1, 0.2}), rec("b", 0, 3.5, {0.9, 0.3})};
  std::stringstream s;
  write_events_csv(s, r);
  const auto back = read_events_csv(s, nullptr);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, r[i].id);
    EXPECT_EQ(back[i].series, r[i].series);
    EXPECT_EQ(back[i].t, r[i].t);
    EXPECT_EQ(back[i].location, r[i].location);
  }
}

TEST(Split, HoldsOutLastCrimeOfEachSeries) {
  const std::vector<EventRecord> r = {rec("a1", 1, 1), rec("a2", 1, 4), rec("a3", 1, 2), rec("b1", 2, 5),
                                      rec("c1", 3, 1), rec("c2", 3, 9), rec("z", 0, 3)};
  const EventStore s = EventStore::from_records(grid(), r);
  const TrainTestSplit sp = split_train_test(s);
  ASSERT_EQ(sp.tests.size(), 2u);
  EXPECT_EQ(sp.tests[0].series, 1);
  EXPECT_EQ(sp.tests[0].crime.id, "a2");
  EXPECT_EQ(sp.tests[1].crime.id, "c2");
  EXPECT_EQ(sp.excluded_series, (std::vector<int>{2}));
  EXPECT_EQ(sp.train.size(), 5u);
  EXPECT_EQ(sp.train.series(1).size(), 2u);
}

TEST(Split, PropertyPartitionAndChronology) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> label(0, 12);
  std::uniform_real_distribution<double> when(0.0, 100.0), where(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EventRecord> r;
    const int n = 5 + trial * 3;
    for (int k = 0; k < n; ++k) {
      r.push_back(rec(fmt::format("e{}", k), label(rng), when(rng), {where(rng), where(rng)}));
    }
    const EventStore s = EventStore::from_records(grid(), r);
    const TrainTestSplit sp = split_train_test(s);

    // Every crime lands in exactly one side.
    EXPECT_EQ(sp.train.size() + sp.tests.size(), s.size());
    EXPECT_EQ(merge_split(sp.train, sp.tests), s);

    for (const TestCase& tc : sp.tests) {
      ASSERT_TRUE(sp.train.has_series(tc.series));
      for (std::size_t i : sp.train.series(tc.series)) {
        EXPECT_LE(sp.train.crimes()[i].t, tc.crime.t);
      }
    }
    for (int p : sp.excluded_series) EXPECT_EQ(s.series(p).size(), 1u);
    EXPECT_TRUE(std::is_sorted(sp.tests.begin(), sp.tests.end(),
                               [](auto& a, auto& b) { return a.series < b.series; }));
    EXPECT_EQ(sp.tests.size() + sp.excluded_series.size(), s.series_count());
  }
}

TEST(Priors, StrictlyEarlierAndPredictionTime) {
  const std::vector<EventRecord> r = {rec("a", 1, 1), rec("b", 1, 3), rec("c", 1, 3.5), rec("d", 2, 0)};
  const EventStore s = EventStore::from_records(grid(), r);
  const auto pri = priors_before(s, 1, 3.5);
  ASSERT_EQ(pri.size(), 2u);
  EXPECT_EQ(pri[1].id, "b");
  EXPECT_EQ(prediction_time(std::span<const CrimeInstance>(pri)), 4.0);
  const std::vector<double> times{2.0, 7.5, 1.0};
  EXPECT_EQ(prediction_time(times), 8.5);
  EXPECT_THROW(prediction_time(std::span<const double>()), Error);
}

TEST(Rejections, JsonLines) {
  std::stringstream s;
  const std::vector<Rejection> r = {{3, "bad"}};
  write_rejections_jsonl(s, r);
  EXPECT_EQ(s.str(), "{\"reason\":\"bad\",\"row\":3}\n");
}
