#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nhp/geo_grid.hpp"

namespace nhp {

/// Raw event row prior to validation.
struct EventRecord {
  std::string id;
  long long series = 0;  // 0 = singleton
  GeoPoint location;
  double t = 0.0;  // days since 1970-01-01
  std::size_t row = 0;  // source row for rejection reports; 0 = position in input
};

/// Validated crime bound to a grid.
struct CrimeInstance {
  std::string id;
  int series = 0;
  GeoPoint location;
  double t = 0.0;
  CellIndex cell = 0;
  Vec2 position_m;  // projected location

  friend bool operator==(const CrimeInstance&, const CrimeInstance&) = default;
};

struct Rejection {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string reason;
};

/// Crimes ordered by (t, id), with a chronological index per series label.
class EventStore {
 public:
  EventStore() = default;

  /// Validates and binds records to the grid. Rejected rows are reported and
  /// skipped: duplicate id, negative series label, non-finite time, location
  /// outside the bbox.
  static EventStore from_records(const GeoGrid& grid, std::span<const EventRecord> records,
                                 std::vector<Rejection>* rejections = nullptr);

  /// Builds from already-validated crimes (re-sorted and re-indexed).
  static EventStore from_crimes(std::vector<CrimeInstance> crimes);

  const std::vector<CrimeInstance>& crimes() const noexcept { return crimes_; }
  std::size_t size() const noexcept { return crimes_.size(); }

  /// Series labels in increasing order; P = labels().size().
  std::vector<int> labels() const;
  std::size_t series_count() const noexcept { return series_.size(); }
  bool has_series(int p) const { return series_.count(p) != 0; }

  /// Chronological indices into crimes() for series p. Throws kNotFound.
  const std::vector<std::size_t>& series(int p) const;

  std::vector<std::size_t> singletons() const;

  /// Crimes with t0 <= t < t1, as a contiguous range of crimes().
  std::span<const CrimeInstance> window(double t0, double t1) const;

  friend bool operator==(const EventStore& a, const EventStore& b) { return a.crimes_ == b.crimes_; }

 private:
  std::vector<CrimeInstance> crimes_;
  std::map<int, std::vector<std::size_t>> series_;
};

struct IngestResult {
  EventStore store;
  std::vector<Rejection> rejections;
};

/// Events CSV with header `id,series,lat,lon,timestamp` (any column order).
/// Timestamps are ISO-8601 (`YYYY-MM-DD[THH:MM[:SS[.fff]]][Z]`) or fractional
/// days since 1970-01-01.
IngestResult ingest_events(std::istream& in, const GeoGrid& grid);
std::vector<EventRecord> read_events_csv(std::istream& in, std::vector<Rejection>* rejections);

/// Days since 1970-01-01 UTC. Throws kParse.
double parse_timestamp(std::string_view text);

void write_events_csv(std::ostream& out, std::span<const EventRecord> records);
void write_rejections_jsonl(std::ostream& out, std::span<const Rejection> rejections);

struct TestCase {
  int series = 0;
  CrimeInstance crime;
};

struct TrainTestSplit {
  EventStore train;
  std::vector<TestCase> tests;          // ordered by series label
  std::vector<int> excluded_series;     // series with a single crime
};

/// Holds out the chronologically last crime of every series with >= 2 crimes.
TrainTestSplit split_train_test(const EventStore& store);

/// Inverse of split_train_test.
EventStore merge_split(const EventStore& train, std::span<const TestCase> tests);

/// Crimes of series p strictly earlier than t, chronological.
std::vector<CrimeInstance> priors_before(const EventStore& store, int p, double t);

/// One day after the latest time. Throws kInvalidArgument when empty.
double prediction_time(std::span<const double> prior_times);
double prediction_time(std::span<const CrimeInstance> priors);

}  // namespace nhp
