#include "nhp/event_store.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "csv_util.hpp"
#include "nhp/error.hpp"

namespace nhp {

namespace {

bool chrono_less(const CrimeInstance& a, const CrimeInstance& b) {
  return std::tie(a.t, a.id) < std::tie(b.t, b.id);
}

bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

}  // namespace

double parse_timestamp(std::string_view text) {
  text = csv::trim(text);
  double numeric = 0.0;
  if (csv::parse_double(text, numeric)) return numeric;

  const auto fail = [&] {
    return Error(ErrorKind::kParse, fmt::format("unparseable timestamp '{}'", text));
  };
  int y = 0, mo = 0, d = 0;
  if (text.size() < 10 || !parse_fixed_int(text, 0, 4, y) || text[4] != '-' ||
      !parse_fixed_int(text, 5, 2, mo) || text[7] != '-' || !parse_fixed_int(text, 8, 2, d)) {
    throw fail();
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw fail();
  double days = static_cast<double>(sys_days{ymd}.time_since_epoch().count());

  std::string_view rest = text.substr(10);
  if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
  if (rest.empty()) return days;
  if (rest.front() != 'T' && rest.front() != ' ') throw fail();
  rest.remove_prefix(1);
  int hh = 0, mm = 0;
  if (rest.size() < 5 || !parse_fixed_int(rest, 0, 2, hh) || rest[2] != ':' ||
      !parse_fixed_int(rest, 3, 2, mm) || hh > 23 || mm > 59) {
    throw fail();
  }
  double seconds = 0.0;
  if (rest.size() > 5) {
    if (rest[5] != ':' || !csv::parse_double(rest.substr(6), seconds) || seconds < 0.0 ||
        seconds >= 61.0 || rest.substr(6).front() == '-') {
      throw fail();
    }
  }
  days += (hh * 3600.0 + mm * 60.0 + seconds) / 86400.0;
  return days;
}

// ---------------------------------------------------------------------------

EventStore EventStore::from_crimes(std::vector<CrimeInstance> crimes) {
  EventStore store;
  store.crimes_ = std::move(crimes);
  std::sort(store.crimes_.begin(), store.crimes_.end(), chrono_less);
  for (std::size_t i = 0; i < store.crimes_.size(); ++i) {
    const int p = store.crimes_[i].series;
    if (p > 0) store.series_[p].push_back(i);
  }
  return store;
}

EventStore EventStore::from_records(const GeoGrid& grid, std::span<const EventRecord> records,
                                    std::vector<Rejection>* rejections) {
  std::vector<CrimeInstance> crimes;
  crimes.reserve(records.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EventRecord& rec = records[i];
    const std::size_t row = rec.row != 0 ? rec.row : i + 1;
    const auto reject = [&](std::string reason) {
      if (rejections != nullptr) rejections->push_back({row, std::move(reason)});
    };
    if (rec.id.empty()) {
      reject("empty id");
      continue;
    }
    if (rec.series < 0 || rec.series > INT_MAX) {
      reject(fmt::format("series label {} outside [0, {}]", rec.series, INT_MAX));
      continue;
    }
    if (!std::isfinite(rec.t)) {
      reject("non-finite timestamp");
      continue;
    }
    const auto cell = grid.try_locate(rec.location);
    if (!cell) {
      reject(fmt::format("location ({}, {}) outside region", rec.location.lat, rec.location.lon));
      continue;
    }
    if (!seen.insert(rec.id).second) {
      reject(fmt::format("duplicate id '{}'", rec.id));
      continue;
    }
    crimes.push_back({rec.id, static_cast<int>(rec.series), rec.location, rec.t, *cell,
                      grid.project(rec.location)});
  }
  return from_crimes(std::move(crimes));
}

std::vector<int> EventStore::labels() const {
  std::vector<int> out;
  out.reserve(series_.size());
  for (const auto& [p, idx] : series_) out.push_back(p);
  return out;
}

const std::vector<std::size_t>& EventStore::series(int p) const {
  const auto it = series_.find(p);
  if (it == series_.end()) throw Error(ErrorKind::kNotFound, fmt::format("unknown series {}", p));
  return it->second;
}

std::vector<std::size_t> EventStore::singletons() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < crimes_.size(); ++i) {
    if (crimes_[i].series == 0) out.push_back(i);
  }
  return out;
}

std::span<const CrimeInstance> EventStore::window(double t0, double t1) const {
  const auto lo = std::lower_bound(crimes_.begin(), crimes_.end(), t0,
                                   [](const CrimeInstance& c, double t) { return c.t < t; });
  const auto hi = std::lower_bound(lo, crimes_.end(), t1,
                                   [](const CrimeInstance& c, double t) { return c.t < t; });
  return {lo, hi};
}

// ---------------------------------------------------------------------------

std::vector<EventRecord> read_events_csv(std::istream& in, std::vector<Rejection>* rejections) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, "events CSV is empty");
  const auto header = csv::split_line(line);
  const auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (csv::trim(header[i]) == name) return i;
    }
    throw Error(ErrorKind::kParse, fmt::format("events CSV header lacks column '{}'", name));
  };
  const std::size_t c_id = column("id"), c_series = column("series"), c_lat = column("lat"),
                    c_lon = column("lon"), c_time = column("timestamp");

  std::vector<EventRecord> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto reject = [&](std::string reason) {
      if (rejections != nullptr) rejections->push_back({row, std::move(reason)});
    };
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      reject(fmt::format("expected {} fields, got {}", header.size(), fields.size()));
      continue;
    }
    EventRecord rec;
    rec.row = row;
    rec.id = std::string(csv::trim(fields[c_id]));
    if (!csv::parse_int(fields[c_series], rec.series)) {
      reject("unparseable series label");
      continue;
    }
    if (!csv::parse_double(fields[c_lat], rec.location.lat) ||
        !csv::parse_double(fields[c_lon], rec.location.lon)) {
      reject("unparseable coordinates");
      continue;
    }
    try {
      rec.t = parse_timestamp(fields[c_time]);
    } catch (const Error& e) {
      reject(e.what());
      continue;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

IngestResult ingest_events(std::istream& in, const GeoGrid& grid) {
  IngestResult result;
  const std::vector<EventRecord> records = read_events_csv(in, &result.rejections);
  result.store = EventStore::from_records(grid, records, &result.rejections);
  std::stable_sort(result.rejections.begin(), result.rejections.end(),
                   [](const Rejection& a, const Rejection& b) { return a.row < b.row; });
  return result;
}

void write_events_csv(std::ostream& out, std::span<const EventRecord> records) {
  out << "id,series,lat,lon,timestamp\n";
  for (const EventRecord& r : records) {
    out << csv::escape(r.id) << ',' << r.series << ',' << fmt::format("{}", r.location.lat) << ','
        << fmt::format("{}", r.location.lon) << ',' << fmt::format("{}", r.t) << '\n';
  }
}

void write_rejections_jsonl(std::ostream& out, std::span<const Rejection> rejections) {
  for (const Rejection& r : rejections) {
    out << nlohmann::json{{"row", r.row}, {"reason", r.reason}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

TrainTestSplit split_train_test(const EventStore& store) {
  TrainTestSplit split;
  std::vector<bool> held_out(store.size(), false);
  for (int p : store.labels()) {
    const auto& idx = store.series(p);
    if (idx.size() < 2) {
      split.excluded_series.push_back(p);
      continue;
    }
    held_out[idx.back()] = true;
    split.tests.push_back({p, store.crimes()[idx.back()]});
  }
  std::vector<CrimeInstance> train;
  train.reserve(store.size() - split.tests.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!held_out[i]) train.push_back(store.crimes()[i]);
  }
  split.train = EventStore::from_crimes(std::move(train));
  return split;
}

EventStore merge_split(const EventStore& train, std::span<const TestCase> tests) {
  std::vector<CrimeInstance> all = train.crimes();
  for (const TestCase& tc : tests) all.push_back(tc.crime);
  return EventStore::from_crimes(std::move(all));
}

std::vector<CrimeInstance> priors_before(const EventStore& store, int p, double t) {
  std::vector<CrimeInstance> out;
  for (std::size_t i : store.series(p)) {
    const CrimeInstance& c = store.crimes()[i];
    if (c.t < t) out.push_back(c);
  }
  return out;
}

double prediction_time(std::span<const double> prior_times) {
  if (prior_times.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "prediction time needs at least one prior crime");
  }
  return *std::max_element(prior_times.begin(), prior_times.end()) + 1.0;
}

double prediction_time(std::span<const CrimeInstance> priors) {
  std::vector<double> times;
  times.reserve(priors.size());
  for (const auto& c : priors) times.push_back(c.t);
  return prediction_time(times);
}

}  // namespace nhp
