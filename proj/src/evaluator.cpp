#include "nhp/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "nhp/error.hpp"

namespace nhp {

CaseBuild build_cases(const EventStore& train, std::span<const TestCase> tests,
                      const EventStore& history, const GeoGrid& grid,
                      const BackgroundSpec& background) {
  CaseBuild out;
  const double bandwidth = background.bandwidth_m(grid);
  for (const TestCase& tc : tests) {
    std::vector<CrimeInstance> prior;
    if (train.has_series(tc.series)) {
      for (std::size_t i : train.series(tc.series)) prior.push_back(train.crimes()[i]);
    }
    if (prior.empty()) {
      out.skipped_series.push_back(tc.series);
      continue;
    }
    PredictionCase pc;
    pc.series = tc.series;
    pc.target_id = tc.crime.id;
    pc.priors = to_priors(prior);
    pc.t = prediction_time(prior);
    pc.true_cell = tc.crime.cell;
    pc.background = std::make_shared<const BackgroundField>(fit_background(
        grid, history, pc.t, background.window_days, bandwidth, tc.crime.id));
    out.cases.push_back(std::move(pc));
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
  };
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

EvalReport evaluate(const RiskModel& model, std::span<const PredictionCase> cases,
                    std::size_t cells) {
  EvalReport report;
  report.model = model.name();
  report.resolution = cells;
  report.tuned_params = model.params();
  std::vector<double> normalized;
  for (const PredictionCase& c : cases) {
    const std::vector<double> risk = model.risk(c);
    if (risk.size() != cells) {
      throw Error(ErrorKind::kDimensionMismatch,
                  fmt::format("model '{}' returned {} values for {} cells", model.name(),
                              risk.size(), cells));
    }
    for (double r : risk) {
      if (!std::isfinite(r)) {
        throw Error(ErrorKind::kNumerical,
                    fmt::format("model '{}' produced a non-finite risk for series {}", model.name(),
                                c.series));
      }
    }
    const std::size_t rank = rank_true_cell(risk, c.true_cell);
    const double nr = static_cast<double>(rank) / static_cast<double>(cells);
    report.cases.push_back({c.series, rank, cells, nr});
    normalized.push_back(nr);
  }
  report.summary = summarize(normalized);
  return report;
}

double mean_normalized_rank(const RiskModel& model, std::span<const PredictionCase> cases,
                            std::size_t cells) {
  return evaluate(model, cases, cells).summary.mean;
}

nlohmann::json report_json(std::span<const EvalReport> reports) {
  using nlohmann::json;
  json out = json::array();
  for (const EvalReport& r : reports) {
    json cases = json::array();
    for (const CaseResult& c : r.cases) {
      cases.push_back({{"series", c.series},
                       {"rank", c.rank},
                       {"cells", c.cells},
                       {"normalized_rank", c.normalized_rank}});
    }
    out.push_back({{"model", r.model},
                   {"resolution", r.resolution},
                   {"tuned_params", r.tuned_params},
                   {"summary",
                    {{"count", r.summary.count},
                     {"mean", r.summary.mean},
                     {"median", r.summary.median},
                     {"q1", r.summary.q1},
                     {"q3", r.summary.q3},
                     {"min", r.summary.min},
                     {"max", r.summary.max}}},
                   {"cases", cases}});
  }
  return out;
}

void write_cases_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "model,resolution,series,rank,cells,normalized_rank\n";
  for (const EvalReport& r : reports) {
    for (const CaseResult& c : r.cases) {
      out << csv::escape(r.model) << ',' << r.resolution << ',' << c.series << ',' << c.rank << ','
          << c.cells << ',' << fmt::format("{}", c.normalized_rank) << '\n';
    }
  }
}

std::vector<CsvCaseRow> read_cases_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, "ranks CSV is empty");
  if (csv::trim(line) != "model,resolution,series,rank,cells,normalized_rank") {
    throw Error(ErrorKind::kParse, "unexpected ranks CSV header");
  }
  std::vector<CsvCaseRow> rows;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line);
    long long resolution = 0, series = 0, rank = 0, cells = 0;
    double nr = 0.0;
    if (f.size() != 6 || !csv::parse_int(f[1], resolution) || !csv::parse_int(f[2], series) ||
        !csv::parse_int(f[3], rank) || !csv::parse_int(f[4], cells) ||
        !csv::parse_double(f[5], nr)) {
      throw Error(ErrorKind::kParse, fmt::format("malformed ranks CSV row '{}'", line));
    }
    rows.push_back({f[0], static_cast<std::size_t>(resolution),
                    {static_cast<int>(series), static_cast<std::size_t>(rank),
                     static_cast<std::size_t>(cells), nr}});
  }
  return rows;
}

void emit_report(std::span<const EvalReport> reports, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, fmt::format("cannot create '{}': {}", dir, ec.message()));
  const auto path = std::filesystem::path(dir);
  std::ofstream json_out(path / "report.json");
  std::ofstream csv_out(path / "ranks.csv");
  if (!json_out || !csv_out) throw Error(ErrorKind::kIo, fmt::format("cannot write report files in '{}'", dir));
  json_out << report_json(reports).dump(2) << '\n';
  write_cases_csv(csv_out, reports);
  if (!json_out || !csv_out) throw Error(ErrorKind::kIo, "failed writing report files");
}

}  // namespace nhp
