#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhp/background_risk.hpp"
#include "nhp/event_store.hpp"
#include "nhp/risk_model.hpp"
#include "nhp/trainer.hpp"

namespace nhp {

/// One held-out crime to predict, with everything a model may look at.
struct PredictionCase {
  int series = 0;
  std::string target_id;
  std::vector<PriorHit> priors;
  double t = 0.0;  // prediction time
  CellIndex true_cell = 0;
  /// Default background field at t (shared by the self-exciting models).
  std::shared_ptr<const BackgroundField> background;
};

class RiskModel {
 public:
  virtual ~RiskModel() = default;
  virtual std::string name() const = 0;
  /// Parameters recorded in the report (tuned or trained values).
  virtual nlohmann::json params() const { return nlohmann::json::object(); }
  /// One risk value per cell; higher means more likely.
  virtual std::vector<double> risk(const PredictionCase& c) const = 0;
};

struct CaseBuild {
  std::vector<PredictionCase> cases;
  std::vector<int> skipped_series;  // no training priors
};

/// Priors for each test case are the training crimes of its series; the
/// prediction time is one day after the latest of them.
CaseBuild build_cases(const EventStore& train, std::span<const TestCase> tests,
                      const EventStore& history, const GeoGrid& grid,
                      const BackgroundSpec& background);

struct CaseResult {
  int series = 0;
  std::size_t rank = 0;
  std::size_t cells = 0;
  double normalized_rank = 0.0;
};

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::span<const double> values);

struct EvalReport {
  std::string model;
  std::size_t resolution = 0;  // |L|
  nlohmann::json tuned_params = nlohmann::json::object();
  std::vector<CaseResult> cases;
  Summary summary;
};

EvalReport evaluate(const RiskModel& model, std::span<const PredictionCase> cases,
                    std::size_t cells);

double mean_normalized_rank(const RiskModel& model, std::span<const PredictionCase> cases,
                            std::size_t cells);

// Report files: a JSON array of {model, resolution, tuned_params,
// summary{mean, median, q1, q3, min, max}, cases[…]} and a per-case CSV
// `model,resolution,series,rank,cells,normalized_rank`.
nlohmann::json report_json(std::span<const EvalReport> reports);
void write_cases_csv(std::ostream& out, std::span<const EvalReport> reports);

struct CsvCaseRow {
  std::string model;
  std::size_t resolution = 0;
  CaseResult result;
};
std::vector<CsvCaseRow> read_cases_csv(std::istream& in);

/// Writes report.json and ranks.csv under `dir`.
void emit_report(std::span<const EvalReport> reports, const std::string& dir);

}  // namespace nhp
