#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/errors.hpp"
#include "chamber/json.hpp"

namespace chamber {

struct ScoreRecord {
  std::string run_id;
  std::string rater_id;
  double score = 0.0;  // [0, 10]

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ScoreDataset {
  std::string scenario_id;
  std::vector<ScoreRecord> records;  // file order
};

// Raters in order of first appearance.
std::vector<std::string> raters(const ScoreDataset& ds);
// Run ids in order of first appearance.
std::vector<std::string> run_ids(const ScoreDataset& ds);

// Checks ranges, uniqueness of (run_id, rater_id) and the paired design.
// Throws RangeError, ValidationError, PairingError.
void validate_dataset(const ScoreDataset& ds);

// full: ranges, uniqueness and pairing. rows: ranges only (a file still being filled in).
enum class ScoreCheck { full, rows };

// CSV with header scenario_id,run_id,rater_id,score. One dataset per
// scenario_id, in order of first appearance. Throws ParseError, RangeError,
// PairingError, ValidationError, IoError.
std::vector<ScoreDataset> parse_scores_csv(std::string_view text, std::string_view origin = "<scores>",
                                           ScoreCheck check = ScoreCheck::full);
std::vector<ScoreDataset> ingest_scores(const std::filesystem::path& path);

// One CSV row, quoted where needed, with trailing newline.
std::string score_csv_row(const std::string& scenario_id, const ScoreRecord& record);
inline constexpr std::string_view kScoresCsvHeader = "scenario_id,run_id,rater_id,score\n";

// Throws UnknownRaterError.
double rater_mean(const ScoreDataset& ds, const std::string& rater_id);

// Scores of two raters aligned by run_id (run order of the dataset).
struct PairedScores {
  std::vector<double> x;
  std::vector<double> y;
};
PairedScores paired_scores(const ScoreDataset& ds, const std::string& rater_x, const std::string& rater_y);

// Sample Pearson correlation. Throws LengthMismatchError, DomainError (n < 3),
// DegenerateInputError (a constant vector).
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

enum class Tail { two, one };

// t = r sqrt((n-2)/(1-r^2)), df = n-2.
double t_statistic(double r, long n);

// Two-tailed: P(|T| >= |t|). One-tailed: P(T >= t), the positive-association
// alternative. Throws DomainError unless n >= 3 and |r| < 1.
double p_value(double r, long n, Tail tail = Tail::two);

struct CorrelationResult {
  double r = 0.0;
  long n = 0;
  double t_stat = 0.0;
  long df = 0;
  double p = 1.0;
  Tail tail = Tail::two;
};

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y, Tail tail = Tail::two);

struct RaterSummary {
  std::string rater_id;
  double mean = 0.0;
};

struct ScenarioReport {
  std::string scenario_id;
  std::vector<RaterSummary> raters;  // exactly two
  CorrelationResult correlation;
};

// Throws ValidationError for an empty input, an empty dataset, or a dataset
// without exactly two raters; statistics errors propagate.
std::vector<ScenarioReport> table_report(const std::vector<ScoreDataset>& datasets, Tail tail = Tail::two);

std::string render_report_text(const std::vector<ScenarioReport>& report);
Json report_to_json(const std::vector<ScenarioReport>& report);

}  // namespace chamber
