#include "chamber/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>

namespace chamber {

namespace {

template <class Key>
std::vector<std::string> first_appearance(const ScoreDataset& ds, Key key) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& rec : ds.records) {
    if (seen.insert(key(rec)).second) out.push_back(key(rec));
  }
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line, std::string_view origin, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"' && fields.back().empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) {
    throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": unterminated quoted field");
  }
  return fields;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

void check_range(const ScoreRecord& rec) {
  if (!std::isfinite(rec.score) || rec.score < 0.0 || rec.score > 10.0) {
    throw RangeError("score " + format_fixed(rec.score, 2) + " for run " + rec.run_id + " rater " + rec.rater_id +
                     " is outside [0, 10]");
  }
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string score_csv_row(const std::string& scenario_id, const ScoreRecord& record) {
  char score[32];
  auto end = std::to_chars(score, score + sizeof score, record.score).ptr;
  return csv_field(scenario_id) + "," + csv_field(record.run_id) + "," + csv_field(record.rater_id) + "," +
         std::string(score, end) + "\n";
}

std::vector<std::string> raters(const ScoreDataset& ds) {
  return first_appearance(ds, [](const ScoreRecord& r) { return r.rater_id; });
}

std::vector<std::string> run_ids(const ScoreDataset& ds) {
  return first_appearance(ds, [](const ScoreRecord& r) { return r.run_id; });
}

void validate_dataset(const ScoreDataset& ds) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& rec : ds.records) {
    check_range(rec);
    if (!seen.insert({rec.run_id, rec.rater_id}).second) {
      throw ValidationError("run_id", "duplicate score for run " + rec.run_id + " rater " + rec.rater_id +
                                          " in scenario " + ds.scenario_id);
    }
  }
  const auto all_raters = raters(ds);
  std::string unpaired;
  for (const auto& run : run_ids(ds)) {
    std::size_t count = 0;
    for (const auto& rater : all_raters) count += seen.count({run, rater});
    if (count != all_raters.size()) {
      unpaired += (unpaired.empty() ? "" : ", ") + run;
    }
  }
  if (!unpaired.empty()) {
    throw PairingError("scenario " + ds.scenario_id + ": unpaired run " + unpaired);
  }
}

std::vector<ScoreDataset> parse_scores_csv(std::string_view text, std::string_view origin, ScoreCheck check) {
  std::vector<ScoreDataset> datasets;
  std::map<std::string, std::size_t> by_scenario;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    auto end = text.find('\n');
    auto line = text.substr(0, end);
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    auto fields = split_csv_line(line, origin, line_no);
    if (!header_seen) {
      const std::vector<std::string> expected{"scenario_id", "run_id", "rater_id", "score"};
      if (fields != expected) {
        throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                         ": expected header scenario_id,run_id,rater_id,score");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    for (auto& f : fields) {
      auto first = f.find_first_not_of(" \t");
      auto last = f.find_last_not_of(" \t");
      f = first == std::string::npos ? "" : f.substr(first, last - first + 1);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (fields[i].empty()) {
        throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": empty field");
      }
    }
    double score = 0.0;
    const auto& s = fields[3];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(score)) {
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": score \"" + s + "\" is not a number");
    }
    auto [it, inserted] = by_scenario.try_emplace(fields[0], datasets.size());
    if (inserted) datasets.push_back({fields[0], {}});
    datasets[it->second].records.push_back({fields[1], fields[2], score});
  }
  if (!header_seen) {
    throw ParseError(std::string(origin) + ": missing header");
  }
  for (const auto& ds : datasets) {
    if (check == ScoreCheck::full) {
      validate_dataset(ds);
    } else {
      for (const auto& rec : ds.records) check_range(rec);
    }
  }
  return datasets;
}

std::vector<ScoreDataset> ingest_scores(const std::filesystem::path& path) {
  return parse_scores_csv(read_text_file(path), path.string());
}

double rater_mean(const ScoreDataset& ds, const std::string& rater_id) {
  long double sum = 0;
  std::size_t count = 0;
  for (const auto& rec : ds.records) {
    if (rec.rater_id == rater_id) {
      sum += rec.score;
      ++count;
    }
  }
  if (count == 0) {
    throw UnknownRaterError("no scores from rater \"" + rater_id + "\" in scenario " + ds.scenario_id);
  }
  return static_cast<double>(sum / count);
}

PairedScores paired_scores(const ScoreDataset& ds, const std::string& rater_x, const std::string& rater_y) {
  std::map<std::pair<std::string, std::string>, double> lookup;
  for (const auto& rec : ds.records) lookup[{rec.run_id, rec.rater_id}] = rec.score;
  PairedScores out;
  for (const auto& run : run_ids(ds)) {
    auto x = lookup.find({run, rater_x});
    auto y = lookup.find({run, rater_y});
    if (x == lookup.end() || y == lookup.end()) {
      throw PairingError("scenario " + ds.scenario_id + ": unpaired run " + run);
    }
    out.x.push_back(x->second);
    out.y.push_back(y->second);
  }
  return out;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw LengthMismatchError("vectors have lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw DomainError("correlation needs at least 3 pairs, got " + std::to_string(x.size()));
  }
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) {
    throw DegenerateInputError("zero variance: a score vector is constant");
  }
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) {
    throw DegenerateInputError("zero variance");
  }
  const auto r = static_cast<double>(sxy / (std::sqrt(sxx) * std::sqrt(syy)));
  return std::clamp(r, -1.0, 1.0);
}

double t_statistic(double r, long n) {
  if (n < 3) throw DomainError("n must be at least 3, got " + std::to_string(n));
  if (!(std::fabs(r) < 1.0)) throw DomainError("|r| must be below 1");
  return r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
}

double p_value(double r, long n, Tail tail) {
  const double t = t_statistic(r, n);
  const boost::math::students_t dist(static_cast<double>(n - 2));
  const double p = tail == Tail::two ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))
                                     : boost::math::cdf(boost::math::complement(dist, t));
  return std::clamp(p, 0.0, 1.0);
}

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y, Tail tail) {
  CorrelationResult out;
  out.r = pearson_r(x, y);
  out.n = static_cast<long>(x.size());
  out.df = out.n - 2;
  out.tail = tail;
  if (std::fabs(out.r) < 1.0) {
    out.t_stat = t_statistic(out.r, out.n);
    out.p = p_value(out.r, out.n, tail);
  } else {
    out.t_stat = std::copysign(HUGE_VAL, out.r);
    out.p = tail == Tail::two || out.r > 0 ? 0.0 : 1.0;
  }
  return out;
}

std::vector<ScenarioReport> table_report(const std::vector<ScoreDataset>& datasets, Tail tail) {
  if (datasets.empty()) {
    throw ValidationError("scores", "no datasets to report");
  }
  std::vector<ScenarioReport> report;
  for (const auto& ds : datasets) {
    if (ds.records.empty()) {
      throw ValidationError("scores", "scenario " + ds.scenario_id + " has no scores");
    }
    validate_dataset(ds);
    const auto ids = raters(ds);
    if (ids.size() != 2) {
      throw ValidationError("rater_id", "scenario " + ds.scenario_id + " needs exactly 2 raters, found " +
                                            std::to_string(ids.size()));
    }
    ScenarioReport row;
    row.scenario_id = ds.scenario_id;
    for (const auto& id : ids) row.raters.push_back({id, rater_mean(ds, id)});
    auto pairs = paired_scores(ds, ids[0], ids[1]);
    row.correlation = correlate(pairs.x, pairs.y, tail);
    report.push_back(std::move(row));
  }
  return report;
}

std::string render_report_text(const std::vector<ScenarioReport>& report) {
  std::size_t width = std::string("Pearson's correlation, p-value").size();
  for (const auto& row : report) {
    for (const auto& r : row.raters) width = std::max(width, r.rater_id.size());
  }
  auto line = [&](const std::string& label, const std::string& value) {
    return "  " + label + std::string(width - label.size() + 2, ' ') + value + "\n";
  };
  std::string out;
  for (const auto& row : report) {
    const auto& c = row.correlation;
    if (!out.empty()) out += "\n";
    out += row.scenario_id + " (n = " + std::to_string(c.n) + ", " +
           (c.tail == Tail::two ? "two-tailed" : "one-tailed") + ")\n";
    for (const auto& r : row.raters) out += line(r.rater_id, format_fixed(r.mean, 1));
    out += line("Pearson's correlation, p-value", format_fixed(c.r, 2) + ", " + format_fixed(c.p, 2));
  }
  return out;
}

Json report_to_json(const std::vector<ScenarioReport>& report) {
  Json scenarios = Json::array();
  for (const auto& row : report) {
    Json raters_json = Json::array();
    for (const auto& r : row.raters) raters_json.push_back(Json{{"rater_id", r.rater_id}, {"mean", r.mean}});
    const auto& c = row.correlation;
    scenarios.push_back(Json{{"scenario_id", row.scenario_id},
                             {"raters", std::move(raters_json)},
                             {"correlation",
                              {{"r", c.r},
                               {"n", c.n},
                               {"t_stat", c.t_stat},
                               {"df", c.df},
                               {"p", c.p},
                               {"tail", c.tail == Tail::two ? "two" : "one"}}}});
  }
  return Json{{"scenarios", std::move(scenarios)}};
}

}  // namespace chamber
