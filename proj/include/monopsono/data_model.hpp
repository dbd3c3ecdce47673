#pragma once

// Worker snapshot records and their aggregation into labor-market cells and
// establishment-year panels.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "concentration.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace monopsono {

enum class Contract { regular_ft, regular_pt, marginal, apprentice };

inline std::string_view to_string(Contract c) {
  switch (c) {
    case Contract::regular_ft: return "regular_ft";
    case Contract::regular_pt: return "regular_pt";
    case Contract::marginal: return "marginal";
    case Contract::apprentice: return "apprentice";
  }
  return "regular_ft";
}

inline std::optional<Contract> parse_contract(std::string_view s) {
  if (s == "regular_ft") return Contract::regular_ft;
  if (s == "regular_pt") return Contract::regular_pt;
  if (s == "marginal") return Contract::marginal;
  if (s == "apprentice") return Contract::apprentice;
  return std::nullopt;
}

enum class Territory { west, east, berlin };

inline std::string_view to_string(Territory t) {
  switch (t) {
    case Territory::west: return "west";
    case Territory::east: return "east";
    case Territory::berlin: return "berlin";
  }
  return "west";
}

inline std::optional<Territory> parse_territory(std::string_view s) {
  if (s == "west") return Territory::west;
  if (s == "east") return Territory::east;
  if (s == "berlin") return Territory::berlin;
  return std::nullopt;
}

/// German district codes: state prefix 11 is Berlin, 12-16 are the eastern
/// states, everything else is West Germany.
inline Territory territory_of_district(std::string_view district) {
  if (district.size() < 2) return Territory::west;
  const std::string_view state = district.substr(0, 2);
  if (state == "11") return Territory::berlin;
  if (state >= "12" && state <= "16") return Territory::east;
  return Territory::west;
}

// June-30 snapshot of one employment spell.
struct SnapshotRecord {
  std::string worker_id;
  std::string estab_id;
  std::string industry;  // at least 5 digits
  std::string region;    // district code
  int year = 0;
  std::optional<double> daily_wage;
  Contract contract = Contract::regular_ft;

  bool apprentice() const { return contract == Contract::apprentice; }
};

inline const std::vector<std::string>& snapshot_header() {
  static const std::vector<std::string> h{"worker_id", "estab_id", "industry", "region",
                                          "year",      "daily_wage", "contract"};
  return h;
}

inline std::vector<SnapshotRecord> parse_snapshots(const csv::Table& t) {
  const auto cw = t.require("worker_id"), ce = t.require("estab_id"),
             ci = t.require("industry"), cr = t.require("region"), cy = t.require("year"),
             cwage = t.require("daily_wage"), cc = t.require("contract");
  std::vector<SnapshotRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto where = [&](std::size_t col) {
      return t.source + ": row " + std::to_string(r + 1) + ", column " + t.header[col];
    };
    SnapshotRecord rec;
    rec.worker_id = row[cw];
    rec.estab_id = row[ce];
    rec.industry = row[ci];
    rec.region = row[cr];
    if (rec.worker_id.empty()) throw ParseError(where(cw) + ": empty");
    if (rec.estab_id.empty()) throw ParseError(where(ce) + ": empty");
    if (rec.industry.size() < 5 ||
        !std::all_of(rec.industry.begin(), rec.industry.end(), [](unsigned char ch) {
          return ch >= '0' && ch <= '9';
        }))
      throw ParseError(where(ci) + ": expected a digit code of length >= 5, got '" +
                       rec.industry + "'");
    if (rec.region.empty()) throw ParseError(where(cr) + ": empty");
    rec.year = static_cast<int>(csv::field_int(t, r, cy));
    auto contract = parse_contract(row[cc]);
    if (!contract) throw ParseError(where(cc) + ": unknown contract '" + row[cc] + "'");
    rec.contract = *contract;
    if (row[cwage].empty()) {
      if (rec.contract == Contract::regular_ft || rec.contract == Contract::regular_pt)
        throw ParseError(where(cwage) + ": wage required for regular contracts");
    } else {
      rec.daily_wage = csv::field_double(t, r, cwage);
      if (*rec.daily_wage < 0.0) throw ParseError(where(cwage) + ": negative wage");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<SnapshotRecord> parse_snapshot_file(const std::filesystem::path& path) {
  return parse_snapshots(csv::read(path));
}

inline std::string snapshots_csv(const std::vector<SnapshotRecord>& records) {
  csv::Writer w(snapshot_header());
  for (const auto& r : records) {
    w.row({r.worker_id, r.estab_id, r.industry, r.region, std::to_string(r.year),
           r.daily_wage ? csv::fmt(*r.daily_wage) : std::string(), std::string(to_string(r.contract))});
  }
  return w.str();
}

using Delineation = std::map<std::string, std::string>;  // district -> zone

inline Delineation parse_delineation(const csv::Table& t) {
  const auto cd = t.require("district"), cz = t.require("zone");
  Delineation d;
  for (const auto& row : t.rows) d[row[cd]] = row[cz];
  return d;
}

inline std::string truncate_industry(const std::string& code, int digits) {
  if (digits < 1 || static_cast<std::size_t>(digits) > code.size())
    throw DomainError("industry code '" + code + "' cannot be truncated to " +
                      std::to_string(digits) + " digits");
  return code.substr(0, static_cast<std::size_t>(digits));
}

inline const std::string& zone_of(const Delineation& d, const std::string& district) {
  auto it = d.find(district);
  if (it == d.end()) throw DomainError("district '" + district + "' has no zone in the delineation");
  return it->second;
}

namespace detail {

// Composite keys viewing strings owned by the record vector.
struct IdYear {
  std::string_view id;
  int year = 0;
  bool operator==(const IdYear&) const = default;
};

struct IdYearHash {
  std::size_t operator()(const IdYear& k) const {
    return std::hash<std::string_view>{}(k.id) * 1000003u ^ static_cast<std::size_t>(k.year);
  }
};

struct WorkerEstabYear {
  std::string_view worker, estab;
  int year = 0;
  bool operator==(const WorkerEstabYear&) const = default;
};

struct WorkerEstabYearHash {
  std::size_t operator()(const WorkerEstabYear& k) const {
    const std::hash<std::string_view> h;
    return (h(k.worker) * 1000003u ^ h(k.estab)) * 1000003u ^ static_cast<std::size_t>(k.year);
  }
};

struct EstabAttributes {
  std::string industry;
  std::string region;
};

using AttributeMap = std::unordered_map<IdYear, EstabAttributes, IdYearHash>;

}  // namespace detail

/// Indices of main jobs, in record order: one per (worker, year), apprentices
/// excluded. The main job is the highest daily wage; ties go to the
/// lexicographically smallest establishment id, then to the earlier record.
/// Spells without a wage rank below any paid spell.
inline std::vector<std::size_t> main_jobs(const std::vector<SnapshotRecord>& records) {
  std::unordered_map<detail::IdYear, std::size_t, detail::IdYearHash> best;
  best.reserve(records.size());
  auto wage = [&](std::size_t i) { return records[i].daily_wage.value_or(-1.0); };
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.apprentice()) continue;
    auto [it, fresh] = best.try_emplace(detail::IdYear{r.worker_id, r.year}, i);
    if (fresh) continue;
    const std::size_t b = it->second;
    if (wage(i) > wage(b) || (wage(i) == wage(b) && r.estab_id < records[b].estab_id)) it->second = i;
  }
  std::vector<std::size_t> out;
  out.reserve(best.size());
  for (const auto& [k, i] : best) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

// Establishment attributes per year: the most frequent (industry, region)
// among its main-job spells, ties to the smallest pair.
inline AttributeMap estab_attributes(const std::vector<SnapshotRecord>& records,
                                     const std::vector<std::size_t>& jobs) {
  struct Tally {
    std::string_view industry, region;
    int n = 0;
  };
  std::unordered_map<IdYear, std::vector<Tally>, IdYearHash> counts;
  counts.reserve(jobs.size() / 2 + 1);
  for (std::size_t i : jobs) {
    const auto& r = records[i];
    auto& v = counts[IdYear{r.estab_id, r.year}];
    auto it = std::find_if(v.begin(), v.end(), [&](const Tally& t) {
      return t.industry == r.industry && t.region == r.region;
    });
    if (it == v.end())
      v.push_back({r.industry, r.region, 1});
    else
      ++it->n;
  }
  AttributeMap out;
  out.reserve(counts.size());
  for (const auto& [key, v] : counts) {
    const Tally* best = &v.front();
    for (const auto& t : v) {
      if (t.n > best->n ||
          (t.n == best->n && std::tie(t.industry, t.region) < std::tie(best->industry, best->region)))
        best = &t;
    }
    out.emplace(key, EstabAttributes{std::string(best->industry), std::string(best->region)});
  }
  return out;
}

}  // namespace detail

/// Main jobs and establishment attributes, shared by the panel builders.
/// Holds views into the records, which must outlive it.
struct PreparedRecords {
  std::vector<std::size_t> jobs;
  detail::AttributeMap attrs;
};

inline PreparedRecords prepare_records(const std::vector<SnapshotRecord>& records) {
  PreparedRecords p;
  p.jobs = main_jobs(records);
  p.attrs = detail::estab_attributes(records, p.jobs);
  return p;
}

/// Aggregates main-job spells into market cells. Employment counts heads at
/// the snapshot; hires count heads present in (estab, t) but not (estab, t-1),
/// and years without a predecessor in the data are omitted and reported.
inline MarketPanel build_market_panel(const std::vector<SnapshotRecord>& records,
                                      const PreparedRecords& prepared,
                                      const Delineation& delineation, int industry_digits,
                                      ObjectKind object_kind) {
  if (industry_digits < 3 || industry_digits > 5)
    throw DomainError("industry digits must be 3, 4 or 5");
  MarketPanel panel;
  panel.object_kind = object_kind;
  panel.industry_digits = industry_digits;
  const auto& jobs = prepared.jobs;
  const auto& attrs = prepared.attrs;

  std::set<int> years;
  for (std::size_t i : jobs) years.insert(records[i].year);

  std::unordered_set<detail::WorkerEstabYear, detail::WorkerEstabYearHash> presence;
  if (object_kind == ObjectKind::hires) {
    presence.reserve(jobs.size());
    for (std::size_t i : jobs) {
      const auto& r = records[i];
      presence.insert({r.worker_id, r.estab_id, r.year});
    }
    for (int y : years)
      if (!years.count(y - 1)) panel.omitted_years.push_back(y);
  }

  std::unordered_map<detail::IdYear, long long, detail::IdYearHash> per_estab;
  per_estab.reserve(attrs.size());
  for (std::size_t i : jobs) {
    const auto& r = records[i];
    long long add = 1;
    if (object_kind == ObjectKind::hires) {
      if (!years.count(r.year - 1)) continue;
      if (presence.count({r.worker_id, r.estab_id, r.year - 1})) add = 0;
    }
    per_estab[detail::IdYear{r.estab_id, r.year}] += add;
  }

  // (market key) -> (estab -> count)
  std::map<MarketKey, std::map<std::string_view, long long>> counts;
  for (const auto& [ey, n] : per_estab) {
    const auto& a = attrs.at(ey);
    MarketKey key{truncate_industry(a.industry, industry_digits), zone_of(delineation, a.region),
                  ey.year};
    counts[std::move(key)][ey.id] += n;
  }

  for (auto& [key, firms] : counts) {
    long long total = 0;
    for (const auto& [e, n] : firms) total += n;
    if (total == 0) continue;
    MarketCell cell;
    cell.total = total;
    for (const auto& [e, n] : firms) {
      if (n <= 0) continue;
      cell.firms.push_back({std::string(e), static_cast<double>(n) / static_cast<double>(total), n});
    }
    panel.cells.emplace(key, std::move(cell));
  }
  return panel;
}

inline MarketPanel build_market_panel(const std::vector<SnapshotRecord>& records,
                                      const Delineation& delineation, int industry_digits,
                                      ObjectKind object_kind) {
  return build_market_panel(records, prepare_records(records), delineation, industry_digits,
                            object_kind);
}

inline std::string market_panel_csv(const MarketPanel& p) {
  csv::Writer w({"industry", "zone", "year", "object_kind", "j", "total", "estab_id", "count",
                 "share"});
  for (const auto& [key, cell] : p.cells) {
    for (const auto& f : cell.firms) {
      w.row({key.industry, key.zone, std::to_string(key.year), std::string(to_string(p.object_kind)),
             std::to_string(cell.firm_count()), std::to_string(cell.total), f.estab_id,
             std::to_string(f.count), csv::fmt(f.share)});
    }
  }
  return w.str();
}

inline MarketPanel read_market_panel_csv(const csv::Table& t) {
  const auto ci = t.require("industry"), cz = t.require("zone"), cy = t.require("year"),
             co = t.require("object_kind"), ce = t.require("estab_id"), cn = t.require("count"),
             cs = t.require("share"), ctot = t.require("total");
  MarketPanel p;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    MarketKey key{t.rows[r][ci], t.rows[r][cz], static_cast<int>(csv::field_int(t, r, cy))};
    p.object_kind = parse_object_kind(t.rows[r][co]);
    p.industry_digits = static_cast<int>(key.industry.size());
    auto& cell = p.cells[key];
    cell.total = csv::field_int(t, r, ctot);
    cell.firms.push_back({t.rows[r][ce], csv::field_double(t, r, cs), csv::field_int(t, r, cn)});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Minimum wages, sectors, controls

using SectorMap = std::vector<std::pair<std::string, std::string>>;  // prefix -> sector

inline SectorMap parse_sectors(const csv::Table& t) {
  const auto cp = t.require("industry_prefix"), cs = t.require("sector");
  SectorMap m;
  for (const auto& row : t.rows) m.emplace_back(row[cp], row[cs]);
  return m;
}

/// Longest matching prefix wins.
inline std::optional<std::string> sector_of(const SectorMap& m, const std::string& industry) {
  const std::pair<std::string, std::string>* best = nullptr;
  for (const auto& entry : m) {
    if (industry.compare(0, entry.first.size(), entry.first) == 0 &&
        (!best || entry.first.size() > best->first.size()))
      best = &entry;
  }
  if (!best) return std::nullopt;
  return best->second;
}

struct MinWageSpell {
  std::string sector;
  Territory territory = Territory::west;
  std::string valid_from;  // ISO date, inclusive
  std::string valid_to;    // ISO date, inclusive
  double hourly_wage = 0.0;
};

inline bool iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

class MinWageSchedule {
 public:
  MinWageSchedule() = default;
  explicit MinWageSchedule(std::vector<MinWageSpell> spells) : spells_(std::move(spells)) {
    for (const auto& s : spells_) {
      if (!iso_date(s.valid_from) || !iso_date(s.valid_to))
        throw ParseError("minimum wage dates must be ISO YYYY-MM-DD");
      if (s.valid_to < s.valid_from) throw ParseError("minimum wage spell ends before it starts");
      if (!(s.hourly_wage > 0.0)) throw ParseError("minimum wage must be positive");
    }
  }

  bool has_territory(const std::string& sector, Territory t) const {
    for (const auto& s : spells_)
      if (s.sector == sector && s.territory == t) return true;
    return false;
  }

  /// Minimum wage in force on June 30 of the given year.
  std::optional<double> in_force(const std::string& sector, Territory t, int year) const {
    const std::string ref = std::to_string(year) + "-06-30";
    for (const auto& s : spells_)
      if (s.sector == sector && s.territory == t && s.valid_from <= ref && ref <= s.valid_to)
        return s.hourly_wage;
    return std::nullopt;
  }

  const std::vector<MinWageSpell>& spells() const { return spells_; }

 private:
  std::vector<MinWageSpell> spells_;
};

inline MinWageSchedule parse_minwage(const csv::Table& t) {
  const auto cs = t.require("sector"), ct = t.require("territory"),
             cf = t.require("valid_from"), cto = t.require("valid_to"),
             cw = t.require("hourly_wage");
  std::vector<MinWageSpell> spells;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto terr = parse_territory(t.rows[r][ct]);
    if (!terr)
      throw ParseError(t.source + ": row " + std::to_string(r + 1) +
                       ", column territory: unknown '" + t.rows[r][ct] + "'");
    spells.push_back({t.rows[r][cs], *terr, t.rows[r][cf], t.rows[r][cto],
                      csv::field_double(t, r, cw)});
  }
  return MinWageSchedule(std::move(spells));
}

struct SectorControls {
  double log_employment = 0.0;
  double cba_share = 0.0;
};

struct Controls {
  std::map<std::tuple<std::string, Territory, int>, SectorControls> sector;
  std::map<std::string, double> akm_premium;  // estab -> log wage premium
};

/// Rows with a non-empty estab_id carry an AKM premium; the rest carry
/// sector-territory-year controls.
inline Controls parse_controls(const csv::Table& t) {
  const auto cs = t.require("sector"), ct = t.require("territory"), cy = t.require("year"),
             cl = t.require("log_employment"), cc = t.require("cba_share");
  const auto ce = t.column("estab_id");
  const auto ca = t.column("akm_premium");
  Controls out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (ce && !row[*ce].empty()) {
      if (!ca) throw ParseError(t.source + ": estab_id rows need an akm_premium column");
      out.akm_premium[row[*ce]] = csv::field_double(t, r, *ca);
      continue;
    }
    auto terr = parse_territory(row[ct]);
    if (!terr)
      throw ParseError(t.source + ": row " + std::to_string(r + 1) +
                       ", column territory: unknown '" + row[ct] + "'");
    out.sector[{row[cs], *terr, static_cast<int>(csv::field_int(t, r, cy))}] = {
        csv::field_double(t, r, cl), csv::field_double(t, r, cc)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kaitz index

struct WageConversion {
  double days_per_week = 7.0;
  double hours_per_week = 40.0;

  double hourly(double daily) const { return daily * days_per_week / hours_per_week; }
};

/// Minimum wage over the median hourly wage.
inline double kaitz_index(double minwage_hourly, double median_daily_wage,
                          WageConversion conv = {}) {
  if (!(minwage_hourly > 0.0) || !(median_daily_wage > 0.0))
    throw DomainError("Kaitz index needs positive minimum and median wages");
  return minwage_hourly / conv.hourly(median_daily_wage);
}

/// Default quintile cut points for average Kaitz indices.
inline std::vector<double> default_kaitz_cuts() { return {0.68, 0.79, 0.92, 1.15}; }

/// 0-based group for a value given ascending cut points; groups are
/// left-closed on each cut.
inline int group_of(double value, const std::vector<double>& cuts) {
  int g = 0;
  for (double c : cuts)
    if (value >= c) ++g;
  return g;
}

// ---------------------------------------------------------------------------
// Establishment panel

/// Order statistic by cumulative-count inversion (lower interpolation).
inline double lower_quantile(std::vector<double> sorted_values, double q) {
  std::sort(sorted_values.begin(), sorted_values.end());
  const double n = static_cast<double>(sorted_values.size());
  for (std::size_t i = 0; i < sorted_values.size(); ++i)
    if (static_cast<double>(i + 1) >= q * n * (1.0 - 1e-14)) return sorted_values[i];
  return sorted_values.back();
}

struct EstabRow {
  std::string estab_id;
  int year = 0;
  std::string industry;         // full code
  std::string market_industry;  // truncated to the panel's digits
  std::string region;
  std::string zone;
  std::string sector;
  Territory territory = Territory::west;
  Territory wage_territory = Territory::west;  // territory used for the minimum-wage join
  std::optional<double> mean_wage, p05_wage, p25_wage, p50_wage, p75_wage;
  long long emp_ft = 0, emp_pt = 0, emp_marginal = 0, emp_overall = 0;
  bool closure = false;
  std::optional<double> hhi_current, hhi_avg, hhi_predetermined;
  std::optional<double> minwage;           // hourly, in force on June 30
  std::optional<double> implicit_minwage;  // hourly, pre-introduction year only
  std::optional<int> first_regulated_year;
  std::optional<double> kaitz, kaitz_avg;
  std::optional<double> log_employment, cba_share, akm_premium;
  std::optional<double> instrument;

  std::string market_id() const { return market_industry + "|" + zone; }
};

struct EstabPanel {
  std::vector<EstabRow> rows;  // sorted by (estab_id, year)
  std::map<std::string, std::size_t> skipped_unmapped;  // industry -> skipped estab-years
  int data_end_year = 0;
};

struct EstabPanelOptions {
  Delineation delineation;
  std::map<std::string, Territory> berlin_assignment;  // sector -> territory for Berlin rows
  std::function<Territory(const std::string&)> territory_of = territory_of_district;
  WageConversion wage_conversion;
  std::optional<int> data_end_year;  // defaults to the last year in the records
  Controls controls;
};

inline EstabPanel build_estab_panel(const std::vector<SnapshotRecord>& records,
                                    const PreparedRecords& prepared, const SectorMap& sectors,
                                    const MinWageSchedule& minwage, const MarketPanel& market,
                                    const EstabPanelOptions& opt) {
  EstabPanel panel;
  const auto& jobs = prepared.jobs;
  const auto& attrs = prepared.attrs;

  struct Accum {
    std::vector<double> ft_wages;
    long long ft = 0, pt = 0, marginal = 0;
  };
  std::unordered_map<detail::IdYear, Accum, detail::IdYearHash> acc_map;
  acc_map.reserve(attrs.size());
  int last_year = 0;
  int first_year = 0;
  bool any = false;
  for (std::size_t i : jobs) {
    const auto& r = records[i];
    auto& a = acc_map[detail::IdYear{r.estab_id, r.year}];
    switch (r.contract) {
      case Contract::regular_ft:
        ++a.ft;
        a.ft_wages.push_back(*r.daily_wage);
        break;
      case Contract::regular_pt: ++a.pt; break;
      case Contract::marginal: ++a.marginal; break;
      case Contract::apprentice: break;
    }
    last_year = any ? std::max(last_year, r.year) : r.year;
    first_year = any ? std::min(first_year, r.year) : r.year;
    any = true;
  }
  panel.data_end_year = opt.data_end_year.value_or(last_year);

  // Sector-territory p5 hourly wages for the implicit minimum wage.
  std::map<std::tuple<std::string, Territory, int>, std::vector<double>> st_wages;

  std::vector<std::pair<detail::IdYear, Accum*>> acc;
  acc.reserve(acc_map.size());
  for (auto& [k, a] : acc_map) acc.emplace_back(k, &a);
  std::sort(acc.begin(), acc.end(), [](const auto& x, const auto& y) {
    return std::tie(x.first.id, x.first.year) < std::tie(y.first.id, y.first.year);
  });
  panel.rows.reserve(acc.size());

  std::unordered_map<MarketKey, double, MarketKeyHash> cell_hhi;
  cell_hhi.reserve(market.cells.size());
  for (const auto& [key, cell] : market.cells) cell_hhi.emplace(key, hhi(ShareVector(cell.shares())));
  auto akm = opt.controls.akm_premium.begin();
  const auto akm_end = opt.controls.akm_premium.end();

  std::unordered_map<std::string, std::optional<std::string>> sector_cache;
  std::map<std::tuple<std::string, Territory, int>, std::optional<double>> minwage_cache;

  for (auto& [k, ap] : acc) {
    const std::string estab(k.id);
    const int year = k.year;
    const Accum& a = *ap;
    const auto& at = attrs.at(k);
    auto sc = sector_cache.find(at.industry);
    if (sc == sector_cache.end()) sc = sector_cache.emplace(at.industry, sector_of(sectors, at.industry)).first;
    const auto& sector = sc->second;
    if (!sector) {
      ++panel.skipped_unmapped[at.industry];
      continue;
    }
    EstabRow row;
    row.estab_id = estab;
    row.year = year;
    row.industry = at.industry;
    row.market_industry = truncate_industry(at.industry, market.industry_digits);
    row.region = at.region;
    row.zone = zone_of(opt.delineation, at.region);
    row.sector = *sector;
    row.territory = opt.territory_of(at.region);
    row.wage_territory = row.territory;
    if (row.territory == Territory::berlin && !minwage.has_territory(row.sector, Territory::berlin)) {
      auto it = opt.berlin_assignment.find(row.sector);
      row.wage_territory = it == opt.berlin_assignment.end() ? Territory::west : it->second;
    }
    row.emp_ft = a.ft;
    row.emp_pt = a.pt;
    row.emp_marginal = a.marginal;
    row.emp_overall = a.ft + a.pt + a.marginal;
    if (!a.ft_wages.empty()) {
      double s = 0.0;
      for (double w : a.ft_wages) s += w;
      row.mean_wage = s / static_cast<double>(a.ft_wages.size());
      row.p05_wage = lower_quantile(a.ft_wages, 0.05);
      row.p25_wage = lower_quantile(a.ft_wages, 0.25);
      row.p50_wage = lower_quantile(a.ft_wages, 0.50);
      row.p75_wage = lower_quantile(a.ft_wages, 0.75);
      auto& v = st_wages[{row.sector, row.wage_territory, year}];
      for (double w : a.ft_wages) v.push_back(opt.wage_conversion.hourly(w));
    }
    if (auto cell = cell_hhi.find(MarketKey{row.market_industry, row.zone, year}); cell != cell_hhi.end())
      row.hhi_current = cell->second;
    {
      auto key = std::make_tuple(row.sector, row.wage_territory, year);
      auto mc = minwage_cache.find(key);
      if (mc == minwage_cache.end())
        mc = minwage_cache.emplace(key, minwage.in_force(row.sector, row.wage_territory, year)).first;
      row.minwage = mc->second;
    }
    if (row.minwage && row.p50_wage && *row.p50_wage > 0.0)
      row.kaitz = kaitz_index(*row.minwage, *row.p50_wage, opt.wage_conversion);
    if (auto it = opt.controls.sector.find({row.sector, row.wage_territory, year});
        it != opt.controls.sector.end()) {
      row.log_employment = it->second.log_employment;
      row.cba_share = it->second.cba_share;
    }
    while (akm != akm_end && akm->first < estab) ++akm;  // rows arrive in estab order
    if (akm != akm_end && akm->first == estab) row.akm_premium = akm->second;
    panel.rows.push_back(std::move(row));
  }

  // Per-establishment passes over its years (rows are sorted by estab, year).
  auto& rows = panel.rows;
  for (std::size_t lo = 0; lo < rows.size();) {
    std::size_t hi = lo;
    while (hi < rows.size() && rows[hi].estab_id == rows[lo].estab_id) ++hi;

    double hsum = 0.0, ksum = 0.0;
    int hn = 0, kn = 0;
    std::optional<std::size_t> first_reg;
    std::optional<double> earliest_hhi;
    for (std::size_t i = lo; i < hi; ++i) {
      if (rows[i].hhi_current) {
        hsum += *rows[i].hhi_current;
        ++hn;
        if (!earliest_hhi) earliest_hhi = rows[i].hhi_current;
      }
      if (rows[i].kaitz) {
        ksum += *rows[i].kaitz;
        ++kn;
      }
      if (rows[i].minwage && !first_reg) first_reg = i;
    }

    std::optional<double> predetermined;
    std::optional<int> reg_year;
    if (first_reg) {
      const auto& r0 = rows[*first_reg];
      reg_year = r0.year;
      auto cell = cell_hhi.find(MarketKey{r0.market_industry, r0.zone, r0.year - 1});
      if (cell != cell_hhi.end()) predetermined = cell->second;
    }
    if (!predetermined) predetermined = earliest_hhi;

    for (std::size_t i = lo; i < hi; ++i) {
      auto& r = rows[i];
      if (hn) r.hhi_avg = hsum / hn;
      r.hhi_predetermined = predetermined;
      if (kn) r.kaitz_avg = ksum / kn;
      r.first_regulated_year = reg_year;
      r.closure = (i + 1 == hi) && r.year < panel.data_end_year;
    }
    lo = hi;
  }

  // Implicit minimum wage: sector-territory p5 of hourly wages in the year
  // preceding the first minimum wage of the sector-territory.
  std::map<std::pair<std::string, Territory>, int> first_mw_year;
  for (const auto& r : rows) {
    if (!r.minwage) continue;
    auto key = std::make_pair(r.sector, r.wage_territory);
    auto it = first_mw_year.find(key);
    if (it == first_mw_year.end() || r.year < it->second) first_mw_year[key] = r.year;
  }
  std::map<std::tuple<std::string, Territory, int>, double> implicit;
  for (const auto& [key, first] : first_mw_year) {
    auto w = st_wages.find({key.first, key.second, first - 1});
    if (w != st_wages.end() && !w->second.empty())
      implicit[{key.first, key.second, first - 1}] = lower_quantile(w->second, 0.05);
  }
  for (auto& r : rows) {
    if (r.minwage) continue;
    auto it = implicit.find({r.sector, r.wage_territory, r.year});
    if (it != implicit.end()) r.implicit_minwage = it->second;
  }
  (void)first_year;
  return panel;
}

inline EstabPanel build_estab_panel(const std::vector<SnapshotRecord>& records,
                                    const SectorMap& sectors, const MinWageSchedule& minwage,
                                    const MarketPanel& market, const EstabPanelOptions& opt) {
  return build_estab_panel(records, prepare_records(records), sectors, minwage, market, opt);
}

inline const std::vector<std::string>& estab_panel_header() {
  static const std::vector<std::string> h{
      "estab_id",      "year",         "industry",        "market_industry",   "region",
      "zone",          "sector",       "territory",       "wage_territory",    "mean_wage",
      "p05_wage",      "p25_wage",     "p50_wage",        "p75_wage",          "emp_ft",
      "emp_pt",        "emp_marginal", "emp_overall",     "closure",           "hhi_current",
      "hhi_avg",       "hhi_predetermined", "minwage",    "implicit_minwage",  "first_regulated_year",
      "kaitz",         "kaitz_avg",    "log_employment",  "cba_share",         "akm_premium",
      "instrument"};
  return h;
}

inline std::string estab_panel_csv(const EstabPanel& p) {
  csv::Writer w(estab_panel_header());
  auto opt_int = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : p.rows) {
    w.row({r.estab_id, std::to_string(r.year), r.industry, r.market_industry, r.region, r.zone,
           r.sector, std::string(to_string(r.territory)), std::string(to_string(r.wage_territory)),
           csv::fmt(r.mean_wage), csv::fmt(r.p05_wage), csv::fmt(r.p25_wage), csv::fmt(r.p50_wage),
           csv::fmt(r.p75_wage), std::to_string(r.emp_ft), std::to_string(r.emp_pt),
           std::to_string(r.emp_marginal), std::to_string(r.emp_overall), r.closure ? "1" : "0",
           csv::fmt(r.hhi_current), csv::fmt(r.hhi_avg), csv::fmt(r.hhi_predetermined),
           csv::fmt(r.minwage), csv::fmt(r.implicit_minwage), opt_int(r.first_regulated_year),
           csv::fmt(r.kaitz), csv::fmt(r.kaitz_avg), csv::fmt(r.log_employment),
           csv::fmt(r.cba_share), csv::fmt(r.akm_premium), csv::fmt(r.instrument)});
  }
  return w.str();
}

inline EstabPanel read_estab_panel_csv(const csv::Table& t) {
  std::vector<std::size_t> col;
  for (const auto& name : estab_panel_header()) col.push_back(t.require(name));
  EstabPanel p;
  p.rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    std::size_t c = 0;
    auto next = [&]() -> const std::string& { return row[col[c++]]; };
    auto opt_d = [&]() -> std::optional<double> {
      const std::size_t k = col[c];
      const auto& s = next();
      if (s.empty()) return std::nullopt;
      return csv::field_double(t, r, k);
    };
    auto integer = [&]() {
      const std::size_t k = col[c++];
      return csv::field_int(t, r, k);
    };
    auto terr = [&]() {
      const auto& s = next();
      auto v = parse_territory(s);
      if (!v) throw ParseError(t.source + ": row " + std::to_string(r + 1) + ": bad territory");
      return *v;
    };
    EstabRow e;
    e.estab_id = next();
    e.year = static_cast<int>(integer());
    e.industry = next();
    e.market_industry = next();
    e.region = next();
    e.zone = next();
    e.sector = next();
    e.territory = terr();
    e.wage_territory = terr();
    e.mean_wage = opt_d();
    e.p05_wage = opt_d();
    e.p25_wage = opt_d();
    e.p50_wage = opt_d();
    e.p75_wage = opt_d();
    e.emp_ft = integer();
    e.emp_pt = integer();
    e.emp_marginal = integer();
    e.emp_overall = integer();
    e.closure = integer() != 0;
    e.hhi_current = opt_d();
    e.hhi_avg = opt_d();
    e.hhi_predetermined = opt_d();
    e.minwage = opt_d();
    e.implicit_minwage = opt_d();
    if (auto v = opt_d()) e.first_regulated_year = static_cast<int>(*v);
    e.kaitz = opt_d();
    e.kaitz_avg = opt_d();
    e.log_employment = opt_d();
    e.cba_share = opt_d();
    e.akm_premium = opt_d();
    e.instrument = opt_d();
    p.data_end_year = std::max(p.data_end_year, e.year);
    p.rows.push_back(std::move(e));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Outward mobility

struct MobilityStat {
  long long stayers = 0;  // switch establishment within the origin market
  long long movers = 0;   // switch to an establishment in another market
  double share() const { return static_cast<double>(movers) / static_cast<double>(stayers + movers); }
};

/// Share of job switchers leaving their market, keyed by the origin market
/// and origin year t-1 of a t-1 -> t establishment change. Market-years with
/// no switchers are absent from the result.
inline std::map<MarketKey, MobilityStat> outward_mobility(const std::vector<SnapshotRecord>& records,
                                                          const Delineation& delineation,
                                                          int industry_digits) {
  auto jobs = main_jobs(records);
  const auto attrs = detail::estab_attributes(records, jobs);
  std::sort(jobs.begin(), jobs.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(records[a].worker_id, records[a].year) < std::tie(records[b].worker_id, records[b].year);
  });
  auto market_of = [&](const SnapshotRecord& r) {
    const auto& a = attrs.at(detail::IdYear{r.estab_id, r.year});
    return MarketKey{truncate_industry(a.industry, industry_digits), zone_of(delineation, a.region),
                     r.year};
  };
  std::map<MarketKey, MobilityStat> out;
  for (std::size_t k = 1; k < jobs.size(); ++k) {
    const auto& prev = records[jobs[k - 1]];
    const auto& cur = records[jobs[k]];
    if (prev.worker_id != cur.worker_id || cur.year != prev.year + 1) continue;
    if (prev.estab_id == cur.estab_id) continue;
    const MarketKey from = market_of(prev);
    const MarketKey to = market_of(cur);
    auto& s = out[from];
    if (from.industry == to.industry && from.zone == to.zone)
      ++s.stayers;
    else
      ++s.movers;
  }
  return out;
}

}  // namespace monopsono
