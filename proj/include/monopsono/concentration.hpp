#pragma once

// Absolute concentration indices over employer shares of one labor market,
// antitrust-style classification bands, and weighted distributional
// summaries across markets.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace monopsono {

/// Non-empty vector of market shares, each in (0, 1], summing to 1.
class ShareVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ShareVector(std::vector<double> shares) : shares_(std::move(shares)) {
    if (shares_.empty()) throw DomainError("share vector is empty");
    double sum = 0.0;
    for (double s : shares_) {
      if (!(s > 0.0 && s <= 1.0)) throw DomainError("share outside (0,1]: " + csv::fmt(s));
      sum += s;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw DomainError("shares sum to " + csv::fmt(sum) + ", expected 1");
    const auto [lo, hi] = std::minmax_element(shares_.begin(), shares_.end());
    uniform_ = (*lo == *hi);
  }

  /// Normalizes non-negative counts; zero counts are dropped.
  template <class Range>
  static ShareVector from_counts(const Range& counts) {
    double total = 0.0;
    for (auto c : counts) {
      if (c < 0) throw DomainError("negative count");
      total += static_cast<double>(c);
    }
    if (!(total > 0.0)) throw DomainError("share vector is empty");
    std::vector<double> s;
    for (auto c : counts)
      if (c > 0) s.push_back(static_cast<double>(c) / total);
    return ShareVector(std::move(s));
  }

  std::span<const double> values() const { return shares_; }
  std::size_t size() const { return shares_.size(); }
  // True when every share is bitwise identical, i.e. shares are 1/J.
  bool uniform() const { return uniform_; }

  std::vector<double> sorted_descending() const {
    std::vector<double> s = shares_;
    std::stable_sort(s.begin(), s.end(), std::greater<>());
    return s;
  }

 private:
  std::vector<double> shares_;
  bool uniform_ = false;
};

// At equal shares every index collapses to 1/J; the uniform branches return
// that value directly so the identity holds without rounding.

inline double hhi(const ShareVector& v) {
  if (v.uniform()) return 1.0 / static_cast<double>(v.size());
  double s = 0.0;
  for (double e : v.values()) s += e * e;
  return s;
}

/// Rosenbluth index 1 / (2 * sum_j e_j * j - 1), ranks j descending by share.
inline double rosenbluth(const ShareVector& v) {
  if (v.uniform()) return 1.0 / static_cast<double>(v.size());
  const auto sorted = v.sorted_descending();
  double s = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) s += sorted[j] * static_cast<double>(j + 1);
  return 1.0 / (2.0 * s - 1.0);
}

/// Sum of the k largest shares.
inline double concentration_ratio(const ShareVector& v, std::size_t k) {
  if (k == 0) throw DomainError("concentration ratio needs k >= 1");
  if (k >= v.size()) return 1.0;
  const auto sorted = v.sorted_descending();
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += sorted[j];
  return std::min(s, 1.0);
}

inline double inverse_number(std::size_t j) {
  if (j == 0) throw DomainError("inverse number of subjects needs j >= 1");
  return 1.0 / static_cast<double>(j);
}

/// Product of e_j^{e_j}, evaluated as exp(sum e_j ln e_j).
inline double exponential_index(const ShareVector& v) {
  if (v.uniform()) return 1.0 / static_cast<double>(v.size());
  double s = 0.0;
  for (double e : v.values()) s += e * std::log(e);
  return std::exp(s);
}

/// Number of equal-sized employers that would produce the given index.
inline double equivalent_number(double index) {
  if (!(index > 0.0)) throw DomainError("equivalent number needs a positive index");
  return 1.0 / index;
}

enum class Band { low, medium, high };

inline std::string_view to_string(Band b) {
  switch (b) {
    case Band::low: return "low";
    case Band::medium: return "medium";
    case Band::high: return "high";
  }
  return "low";
}

// Left-closed boundaries: [0, 0.1) low, [0.1, 0.2) medium, [0.2, 1] high.
inline Band classify_band(double hhi_value) {
  if (!(hhi_value >= 0.0 && hhi_value <= 1.0))
    throw DomainError("HHI outside [0,1]: " + csv::fmt(hhi_value));
  if (hhi_value < 0.1) return Band::low;
  if (hhi_value < 0.2) return Band::medium;
  return Band::high;
}

struct WeightedSummary {
  double mean = 0.0;
  double sd = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double share_medium = 0.0;  // weight share with value in [0.1, 0.2)
  double share_high = 0.0;    // weight share with value in [0.2, 1]
  std::size_t n = 0;
};

/// Weighted mean / SD and weighted percentiles by cumulative-weight inversion:
/// the q-th percentile is the smallest value whose cumulative weight share
/// reaches q (lower interpolation).
inline WeightedSummary weighted_summary(std::span<const double> values,
                                        std::span<const double> weights) {
  if (values.size() != weights.size()) throw DomainError("values and weights differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("total weight is zero");

  WeightedSummary out;
  out.n = values.size();
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    var += weights[i] * d * d;
    if (weights[i] > 0.0) {
      if (values[i] >= 0.2)
        out.share_high += weights[i];
      else if (values[i] >= 0.1)
        out.share_medium += weights[i];
    }
  }
  out.mean = mean;
  out.sd = std::sqrt(var / total);
  out.share_high /= total;
  out.share_medium /= total;

  auto quantile = [&](double q) {
    const double target = q * total * (1.0 - 1e-14);
    double cum = 0.0;
    for (std::size_t idx : order) {
      cum += weights[idx];
      if (weights[idx] > 0.0 && cum >= target) return values[idx];
    }
    return values[order.back()];
  };
  out.p25 = quantile(0.25);
  out.p50 = quantile(0.50);
  out.p75 = quantile(0.75);
  bool first = true;
  for (std::size_t idx : order) {
    if (weights[idx] <= 0.0) continue;
    if (first) out.min = values[idx];
    out.max = values[idx];
    first = false;
  }
  return out;
}

struct ConcentrationRow {
  MarketKey key;
  std::size_t j = 0;
  double hhi = 0.0;
  double rbi = 0.0;
  double cr1 = 0.0;
  double ins = 0.0;
  double exp = 0.0;
  Band band = Band::low;
  ObjectKind object_kind = ObjectKind::employment;
  long long total = 0;
};

inline ConcentrationRow concentration_row(const MarketKey& key, const MarketCell& cell,
                                          ObjectKind kind) {
  const ShareVector v(cell.shares());
  ConcentrationRow r;
  r.key = key;
  r.j = v.size();
  r.hhi = hhi(v);
  r.rbi = rosenbluth(v);
  r.cr1 = concentration_ratio(v, 1);
  r.ins = inverse_number(v.size());
  r.exp = exponential_index(v);
  r.band = classify_band(r.hhi);
  r.object_kind = kind;
  r.total = cell.total;
  return r;
}

/// One row per market-year, in key order.
inline std::vector<ConcentrationRow> concentration_table(const MarketPanel& panel) {
  std::vector<ConcentrationRow> rows;
  rows.reserve(panel.cells.size());
  for (const auto& [key, cell] : panel.cells)
    rows.push_back(concentration_row(key, cell, panel.object_kind));
  return rows;
}

inline std::string concentration_csv(const std::vector<ConcentrationRow>& rows) {
  csv::Writer w({"industry", "zone", "year", "j", "hhi", "rbi", "cr1", "ins", "exp", "band",
                 "object_kind"});
  for (const auto& r : rows) {
    w.row({r.key.industry, r.key.zone, std::to_string(r.key.year), std::to_string(r.j),
           csv::fmt(r.hhi), csv::fmt(r.rbi), csv::fmt(r.cr1), csv::fmt(r.ins), csv::fmt(r.exp),
           std::string(to_string(r.band)), std::string(to_string(r.object_kind))});
  }
  return w.str();
}

inline std::vector<ConcentrationRow> read_concentration_csv(const csv::Table& t) {
  const auto ci = t.require("industry"), cz = t.require("zone"), cy = t.require("year"),
             cj = t.require("j"), ch = t.require("hhi"), crb = t.require("rbi"),
             cc = t.require("cr1"), cins = t.require("ins"), ce = t.require("exp"),
             cb = t.require("band"), co = t.require("object_kind");
  std::vector<ConcentrationRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ConcentrationRow row;
    row.key = {t.rows[r][ci], t.rows[r][cz], static_cast<int>(csv::field_int(t, r, cy))};
    row.j = static_cast<std::size_t>(csv::field_int(t, r, cj));
    row.hhi = csv::field_double(t, r, ch);
    row.rbi = csv::field_double(t, r, crb);
    row.cr1 = csv::field_double(t, r, cc);
    row.ins = csv::field_double(t, r, cins);
    row.exp = csv::field_double(t, r, ce);
    row.band = classify_band(row.hhi);
    if (t.rows[r][cb] != to_string(row.band))
      throw ParseError(t.source + ": row " + std::to_string(r + 1) + ", column band: inconsistent");
    row.object_kind = parse_object_kind(t.rows[r][co]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace monopsono
