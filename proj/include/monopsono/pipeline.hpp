#pragma once

// In-memory pipeline from worker snapshots to the instrumented
// concentration regression.

#include <set>
#include <string>
#include <vector>

#include "concentration.hpp"
#include "data_model.hpp"
#include "econometrics.hpp"
#include "minwage_analysis.hpp"

namespace monopsono {

struct PipelineInputs {
  const std::vector<SnapshotRecord>* records = nullptr;
  Delineation delineation;
  SectorMap sectors;
  MinWageSchedule minwage;
  Controls controls;
  int industry_digits = 4;
  ObjectKind object_kind = ObjectKind::employment;
  bool strict_zone_count = false;
};

struct Ingested {
  MarketPanel market;
  EstabPanel estab;
  std::map<MarketKey, double> instrument;
};

inline std::size_t zone_count(const Delineation& d) {
  std::set<std::string> zones;
  for (const auto& [district, zone] : d) zones.insert(zone);
  return zones.size();
}

inline Ingested ingest(const PipelineInputs& in) {
  if (!in.records) throw DomainError("pipeline has no records");
  Ingested out;
  const auto prepared = prepare_records(*in.records);
  out.market = build_market_panel(*in.records, prepared, in.delineation, in.industry_digits, in.object_kind);
  out.instrument = leave_one_out_instrument(out.market, zone_count(in.delineation), in.strict_zone_count);
  EstabPanelOptions opt;
  opt.delineation = in.delineation;
  opt.controls = in.controls;
  out.estab = build_estab_panel(*in.records, prepared, in.sectors, in.minwage, out.market, opt);
  attach_instrument(out.estab, out.instrument);
  return out;
}

}  // namespace monopsono
