#pragma once

#include <cstdint>
#include <map>
#include <array>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "hikeys/protocol.hpp"
#include "hikeys/scenario.hpp"
#include "hikeys/simnet.hpp"

namespace hikeys::cost {

/// N network size, M clusters per group, P cluster size, G groups.
struct CostParams {
  std::int64_t N = 256;
  std::int64_t M = 8;
  std::int64_t P = 16;
  std::int64_t G = 2;
  bool consistent() const { return N == G * M * P; }
  bool operator==(const CostParams&) const = default;
};

struct CostRow {
  std::string scheme;
  std::string event;
  std::int64_t rounds = 0;
  std::int64_t broadcasts = 0;
  std::int64_t unicasts = 0;
  bool operator==(const CostRow&) const = default;
};

/// Throws ArgumentError on a non-positive parameter.
std::vector<CostRow> cost_table(const CostParams& params);

/// Event classes of the hierarchical scheme, in table order.
enum class EventClass { Join, MemberLeave, GatewayLeave, HeadLeave, LeaderLeave };
inline constexpr EventClass kEventClasses[] = {EventClass::Join, EventClass::MemberLeave, EventClass::GatewayLeave,
                                               EventClass::HeadLeave, EventClass::LeaderLeave};
std::string_view to_string(EventClass cls);
std::optional<EventClass> event_class_of(protocol::FlowClass cls);
CostRow expected_row(const CostParams& params, EventClass cls);

struct ReceiverRow {
  std::string event;
  std::int64_t hierarchical = 0;
  std::int64_t flat = 0;
  std::optional<std::int64_t> published;  // printed comparison table, when the row exists
  std::optional<std::int64_t> delta;        // published - hierarchical
  bool operator==(const ReceiverRow&) const = default;
};

/// Receivers per event class next to the flat scheme's N and the published table.
std::vector<ReceiverRow> receiver_counts(const CostParams& params);

/// Published receiver table: (N, M, P, G) -> join, leave, CH leave, GL leave.
const std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>, std::array<std::int64_t, 4>>&
published_receivers();

std::string render_text(const CostParams& params);
/// Columns: scheme,event,rounds,broadcasts,unicasts,receivers,paper_value,delta
std::string render_csv(const CostParams& params);

struct CheckResult {
  EventClass cls = EventClass::Join;
  bool exercised = false;
  bool pass = false;
  CostRow expected;
  CostRow observed;  // first mismatching flow, or the last one checked
  std::string message;
};

/// Compares the billed counters of every flow in the report with
/// the closed forms, per event class.
std::vector<CheckResult> crosscheck(const simnet::SimulationReport& report, const CostParams& params);

/// Generated preset scenario with one event of the given class.
scenario::Scenario crosscheck_scenario(const scenario::HierarchyPreset& preset, EventClass cls, std::uint64_t seed);

}  // namespace hikeys::cost
