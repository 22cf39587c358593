#include "hikeys/costmodel.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"

namespace hikeys::cost {
namespace {

std::int64_t ceil_log2(std::int64_t n) {
  std::int64_t bits = 0;
  while ((std::int64_t{1} << bits) < n) ++bits;
  return bits;
}

void require_positive(const CostParams& p) {
  if (p.N <= 0 || p.M <= 0 || p.P <= 0 || p.G <= 0) throw ArgumentError("N, M, P and G must be positive");
}

std::string triple(const CostRow& r) {
  return "(" + std::to_string(r.rounds) + "," + std::to_string(r.broadcasts) + "," + std::to_string(r.unicasts) + ")";
}

const ReceiverRow* receiver_row(const std::vector<ReceiverRow>& rows, const std::string& event) {
  for (const auto& r : rows) {
    if (r.event == event) return &r;
  }
  return nullptr;
}

}  // namespace

std::string_view to_string(EventClass cls) {
  switch (cls) {
    case EventClass::Join: return "join";
    case EventClass::MemberLeave: return "cl-leave";
    case EventClass::GatewayLeave: return "gateway-leave";
    case EventClass::HeadLeave: return "ch-leave";
    case EventClass::LeaderLeave: return "gl-leave";
  }
  return "?";
}

std::optional<EventClass> event_class_of(protocol::FlowClass cls) {
  switch (cls) {
    case protocol::FlowClass::Join: return EventClass::Join;
    case protocol::FlowClass::MemberLeave: return EventClass::MemberLeave;
    case protocol::FlowClass::GatewayLeave: return EventClass::GatewayLeave;
    case protocol::FlowClass::HeadLeave: return EventClass::HeadLeave;
    case protocol::FlowClass::LeaderLeave: return EventClass::LeaderLeave;
    default: return std::nullopt;
  }
}

CostRow expected_row(const CostParams& p, EventClass cls) {
  require_positive(p);
  const std::string ev(to_string(cls));
  switch (cls) {
    case EventClass::Join: return {"Ours", ev, 1, 1, 0};
    case EventClass::MemberLeave: return {"Ours", ev, 1, 0, p.P - 1};
    case EventClass::GatewayLeave: return {"Ours", ev, 1, 0, 2 * (p.P - 1)};
    case EventClass::HeadLeave: return {"Ours", ev, 1, 0, p.M + p.P - 2};
    case EventClass::LeaderLeave: return {"Ours", ev, 1, 0, p.G + p.P + p.M - 3};
  }
  return {};
}

std::vector<CostRow> cost_table(const CostParams& p) {
  require_positive(p);
  const std::int64_t lg = ceil_log2(p.N);
  std::vector<CostRow> rows{
      {"BD", "rekey", 3, 2 * p.N, 0},
      {"GDH", "rekey", p.N, p.N, p.N - 1},
      {"D-LKH", "rekey", 3, 1, p.N},
      {"D-OFT", "rekey", lg, 0, 2 * lg},
      {"CRTDH", "rekey", 1, 1, 0},
      {"Modified CRTDH", "rekey", 1, 1, 0},
  };
  for (EventClass c : kEventClasses) rows.push_back(expected_row(p, c));
  return rows;
}

const std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>, std::array<std::int64_t, 4>>&
published_receivers() {
  static const std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>, std::array<std::int64_t, 4>>
      table{
          {{256, 8, 16, 2}, {15, 15, 32, 34}},
          {{256, 4, 16, 4}, {16, 15, 32, 36}},
          {{256, 4, 8, 8}, {8, 7, 40, 44}},
          {{256, 4, 4, 16}, {4, 3, 68, 72}},
          {{256, 2, 4, 32}, {4, 3, 68, 70}},
      };
  return table;
}

std::vector<ReceiverRow> receiver_counts(const CostParams& p) {
  require_positive(p);
  const auto it = published_receivers().find({p.N, p.M, p.P, p.G});
  auto row = [&](std::string event, std::int64_t value, int published) {
    ReceiverRow r{std::move(event), value, p.N, std::nullopt, std::nullopt};
    if (it != published_receivers().end() && published >= 0) {
      r.published = it->second[static_cast<std::size_t>(published)];
      r.delta = *r.published - value;
    }
    return r;
  };
  return {
      row("join", p.P - 1, 0),
      row("cl-leave", p.P - 1, 1),
      row("gateway-leave", 2 * (p.P - 1), -1),
      row("ch-leave", p.M + p.P - 2, 2),
      row("gl-leave", p.G + p.P + p.M - 3, 3),
  };
}

std::string render_text(const CostParams& p) {
  const auto rows = cost_table(p);
  const auto recv = receiver_counts(p);
  std::ostringstream out;
  out << "N=" << p.N << " M=" << p.M << " P=" << p.P << " G=" << p.G << "\n";
  if (!p.consistent()) {
    out << "warning: N=" << p.N << " differs from G*M*P=" << p.G * p.M * p.P << "\n";
  }
  out << "\n" << std::left << std::setw(16) << "scheme" << std::setw(15) << "event" << std::right << std::setw(8)
      << "rounds" << std::setw(12) << "broadcasts" << std::setw(10) << "unicasts" << std::setw(11) << "receivers"
      << std::setw(8) << "publ." << std::setw(7) << "delta" << "\n";
  for (const auto& r : rows) {
    const bool ours = r.scheme == "Ours";
    const ReceiverRow* rr = ours ? receiver_row(recv, r.event) : nullptr;
    out << std::left << std::setw(16) << r.scheme << std::setw(15) << r.event << std::right << std::setw(8) << r.rounds
        << std::setw(12) << r.broadcasts << std::setw(10) << r.unicasts << std::setw(11)
        << (ours ? std::to_string(rr->hierarchical) : std::to_string(p.N)) << std::setw(8)
        << (rr && rr->published ? std::to_string(*rr->published) : "-") << std::setw(7)
        << (rr && rr->delta ? std::to_string(*rr->delta) : "-") << "\n";
  }
  bool flagged = false;
  for (const auto& r : recv) {
    if (r.delta && *r.delta != 0) {
      if (!flagged) out << "\n";
      flagged = true;
      out << "delta: " << r.event << " published " << *r.published << ", formula gives " << r.hierarchical << "\n";
    }
  }
  return out.str();
}

std::string render_csv(const CostParams& p) {
  const auto rows = cost_table(p);
  const auto recv = receiver_counts(p);
  std::ostringstream out;
  out << "scheme,event,rounds,broadcasts,unicasts,receivers,paper_value,delta\n";
  for (const auto& r : rows) {
    const ReceiverRow* rr = r.scheme == "Ours" ? receiver_row(recv, r.event) : nullptr;
    out << r.scheme << "," << r.event << "," << r.rounds << "," << r.broadcasts << "," << r.unicasts << ","
        << (rr ? rr->hierarchical : p.N) << "," << (rr && rr->published ? std::to_string(*rr->published) : "")
        << "," << (rr && rr->delta ? std::to_string(*rr->delta) : "") << "\n";
  }
  return out.str();
}

std::vector<CheckResult> crosscheck(const simnet::SimulationReport& report, const CostParams& params) {
  std::vector<CheckResult> out;
  for (EventClass c : kEventClasses) {
    CheckResult res;
    res.cls = c;
    res.expected = expected_row(params, c);
    res.pass = true;
    for (const auto& f : report.flows) {
      if (f.rejected || event_class_of(f.cls) != c) continue;
      res.exercised = true;
      const CostRow seen{"Ours", res.expected.event, static_cast<std::int64_t>(f.rounds),
                         static_cast<std::int64_t>(f.billed_broadcasts), static_cast<std::int64_t>(f.billed_unicasts)};
      res.observed = seen;
      if (seen.rounds != res.expected.rounds || seen.broadcasts != res.expected.broadcasts ||
          seen.unicasts != res.expected.unicasts) {
        res.pass = false;
        break;
      }
    }
    if (!res.exercised) {
      res.message = res.expected.event + ": not exercised";
    } else if (res.pass) {
      res.message = res.expected.event + ": ok " + triple(res.expected);
    } else {
      const bool by_broadcast = c == EventClass::Join;
      res.message = res.expected.event + ": expected " +
                    std::to_string(by_broadcast ? res.expected.broadcasts : res.expected.unicasts) + ", observed " +
                    std::to_string(by_broadcast ? res.observed.broadcasts : res.observed.unicasts) + " " +
                    triple(res.expected) + " vs " + triple(res.observed);
    }
    out.push_back(std::move(res));
  }
  return out;
}

scenario::Scenario crosscheck_scenario(const scenario::HierarchyPreset& preset, EventClass cls, std::uint64_t seed) {
  generator::GeneratorOptions opts;
  opts.preset = preset;
  opts.seed = seed;
  const auto layout = generator::generate_layout(opts);
  scenario::Scenario s;
  s.seed = seed;
  s.hierarchy = preset;
  s.max_clusters_per_group = preset.clusters_per_group;
  s.sites = layout.sites;
  const auto init = topology::initialize(s.sites, s.max_clusters_per_group);
  const auto& h = init.hierarchy;
  const std::size_t k = h.clusters.size();

  scenario::Event ev;
  ev.time = 1.0;
  ev.kind = scenario::EventKind::Leave;
  switch (cls) {
    case EventClass::Join: {
      const topology::ClusterId target = k > 1 ? 2 : 1;
      const auto head = h.clusters.at(target).head;
      const auto centre = layout.head_positions[head - 1];
      topology::Position best = centre;
      double best_gap = -1;
      for (int deg = 0; deg < 360; deg += 5) {
        const double a = deg * std::acos(-1.0) / 180.0;
        const topology::Position q{centre.x + 0.3 * layout.range * std::cos(a),
                                   centre.y + 0.3 * layout.range * std::sin(a)};
        double gap = 1e300;
        for (const auto& site : s.sites) {
          if (site.node_id != head) gap = std::min(gap, topology::distance(q, site.position));
        }
        if (gap > best_gap) {
          best_gap = gap;
          best = q;
        }
      }
      ev.kind = scenario::EventKind::Join;
      ev.node = static_cast<NodeId>(s.sites.size() + 1);
      ev.position = best;
      ev.range = layout.range;
      break;
    }
    case EventClass::MemberLeave: {
      for (const auto& [cid, c] : h.clusters) {
        for (auto it = c.members.rbegin(); it != c.members.rend() && ev.node == 0; ++it) {
          if (*it != c.head && !h.is_gateway(*it)) ev.node = *it;
        }
        if (ev.node != 0) break;
      }
      if (ev.node == 0) throw ArgumentError("preset has no plain member");
      break;
    }
    case EventClass::GatewayLeave:
      if (h.links.empty()) throw ArgumentError("preset has no gateway");
      ev.node = h.links.front().gateway;
      break;
    case EventClass::HeadLeave:
      for (auto it = h.clusters.rbegin(); it != h.clusters.rend(); ++it) {
        if (!h.is_group_leader(it->second.head)) {
          ev.node = it->second.head;
          break;
        }
      }
      if (ev.node == 0) throw ArgumentError("preset has no plain cluster head");
      break;
    case EventClass::LeaderLeave:
      ev.node = h.network_leader;
      break;
  }
  s.events.push_back(ev);
  return s;
}

}  // namespace hikeys::cost
