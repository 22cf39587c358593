#include "hikeys/simnet.hpp"

#include <algorithm>
#include <deque>

#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"

namespace hikeys::simnet {

std::string_view to_string(EnergyRole role) {
  switch (role) {
    case EnergyRole::Tx: return "tx";
    case EnergyRole::Rx: return "rx";
    case EnergyRole::RelayTx: return "relay-tx";
    case EnergyRole::RelayRx: return "relay-rx";
  }
  return "?";
}

void EnergyLedger::add_node(NodeId node) {
  nodes_.try_emplace(node, NodeEnergy{params_.initial_joules, 0.0, 0.0, 0.0});
}

EnergyDebit EnergyLedger::debit(NodeId node, std::size_t bits, EnergyRole role) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) throw ArgumentError("no energy account for node " + std::to_string(node));
  const bool transmit = role == EnergyRole::Tx || role == EnergyRole::RelayTx;
  const double joules = (transmit ? params_.tx_power : params_.rx_power) * static_cast<double>(bits) / params_.bitrate;
  NodeEnergy& e = it->second;
  switch (role) {
    case EnergyRole::Tx: e.tx += joules; break;
    case EnergyRole::Rx: e.rx += joules; break;
    default: e.relay += joules; break;
  }
  e.remaining = std::max(0.0, params_.initial_joules - e.spent());
  return {node, role, joules};
}

const NodeEnergy& EnergyLedger::at(NodeId node) const {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) throw ArgumentError("no energy account for node " + std::to_string(node));
  return it->second;
}

bool EnergyLedger::dead(NodeId node) const {
  auto it = nodes_.find(node);
  return it != nodes_.end() && it->second.remaining <= 0.0;
}

double EnergyLedger::total_spent() const {
  double sum = 0.0;
  for (const auto& [id, e] : nodes_) sum += e.spent();
  return sum;
}

Simulator::Simulator(std::span<const topology::NodeSite> sites, EnergyParams energy) : ledger_(energy) {
  graph_ = topology::build_adjacency(sites);
  for (const auto& s : sites) {
    sites_[s.node_id] = s;
    ledger_.add_node(s.node_id);
  }
}

void Simulator::attach(const topology::NodeSite& site) {
  if (sites_.count(site.node_id)) throw ScenarioError("node id " + std::to_string(site.node_id) + " was used before");
  if (!(site.radio_range > 0)) throw ScenarioError("node " + std::to_string(site.node_id) + " has no radio range");
  sites_[site.node_id] = site;
  ledger_.add_node(site.node_id);
  graph_.add_node(site.node_id);
  for (NodeId other : graph_.node_ids()) {
    if (other != site.node_id && topology::in_range(site, sites_.at(other))) graph_.add_edge(site.node_id, other);
  }
  dist_cache_.clear();
}

void Simulator::detach(NodeId node) {
  if (!graph_.contains(node)) return;
  graph_.remove_node(node);
  departed_.insert(node);
  dist_cache_.clear();
}

const std::map<NodeId, std::size_t>& Simulator::distances_to(NodeId dst) {
  auto it = dist_cache_.find(dst);
  if (it != dist_cache_.end()) return it->second;
  std::map<NodeId, std::size_t> dist;
  if (graph_.contains(dst)) {
    std::deque<NodeId> queue{dst};
    dist[dst] = 0;
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      if (u != dst && !relays(u)) continue;
      for (NodeId v : graph_.neighbors(u)) {
        if (dist.emplace(v, dist[u] + 1).second) queue.push_back(v);
      }
    }
  }
  return dist_cache_[dst] = std::move(dist);
}

std::vector<NodeId> Simulator::shortest_path(NodeId src, NodeId dst) {
  if (!graph_.contains(src) || !graph_.contains(dst)) return {};
  const auto& dist = distances_to(dst);
  auto at = dist.find(src);
  if (at == dist.end()) return {};
  std::vector<NodeId> path{src};
  NodeId cur = src;
  std::size_t d = at->second;
  while (cur != dst) {
    NodeId next = 0;
    for (NodeId n : graph_.neighbors(cur)) {
      auto it = dist.find(n);
      if (it != dist.end() && it->second + 1 == d && (n == dst || relays(n))) {
        next = n;
        break;
      }
    }
    if (next == 0) return {};
    path.push_back(next);
    cur = next;
    --d;
  }
  return path;
}

std::vector<NodeId> Simulator::hearers(NodeId transmitter) const {
  std::vector<NodeId> out;
  if (graph_.contains(transmitter)) {
    const auto& n = graph_.neighbors(transmitter);
    out.assign(n.begin(), n.end());
  }
  return out;
}

std::vector<NodeId> Simulator::deliver(const Message& msg, const std::vector<NodeId>& audience,
                                       const crypto::Octets& sender_plaintext) {
  TranscriptEntry entry;
  entry.seq = transcript_.size();
  entry.time = now_;
  entry.message = msg;
  entry.audience = audience;
  entry.sender_plaintext = sender_plaintext;
  const std::size_t deaths_before = std::count_if(ledger_.nodes().begin(), ledger_.nodes().end(),
                                                  [](const auto& kv) { return kv.second.remaining <= 0.0; });
  const std::size_t bits = msg.size_bits;

  if (msg.scope.kind == protocol::ScopeKind::Unicast) {
    const NodeId dst = audience.empty() ? msg.scope.target : audience.front();
    entry.path = shortest_path(msg.src, dst);
    for (std::size_t i = 0; i + 1 < entry.path.size(); ++i) {
      const NodeId a = entry.path[i];
      const NodeId b = entry.path[i + 1];
      entry.debits.push_back(ledger_.debit(a, bits, i == 0 ? EnergyRole::Tx : EnergyRole::RelayTx));
      entry.debits.push_back(ledger_.debit(b, bits, b == dst ? EnergyRole::Rx : EnergyRole::RelayRx));
    }
    if (!entry.path.empty()) entry.reached.push_back(dst);
    entry.observers = entry.path;
  } else if (graph_.contains(msg.src)) {
    std::set<NodeId> transmitters{msg.src};
    std::set<NodeId> receivers;
    const std::set<NodeId> wanted(audience.begin(), audience.end());
    if (msg.scope.kind == protocol::ScopeKind::Neighbors) {
      for (NodeId n : graph_.neighbors(msg.src)) {
        if (wanted.count(n)) receivers.insert(n);
      }
    } else {
      // Flood along a breadth-first tree; only ancestors of audience nodes transmit.
      std::map<NodeId, NodeId> parent{{msg.src, msg.src}};
      std::deque<NodeId> queue{msg.src};
      while (!queue.empty()) {
        const NodeId u = queue.front();
        queue.pop_front();
        if (u != msg.src && !relays(u)) continue;
        for (NodeId v : graph_.neighbors(u)) {
          if (parent.emplace(v, u).second) queue.push_back(v);
        }
      }
      for (NodeId a : wanted) {
        if (!parent.count(a)) continue;
        receivers.insert(a);
        for (NodeId p = parent.at(a); p != msg.src; p = parent.at(p)) {
          transmitters.insert(p);
          receivers.insert(p);
        }
      }
    }
    entry.path.push_back(msg.src);
    for (NodeId t : transmitters) {
      if (t != msg.src) entry.path.push_back(t);
    }
    for (NodeId t : entry.path) {
      entry.debits.push_back(ledger_.debit(t, bits, t == msg.src ? EnergyRole::Tx : EnergyRole::RelayTx));
    }
    for (NodeId r : receivers) {
      entry.debits.push_back(ledger_.debit(r, bits, wanted.count(r) ? EnergyRole::Rx : EnergyRole::RelayRx));
    }
    for (NodeId a : audience) {
      if (receivers.count(a)) entry.reached.push_back(a);
    }
    std::set<NodeId> obs(transmitters);
    for (NodeId t : transmitters) {
      for (NodeId h : hearers(t)) obs.insert(h);
    }
    entry.observers.assign(obs.begin(), obs.end());
  }
  // A departed node may have moved anywhere; it hears whatever goes on air.
  if (!entry.path.empty()) {
    std::set<NodeId> obs(entry.observers.begin(), entry.observers.end());
    obs.insert(departed_.begin(), departed_.end());
    entry.observers.assign(obs.begin(), obs.end());
  }
  const std::size_t deaths_after = std::count_if(ledger_.nodes().begin(), ledger_.nodes().end(),
                                                 [](const auto& kv) { return kv.second.remaining <= 0.0; });
  if (deaths_after != deaths_before) dist_cache_.clear();
  std::vector<NodeId> reached = entry.reached;
  transcript_.push_back(std::move(entry));
  return reached;
}

namespace {

std::vector<topology::NodeSite> resolve_sites(const scenario::Scenario& sc, std::uint64_t seed) {
  if (!sc.sites.empty()) return sc.sites;
  generator::GeneratorOptions opts;
  opts.preset = *sc.hierarchy;
  opts.seed = seed;
  opts.area = sc.area;
  return generator::generate_layout(opts).sites;
}

}  // namespace

RunResult run(const scenario::Scenario& input, const RunOptions& options) {
  scenario::validate(input);
  const std::uint64_t seed = options.seed.value_or(input.seed);
  const auto sites = resolve_sites(input, seed);

  auto init = topology::initialize(sites, input.max_clusters_per_group);
  if (!init.graph.connected()) throw ScenarioError("initial topology is disconnected");

  Simulator sim(sites, input.energy);
  const crypto::DeterministicProvider provider;
  protocol::ProtocolConfig config = input.protocol_config();
  config.seed = seed;
  config.insecure_broadcast_leave = options.insecure_variant;
  protocol::Engine engine(config, provider, sim);

  SimulationReport report;
  report.seed = seed;
  report.random_width = config.random_width;
  report.hash = config.hash;
  report.insecure_variant = options.insecure_variant;

  auto note_issues = [&](const std::string& prefix) {
    for (const auto& i : engine.check_convergence()) report.convergence_issues.push_back(prefix + i);
    for (const auto& i : topology::check_hierarchy(engine.hierarchy())) report.convergence_issues.push_back(prefix + i);
  };

  engine.bootstrap(init.hierarchy, sites);
  note_issues("setup: ");

  std::vector<std::size_t> order(input.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return input.events[a].time < input.events[b].time; });
  for (std::size_t idx : order) {
    const auto& ev = input.events[idx];
    const std::string where = "event " + std::to_string(idx + 1) + ": ";
    sim.set_time(ev.time);
    switch (ev.kind) {
      case scenario::EventKind::Join:
        engine.handle_join(topology::NodeSite{ev.node, ev.position, ev.range}, ev.issuer);
        break;
      case scenario::EventKind::Leave:
        if (!engine.states().count(ev.node)) throw ScenarioError(where + "unknown node " + std::to_string(ev.node));
        engine.handle_leave(ev.node, ev.moves_into);
        break;
      case scenario::EventKind::Send:
        for (NodeId n : {ev.src, ev.dst}) {
          if (!engine.states().count(n)) throw ScenarioError(where + "unknown node " + std::to_string(n));
        }
        try {
          report.routes.push_back(engine.route(ev.src, ev.dst, ev.size_bits));
        } catch (const RoutingError& e) {
          report.failed_events.push_back({idx + 1, "send", e.what()});
        }
        break;
    }
    note_issues(where);
  }

  RunResult result;
  if (options.audit) {
    for (const auto& v : audit_secrecy(sim.transcript(), engine, provider)) {
      report.audit_violations.push_back(v.describe());
      (v.kind == ViolationKind::Forward ? report.forward_violations : report.backward_violations)++;
    }
  }

  report.node_count = sim.sites().size();
  report.transcript_length = sim.transcript().size();
  for (const auto& e : sim.transcript()) {
    ++report.counters.messages;
    const std::size_t tx = e.message.scope.is_broadcast() ? e.path.size() : (e.path.empty() ? 0 : e.path.size() - 1);
    report.counters.transmissions += tx;
    report.counters.bits_on_air += static_cast<std::uint64_t>(tx) * e.message.size_bits;
  }
  for (const auto& f : engine.flows()) {
    report.counters.rekey_broadcasts += f.wire_broadcasts;
    report.counters.rekey_unicasts += f.wire_unicasts;
  }
  report.flows = engine.flows();
  report.energy = sim.energy().nodes();
  report.total_energy = sim.energy().total_spent();
  report.hierarchy = engine.hierarchy();
  result.report = std::move(report);
  result.transcript = sim.transcript();
  return result;
}

std::vector<SweepRow> energy_sweep(const scenario::Scenario& input, std::vector<std::size_t> sizes) {
  if (sizes.empty()) throw ArgumentError("empty size list");
  if (std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw ArgumentError("message sizes must be positive");
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  scenario::Scenario base = input;
  base.sites = resolve_sites(input, input.seed);
  const bool has_data = std::any_of(base.events.begin(), base.events.end(),
                                    [](const auto& e) { return e.kind == scenario::EventKind::Send; });
  if (!has_data) {
    const auto init = topology::initialize(base.sites, base.max_clusters_per_group);
    const auto& first = init.hierarchy.clusters.begin()->second;
    double t = 0.0;
    for (const auto& e : base.events) t = std::max(t, e.time);
    for (NodeId m : first.members) {
      if (m == first.head) continue;
      scenario::Event ev;
      ev.time = t + 1.0;
      ev.kind = scenario::EventKind::Send;
      ev.src = first.head;
      ev.dst = m;
      base.events.push_back(ev);
    }
  }

  std::vector<SweepRow> rows;
  RunOptions opts;
  opts.audit = false;
  for (std::size_t size : sizes) {
    scenario::Scenario sc = base;
    for (auto& e : sc.events) {
      if (e.kind == scenario::EventKind::Send) e.size_bits = size;
    }
    const auto result = run(sc, opts);
    const double total = result.report.total_energy;
    rows.push_back({size, total / static_cast<double>(result.report.node_count), total});
  }
  return rows;
}

}  // namespace hikeys::simnet
