#include "hikeys/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hikeys/errors.hpp"
#include "hikeys/simnet.hpp"

namespace hikeys::generator {
namespace {

using topology::Position;
constexpr double kPi = std::numbers::pi;

Position add(Position a, Position b, double s = 1.0) { return {a.x + s * b.x, a.y + s * b.y}; }

Position unit(Position from, Position to) {
  const double d = topology::distance(from, to);
  return {(to.x - from.x) / d, (to.y - from.y) / d};
}

/// Chain of head positions in units of the radio range.
std::vector<Position> chain(std::size_t k, std::size_t columns) {
  std::vector<Position> out;
  std::size_t row = 0;
  while (out.size() < k) {
    for (std::size_t j = 0; j < columns && out.size() < k; ++j) {
      const std::size_t col = row % 2 == 0 ? j : columns - 1 - j;
      out.push_back({static_cast<double>(col) * 1.8, static_cast<double>(row) * 3.6});
    }
    if (out.size() < k) {
      const std::size_t col = row % 2 == 0 ? columns - 1 : 0;
      out.push_back({static_cast<double>(col) * 1.8, static_cast<double>(row) * 3.6 + 1.8});
    }
    ++row;
  }
  return out;
}

double extent(const std::vector<Position>& pts) {
  double w = 0, h = 0;
  for (const auto& p : pts) {
    w = std::max(w, p.x);
    h = std::max(h, p.y);
  }
  return std::max(w, h) + 2.0;
}

struct Attempt {
  std::vector<topology::NodeSite> sites;
  std::vector<std::set<NodeId>> members;   // per cluster, head first id
  std::vector<NodeId> gateways;            // per link
};

Position rotate(Position u, double deg) {
  const double a = deg * kPi / 180.0;
  return {u.x * std::cos(a) - u.y * std::sin(a), u.x * std::sin(a) + u.y * std::cos(a)};
}

Attempt build(const std::vector<Position>& heads, std::size_t p, bool cross, std::uint64_t seed) {
  // Works in units of the radio range; the caller scales.
  const std::size_t k = heads.size();
  std::mt19937_64 rng(seed);
  struct Placed {
    Position pos;
    std::size_t cluster;
    bool gateway;
  };
  std::vector<Placed> placed;
  Attempt at;
  at.members.resize(k);
  auto place = [&](std::size_t cluster, Position pos, bool gateway = false) {
    const NodeId id = static_cast<NodeId>(placed.size() + 1);
    placed.push_back({pos, cluster, gateway});
    at.members[cluster].insert(id);
    return id;
  };
  for (std::size_t c = 0; c < k; ++c) place(c, heads[c]);

  // Side of each link that keeps cross pairs away from other heads.
  std::vector<Position> side(k > 0 ? k - 1 : 0);
  for (std::size_t l = 0; l + 1 < k; ++l) {
    const Position u = unit(heads[l], heads[l + 1]);
    double best_gap = -1;
    for (double s : {1.0, -1.0}) {
      const Position v{-u.y * s, u.x * s};
      const Position a = add(add(heads[l], u, 0.42), v, 0.9);
      const Position b = add(add(heads[l + 1], u, -0.42), v, 0.9);
      double gap = 1e9;
      for (std::size_t o = 0; o < k; ++o) {
        if (o != l && o != l + 1) gap = std::min({gap, topology::distance(a, heads[o]), topology::distance(b, heads[o])});
      }
      if (gap > best_gap + 1e-9) {
        best_gap = gap;
        side[l] = v;
      }
    }
  }

  std::vector<std::size_t> budget(k);
  for (std::size_t c = 0; c < k; ++c) budget[c] = c == 0 ? p : p - 1;
  for (std::size_t l = 0; l + 1 < k; ++l) {
    const Position u = unit(heads[l], heads[l + 1]);
    at.gateways.push_back(place(l, add(heads[l], u, 0.9), true));
    if (cross) {
      place(l, add(add(heads[l], u, 0.42), side[l], 0.9));
      place(l + 1, add(add(heads[l + 1], u, -0.42), side[l], 0.9));
    }
  }
  // Chain ends get a member next to their gateway so the chain survives the
  // loss of the end head. The gateway must still not out-degree the heads.
  if (k > 1 && p >= 4) {
    const Position u = unit(heads[0], heads[1]);
    if (at.members[0].size() < budget[0]) {
      place(0, add(heads[0], rotate(u, 70.0 * (side[0].x * -u.y + side[0].y * u.x > 0 ? -1 : 1)), 0.45));
    }
    const Position w = unit(heads[k - 1], heads[k - 2]);
    const Position sv = side[k - 2];
    if ((k > 2 || p >= 5) && at.members[k - 1].size() < budget[k - 1]) {
      place(k - 1, add(heads[k - 1], rotate(w, 70.0 * (sv.x * -w.y + sv.y * w.x > 0 ? -1 : 1)), 0.45));
    }
  }

  for (std::size_t c = 0; c < k; ++c) {
    if (at.members[c].size() > budget[c]) throw ScenarioError("cluster too small for its links");
  }
  std::uniform_int_distribution<std::size_t> pick_offset(0, 1u << 20);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t plain = budget[c] - at.members[c].size();
    if (plain == 0) continue;
    // Candidates hear their own head only: no gateway, no node of another cluster.
    std::vector<Position> cand;
    for (int deg = 0; deg < 360; ++deg) {
      for (double r = 0.45; r <= 0.701; r += 0.05) {
        const Position q = add(heads[c], {std::cos(deg * kPi / 180.0), std::sin(deg * kPi / 180.0)}, r);
        bool ok = true;
        for (const auto& o : placed) {
          const double d = topology::distance(q, o.pos);
          if ((o.gateway || o.cluster != c) && d < 1.02) ok = false;
          if (d < 0.02) ok = false;
        }
        if (ok) cand.push_back(q);
      }
    }
    if (cand.size() < plain) throw ScenarioError("no room for the members of a cluster");
    const std::size_t offset = pick_offset(rng) % cand.size();
    for (std::size_t i = 0; i < plain; ++i) {
      const auto idx = (offset + static_cast<std::size_t>((static_cast<double>(i) + 0.5) * cand.size() / plain)) % cand.size();
      place(c, cand[idx]);
    }
  }
  for (const auto& pl : placed) {
    at.sites.push_back({static_cast<NodeId>(at.sites.size() + 1), pl.pos, 1.0});
  }
  return at;
}

bool realizes(const Attempt& at, std::size_t k, std::size_t m, std::size_t p, std::size_t g) {
  const auto init = topology::initialize(at.sites, m);
  if (!init.graph.connected()) return false;
  const auto& h = init.hierarchy;
  if (h.clusters.size() != k || h.groups.size() != g) return false;
  for (std::size_t c = 0; c < k; ++c) {
    const auto it = h.clusters.find(static_cast<topology::ClusterId>(c + 1));
    if (it == h.clusters.end() || it->second.head != c + 1 || it->second.members != at.members[c]) return false;
    if (h.key_holders(it->first).size() != p) return false;
  }
  if (h.links.size() + 1 != k) return false;
  for (std::size_t l = 0; l + 1 < k; ++l) {
    const topology::GatewayLink want{at.gateways[l], static_cast<topology::ClusterId>(l + 1),
                                     static_cast<topology::ClusterId>(l + 2)};
    if (std::find(h.links.begin(), h.links.end(), want) == h.links.end()) return false;
  }
  for (const auto& [gid, grp] : h.groups) {
    if (grp.clusters.size() != m) return false;
  }
  return topology::check_hierarchy(h, &init.graph).empty();
}

}  // namespace

Layout generate_layout(const GeneratorOptions& options) {
  const auto& pr = options.preset;
  const std::size_t g = pr.groups, m = pr.clusters_per_group, p = pr.cluster_size;
  if (g == 0 || m == 0 || p == 0) throw ScenarioError("hierarchy sizes must be positive");
  const std::size_t k = g * m;
  if (k > 1 && p < 3) throw ScenarioError("linked clusters need a cluster size of at least 3");

  std::size_t best_cols = 1;
  double best_extent = 1e300;
  for (std::size_t cols = 1; cols <= k; ++cols) {
    const double e = extent(chain(k, cols));
    if (e < best_extent - 1e-9) {
      best_extent = e;
      best_cols = cols;
    }
  }
  const auto heads = chain(k, best_cols);
  double r = options.max_range;
  if (options.area > 0) r = std::min(r, options.area / best_extent);
  if (r < options.min_range) {
    throw ScenarioError("a " + std::to_string(g) + "x" + std::to_string(m) + "x" + std::to_string(p) +
                        " hierarchy does not fit in the area; try a larger --area");
  }
  std::vector<Position> shifted;
  for (const auto& h : heads) shifted.push_back({h.x + 1.0, h.y + 1.0});

  for (bool cross : {p >= 5 && k > 1, false}) {
    for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
      Attempt at = build(shifted, p, cross, options.seed * 31 + attempt);
      for (auto& site : at.sites) site = {site.node_id, {site.position.x * r, site.position.y * r}, r};
      if (realizes(at, k, m, p, g)) {
        Layout out;
        out.sites = at.sites;
        out.range = r;
        for (const auto& h : shifted) out.head_positions.push_back({h.x * r, h.y * r});
        out.cross_links = cross;
        return out;
      }
    }
    if (!cross) break;
  }
  throw ScenarioError("could not realize a " + std::to_string(g) + "x" + std::to_string(m) + "x" + std::to_string(p) +
                      " hierarchy; try a larger --area");
}

scenario::Scenario generate_scenario(const GeneratorOptions& options) {
  scenario::Scenario s;
  s.seed = options.seed;
  s.hierarchy = options.preset;
  s.max_clusters_per_group = options.preset.clusters_per_group;
  s.area = options.area;
  s.sites = generate_layout(options).sites;
  return s;
}

scenario::Scenario random_scenario(const scenario::HierarchyPreset& preset, std::uint64_t seed,
                                   std::size_t membership_events) {
  GeneratorOptions opts;
  opts.preset = preset;
  opts.seed = seed;
  const Layout layout = generate_layout(opts);
  scenario::Scenario s;
  s.seed = seed;
  s.hierarchy = preset;
  s.max_clusters_per_group = preset.clusters_per_group;
  s.sites = layout.sites;

  // Shadow run: events are chosen against the live hierarchy they will meet.
  simnet::Simulator sim(s.sites, s.energy);
  const crypto::DeterministicProvider provider;
  protocol::Engine engine(s.protocol_config(), provider, sim);
  engine.bootstrap(topology::initialize(s.sites, s.max_clusters_per_group).hierarchy, s.sites);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::map<NodeId, topology::NodeSite> live;
  for (const auto& site : s.sites) live[site.node_id] = site;
  NodeId next_id = static_cast<NodeId>(s.sites.size() + 1);
  double t = 0.0;

  auto stays_connected = [&live](NodeId without) {
    std::vector<topology::NodeSite> rest;
    for (const auto& [id, site] : live) {
      if (id != without) rest.push_back(site);
    }
    return rest.size() <= 1 || topology::build_adjacency(rest).connected();
  };
  auto pick = [&rng](const std::vector<NodeId>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  std::size_t done = 0;
  std::size_t guard = 0;
  while (done < membership_events && guard++ < membership_events * 50) {
    const auto& h = engine.hierarchy();
    const int kind = std::uniform_int_distribution<int>(0, 5)(rng);
    scenario::Event ev;
    ev.time = (t += 1.0);
    if (kind == 0) {
      if (h.clusters.empty()) continue;
      std::vector<NodeId> heads;
      for (const auto& [cid, c] : h.clusters) heads.push_back(c.head);
      const NodeId head = pick(heads);
      const auto& hs = live.at(head);
      const double a = std::uniform_real_distribution<double>(0, 2 * kPi)(rng);
      const double d = std::uniform_real_distribution<double>(0.2, 0.4)(rng) * layout.range;
      ev.kind = scenario::EventKind::Join;
      ev.node = next_id++;
      ev.position = {hs.position.x + d * std::cos(a), hs.position.y + d * std::sin(a)};
      ev.range = layout.range;
      engine.handle_join({ev.node, ev.position, ev.range});
      live[ev.node] = {ev.node, ev.position, ev.range};
    } else if (kind == 5) {
      std::vector<NodeId> ids;
      for (const auto& [id, site] : live) ids.push_back(id);
      if (ids.size() < 2) continue;
      ev.kind = scenario::EventKind::Send;
      ev.src = pick(ids);
      do ev.dst = pick(ids);
      while (ev.dst == ev.src);
      ev.size_bits = 256;
      engine.route(ev.src, ev.dst, ev.size_bits);
      s.events.push_back(ev);
      continue;
    } else {
      std::vector<NodeId> pool;
      for (const auto& [id, site] : live) {
        const bool leader = h.is_group_leader(id);
        const bool head = h.is_head(id);
        const bool gw = h.is_gateway(id);
        const bool match = (kind == 1 && !head && !gw) || (kind == 2 && gw && !head) ||
                           (kind == 3 && head && !leader) || (kind == 4 && leader);
        if (match && live.size() > 2) pool.push_back(id);
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      const auto chosen = std::find_if(pool.begin(), pool.end(), stays_connected);
      if (chosen == pool.end()) continue;
      ev.kind = scenario::EventKind::Leave;
      ev.node = *chosen;
      engine.handle_leave(ev.node);
      live.erase(ev.node);
    }
    s.events.push_back(ev);
    ++done;
  }
  return s;
}

}  // namespace hikeys::generator
