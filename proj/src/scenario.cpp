#include "hikeys/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "hikeys/errors.hpp"

namespace hikeys::scenario {
namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& what) {
  const auto mark = node.Mark();
  if (mark.is_null()) throw ScenarioError(what);
  throw ScenarioError("line " + std::to_string(mark.line + 1) + ": " + what);
}

void only_keys(const YAML::Node& map, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!map.IsMap()) fail_at(map, where + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&key](const char* a) { return key == a; })) {
      fail_at(kv.first, "unknown field '" + key + "' in " + where);
    }
  }
}

std::string scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail_at(n, field + " must be a scalar");
  return n.Scalar();
}

double as_double(const YAML::Node& n, const std::string& field) {
  const std::string s = scalar(n, field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail_at(n, field + " is not a number: '" + s + "'");
  return v;
}

std::uint64_t as_uint(const YAML::Node& n, const std::string& field) {
  const std::string s = scalar(n, field);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail_at(n, field + " is not a non-negative integer: '" + s + "'");
  }
  return v;
}

NodeId as_node(const YAML::Node& n, const std::string& field) {
  const auto v = as_uint(n, field);
  if (v == 0 || v > 0xffffffffULL) fail_at(n, field + " must be a node id in 1..2^32-1");
  return static_cast<NodeId>(v);
}

const YAML::Node require(const YAML::Node& map, const char* key, const std::string& where) {
  const YAML::Node n = map[key];
  if (!n) fail_at(map, where + " lacks '" + key + "'");
  return n;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

Event parse_event(const YAML::Node& e) {
  only_keys(e, {"time", "kind", "node", "x", "y", "range", "issuer", "moves_into", "src", "dst", "size_bits"},
            "event");
  Event ev;
  ev.time = as_double(require(e, "time", "event"), "time");
  if (ev.time < 0) fail_at(e, "event time is negative");
  const auto kind_node = require(e, "kind", "event");
  const std::string kind = scalar(kind_node, "kind");
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (e[k]) fail_at(e[k], std::string("field '") + k + "' does not apply to a " + kind + " event");
    }
  };
  if (kind == "join") {
    ev.kind = EventKind::Join;
    ev.node = as_node(require(e, "node", "join event"), "node");
    ev.position = {as_double(require(e, "x", "join event"), "x"), as_double(require(e, "y", "join event"), "y")};
    ev.range = as_double(require(e, "range", "join event"), "range");
    if (!(ev.range > 0)) fail_at(e["range"], "range must be positive");
    if (e["issuer"]) ev.issuer = scalar(e["issuer"], "issuer");
    forbid({"moves_into", "src", "dst", "size_bits"});
  } else if (kind == "leave") {
    ev.kind = EventKind::Leave;
    ev.node = as_node(require(e, "node", "leave event"), "node");
    if (e["moves_into"]) ev.moves_into = static_cast<std::uint32_t>(as_uint(e["moves_into"], "moves_into"));
    forbid({"x", "y", "range", "issuer", "src", "dst", "size_bits"});
  } else if (kind == "send") {
    ev.kind = EventKind::Send;
    ev.src = as_node(require(e, "src", "send event"), "src");
    ev.dst = as_node(require(e, "dst", "send event"), "dst");
    ev.size_bits = as_uint(require(e, "size_bits", "send event"), "size_bits");
    if (ev.size_bits == 0) fail_at(e["size_bits"], "size_bits must be positive");
    forbid({"node", "x", "y", "range", "issuer", "moves_into"});
  } else {
    fail_at(kind_node, "unknown event kind '" + kind + "'");
  }
  return ev;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Join: return "join";
    case EventKind::Leave: return "leave";
    case EventKind::Send: return "send";
  }
  return "?";
}

protocol::ProtocolConfig Scenario::protocol_config() const {
  protocol::ProtocolConfig c;
  c.random_width = random_width;
  c.hash = hash;
  c.max_clusters_per_group = max_clusters_per_group;
  c.seed = seed;
  return c;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ScenarioError("line 1: scenario must be a mapping");
  Scenario s;
  try {
    only_keys(root,
              {"format", "seed", "protocol", "hierarchy", "energy", "area", "sites", "events", "message_size_sweep"},
              "scenario");
    const auto format = require(root, "format", "scenario");
    if (scalar(format, "format") != kFormatTag) {
      fail_at(format, "unsupported format '" + format.Scalar() + "', expected " + kFormatTag);
    }
    if (root["seed"]) s.seed = as_uint(root["seed"], "seed");
    if (const auto p = root["protocol"]) {
      only_keys(p, {"random_width", "hash", "max_clusters_per_group"}, "protocol");
      if (p["random_width"]) {
        s.random_width = as_uint(p["random_width"], "random_width");
        if (!keycore::valid_random_width(s.random_width)) fail_at(p["random_width"], "random_width must be 8, 16 or 32");
      }
      if (p["hash"]) {
        try {
          s.hash = parse_hash_id(scalar(p["hash"], "hash"));
        } catch (const ConfigError& e) {
          fail_at(p["hash"], e.what());
        }
      }
      if (p["max_clusters_per_group"]) {
        s.max_clusters_per_group = as_uint(p["max_clusters_per_group"], "max_clusters_per_group");
        if (s.max_clusters_per_group == 0) fail_at(p["max_clusters_per_group"], "max_clusters_per_group must be positive");
      }
    }
    if (const auto h = root["hierarchy"]) {
      only_keys(h, {"groups", "clusters_per_group", "cluster_size"}, "hierarchy");
      HierarchyPreset preset;
      preset.groups = as_uint(require(h, "groups", "hierarchy"), "groups");
      preset.clusters_per_group = as_uint(require(h, "clusters_per_group", "hierarchy"), "clusters_per_group");
      preset.cluster_size = as_uint(require(h, "cluster_size", "hierarchy"), "cluster_size");
      if (preset.groups == 0 || preset.clusters_per_group == 0 || preset.cluster_size == 0) {
        fail_at(h, "hierarchy sizes must be positive");
      }
      s.hierarchy = preset;
    }
    if (const auto e = root["energy"]) {
      only_keys(e, {"tx_power", "rx_power", "initial_joules", "bitrate"}, "energy");
      auto read = [&e](const char* key, double& out) {
        if (e[key]) {
          out = as_double(e[key], key);
          if (!(out > 0)) fail_at(e[key], std::string(key) + " must be positive");
        }
      };
      read("tx_power", s.energy.tx_power);
      read("rx_power", s.energy.rx_power);
      read("initial_joules", s.energy.initial_joules);
      read("bitrate", s.energy.bitrate);
    }
    if (root["area"]) {
      s.area = as_double(root["area"], "area");
      if (s.area < 0) fail_at(root["area"], "area must not be negative");
    }
    if (const auto sites = root["sites"]) {
      if (!sites.IsSequence()) fail_at(sites, "sites must be a list");
      std::set<NodeId> seen;
      for (const auto& n : sites) {
        only_keys(n, {"id", "x", "y", "range"}, "site");
        topology::NodeSite site;
        site.node_id = as_node(require(n, "id", "site"), "id");
        site.position = {as_double(require(n, "x", "site"), "x"), as_double(require(n, "y", "site"), "y")};
        site.radio_range = as_double(require(n, "range", "site"), "range");
        if (!(site.radio_range > 0)) fail_at(n["range"], "range must be positive");
        if (!seen.insert(site.node_id).second) fail_at(n, "duplicate site id " + std::to_string(site.node_id));
        s.sites.push_back(site);
      }
    }
    if (const auto events = root["events"]) {
      if (!events.IsSequence()) fail_at(events, "events must be a list");
      for (const auto& e : events) s.events.push_back(parse_event(e));
    }
    if (const auto sweep = root["message_size_sweep"]) {
      if (!sweep.IsSequence()) fail_at(sweep, "message_size_sweep must be a list");
      for (const auto& n : sweep) {
        const auto v = as_uint(n, "message size");
        if (v == 0) fail_at(n, "message sizes must be positive");
        s.message_size_sweep.push_back(v);
      }
    }
    if (s.sites.empty() && !s.hierarchy) fail_at(root, "scenario needs either sites or a hierarchy preset");
  } catch (const YAML::Exception& e) {
    throw ScenarioError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void validate(const Scenario& s) {
  if (!keycore::valid_random_width(s.random_width)) throw ScenarioError("random_width must be 8, 16 or 32");
  if (s.max_clusters_per_group == 0) throw ScenarioError("max_clusters_per_group must be positive");
  if (s.sites.empty() && !s.hierarchy) throw ScenarioError("scenario needs either sites or a hierarchy preset");
  std::set<NodeId> ids;
  for (const auto& site : s.sites) {
    if (site.node_id == 0) throw ScenarioError("node id 0 is reserved");
    if (!(site.radio_range > 0)) throw ScenarioError("site " + std::to_string(site.node_id) + " has no radio range");
    if (!ids.insert(site.node_id).second) throw ScenarioError("duplicate site id " + std::to_string(site.node_id));
  }
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.time < 0) throw ScenarioError("event " + std::to_string(i + 1) + " has a negative time");
    if (e.kind == EventKind::Send && e.size_bits == 0) {
      throw ScenarioError("event " + std::to_string(i + 1) + " sends zero bits");
    }
  }
  for (auto v : s.message_size_sweep) {
    if (v == 0) throw ScenarioError("message sizes must be positive");
  }
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "format: " << kFormatTag << "\n";
  out << "seed: " << s.seed << "\n";
  out << "protocol:\n";
  out << "  random_width: " << s.random_width << "\n";
  out << "  hash: " << to_string(s.hash) << "\n";
  out << "  max_clusters_per_group: " << s.max_clusters_per_group << "\n";
  if (s.hierarchy) {
    out << "hierarchy:\n";
    out << "  groups: " << s.hierarchy->groups << "\n";
    out << "  clusters_per_group: " << s.hierarchy->clusters_per_group << "\n";
    out << "  cluster_size: " << s.hierarchy->cluster_size << "\n";
  }
  out << "energy:\n";
  out << "  tx_power: " << format_double(s.energy.tx_power) << "\n";
  out << "  rx_power: " << format_double(s.energy.rx_power) << "\n";
  out << "  initial_joules: " << format_double(s.energy.initial_joules) << "\n";
  out << "  bitrate: " << format_double(s.energy.bitrate) << "\n";
  out << "area: " << format_double(s.area) << "\n";
  if (!s.sites.empty()) {
    out << "sites:\n";
    for (const auto& site : s.sites) {
      out << "  - {id: " << site.node_id << ", x: " << format_double(site.position.x)
          << ", y: " << format_double(site.position.y) << ", range: " << format_double(site.radio_range) << "}\n";
    }
  }
  if (!s.events.empty()) {
    out << "events:\n";
    for (const auto& e : s.events) {
      out << "  - {time: " << format_double(e.time) << ", kind: " << to_string(e.kind);
      switch (e.kind) {
        case EventKind::Join:
          out << ", node: " << e.node << ", x: " << format_double(e.position.x)
              << ", y: " << format_double(e.position.y) << ", range: " << format_double(e.range);
          if (!e.issuer.empty()) out << ", issuer: " << quote(e.issuer);
          break;
        case EventKind::Leave:
          out << ", node: " << e.node;
          if (e.moves_into) out << ", moves_into: " << *e.moves_into;
          break;
        case EventKind::Send:
          out << ", src: " << e.src << ", dst: " << e.dst << ", size_bits: " << e.size_bits;
          break;
      }
      out << "}\n";
    }
  }
  if (!s.message_size_sweep.empty()) {
    out << "message_size_sweep: [";
    for (std::size_t i = 0; i < s.message_size_sweep.size(); ++i) {
      out << (i ? ", " : "") << s.message_size_sweep[i];
    }
    out << "]\n";
  }
  return out.str();
}

}  // namespace hikeys::scenario
