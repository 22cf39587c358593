#include "hikeys/report.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <sstream>

#include "hikeys/errors.hpp"
#include "json.hpp"

namespace hikeys::report {
namespace {

using scenario::format_double;

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

template <typename C>
std::string list(const C& items) {
  std::string out = "[";
  bool first = true;
  for (const auto& i : items) {
    out += (first ? "" : ", ") + std::to_string(i);
    first = false;
  }
  return out + "]";
}

std::string key_ref(const protocol::KeyRef& k) {
  return "{kind: " + std::string(crypto::to_string(k.kind)) + ", scope: " + std::to_string(k.scope) +
         ", epoch: " + std::to_string(k.epoch) + "}";
}

const char* flag(bool b) { return b ? "true" : "false"; }

std::uint64_t u64(const YAML::Node& n) {
  if (!n || !n.IsScalar()) throw ScenarioError("report: missing integer field");
  const std::string& s = n.Scalar();
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ScenarioError("report: bad integer '" + s + "'");
  return v;
}

std::uint32_t u32(const YAML::Node& n) { return static_cast<std::uint32_t>(u64(n)); }

double f64(const YAML::Node& n) {
  if (!n || !n.IsScalar()) throw ScenarioError("report: missing number field");
  const std::string& s = n.Scalar();
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ScenarioError("report: bad number '" + s + "'");
  return v;
}

bool boolean(const YAML::Node& n) {
  if (!n) throw ScenarioError("report: missing flag");
  return n.as<bool>();
}

crypto::KeyKind parse_key_kind(const std::string& s) {
  for (auto k : {crypto::KeyKind::ClusterKey, crypto::KeyKind::ClusterHeadKey, crypto::KeyKind::GroupLeaderKey,
                 crypto::KeyKind::GatewayPairKey}) {
    if (crypto::to_string(k) == s) return k;
  }
  throw ScenarioError("report: unknown key kind '" + s + "'");
}

protocol::KeyRef parse_key_ref(const YAML::Node& n) {
  return {parse_key_kind(n["kind"].as<std::string>()), u32(n["scope"]), u64(n["epoch"])};
}

template <typename T>
std::set<T> id_set(const YAML::Node& n) {
  std::set<T> out;
  for (const auto& i : n) out.insert(static_cast<T>(u64(i)));
  return out;
}

}  // namespace

std::string render_report(const simnet::SimulationReport& r) {
  std::ostringstream out;
  out << "format: " << kReportTag << "\n";
  out << "seed: " << r.seed << "\n";
  out << "node_count: " << r.node_count << "\n";
  out << "random_width: " << r.random_width << "\n";
  out << "hash: " << to_string(r.hash) << "\n";
  out << "insecure_variant: " << flag(r.insecure_variant) << "\n";
  out << "transcript_length: " << r.transcript_length << "\n";
  const auto& c = r.counters;
  out << "counters: {messages: " << c.messages << ", transmissions: " << c.transmissions
      << ", bits_on_air: " << c.bits_on_air << ", rekey_broadcasts: " << c.rekey_broadcasts
      << ", rekey_unicasts: " << c.rekey_unicasts << "}\n";
  out << "total_energy: " << format_double(r.total_energy) << "\n";

  out << "flows:" << (r.flows.empty() ? " []" : "") << "\n";
  for (const auto& f : r.flows) {
    out << "  - {id: " << f.flow_id << ", class: " << to_string(f.cls) << ", subject: " << f.subject
        << ", time: " << format_double(f.time) << ", rejected: " << flag(f.rejected) << ", rounds: " << f.rounds
        << ", billed_broadcasts: " << f.billed_broadcasts << ", billed_unicasts: " << f.billed_unicasts
        << ", wire_broadcasts: " << f.wire_broadcasts << ", wire_unicasts: " << f.wire_unicasts
        << ", aux_messages: " << f.aux_messages << ", levels: [";
    for (std::size_t i = 0; i < f.levels.size(); ++i) {
      const auto& l = f.levels[i];
      out << (i ? ", " : "") << "{key: " << key_ref(l.new_key) << ", initiator: " << l.initiator
          << ", continuing: " << l.continuing << ", newcomers: " << l.newcomers << ", wire: " << l.wire_messages
          << ", depth: " << l.depth << "}";
    }
    out << "]}\n";
  }

  out << "energy:" << (r.energy.empty() ? " []" : "") << "\n";
  for (const auto& [id, e] : r.energy) {
    out << "  - {node: " << id << ", remaining: " << format_double(e.remaining) << ", tx: " << format_double(e.tx)
        << ", rx: " << format_double(e.rx) << ", relay: " << format_double(e.relay) << "}\n";
  }

  const auto& h = r.hierarchy;
  out << "hierarchy:\n";
  out << "  network_leader: " << h.network_leader << "\n";
  out << "  clusters:" << (h.clusters.empty() ? " []" : "") << "\n";
  for (const auto& [id, cl] : h.clusters) {
    out << "    - {id: " << id << ", head: " << cl.head << ", members: " << list(cl.members)
        << ", gateways: " << list(cl.gateways) << "}\n";
  }
  out << "  links:" << (h.links.empty() ? " []" : "") << "\n";
  for (const auto& l : h.links) {
    out << "    - {gateway: " << l.gateway << ", home: " << l.home << ", foreign: " << l.foreign << "}\n";
  }
  out << "  groups:" << (h.groups.empty() ? " []" : "") << "\n";
  for (const auto& [id, g] : h.groups) {
    out << "    - {id: " << id << ", leader: " << g.leader << ", clusters: " << list(g.clusters) << "}\n";
  }

  out << "convergence_issues:" << (r.convergence_issues.empty() ? " []" : "") << "\n";
  for (const auto& i : r.convergence_issues) out << "  - " << quote(i) << "\n";
  out << "audit:\n";
  out << "  forward_violations: " << r.forward_violations << "\n";
  out << "  backward_violations: " << r.backward_violations << "\n";
  out << "  violations:" << (r.audit_violations.empty() ? " []" : "") << "\n";
  for (const auto& v : r.audit_violations) out << "    - " << quote(v) << "\n";

  out << "routes:" << (r.routes.empty() ? " []" : "") << "\n";
  for (const auto& rt : r.routes) {
    out << "  - {src: " << rt.src << ", dst: " << rt.dst << ", size_bits: " << rt.size_bits << ", hops: [";
    for (std::size_t i = 0; i < rt.hops.size(); ++i) {
      out << (i ? ", " : "") << "{from: " << rt.hops[i].from << ", to: " << rt.hops[i].to
          << ", key: " << key_ref(rt.hops[i].key) << "}";
    }
    out << "]}\n";
  }
  out << "failed_events:" << (r.failed_events.empty() ? " []" : "") << "\n";
  for (const auto& e : r.failed_events) {
    out << "  - {index: " << e.index << ", kind: " << e.kind << ", error: " << quote(e.error) << "}\n";
  }
  return out.str();
}

simnet::SimulationReport parse_report(const std::string& text) {
  simnet::SimulationReport r;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root["format"] || root["format"].as<std::string>() != kReportTag) {
      throw ScenarioError("not a report document");
    }
    r.seed = u64(root["seed"]);
    r.node_count = u64(root["node_count"]);
    r.random_width = u64(root["random_width"]);
    r.hash = parse_hash_id(root["hash"].as<std::string>());
    r.insecure_variant = boolean(root["insecure_variant"]);
    r.transcript_length = u64(root["transcript_length"]);
    const auto c = root["counters"];
    r.counters = {u64(c["messages"]), u64(c["transmissions"]), u64(c["bits_on_air"]), u64(c["rekey_broadcasts"]),
                  u64(c["rekey_unicasts"])};
    r.total_energy = f64(root["total_energy"]);
    for (const auto& f : root["flows"]) {
      protocol::FlowRecord fr;
      fr.flow_id = u64(f["id"]);
      const auto cls = protocol::parse_flow_class(f["class"].as<std::string>());
      if (!cls) throw ScenarioError("report: unknown flow class");
      fr.cls = *cls;
      fr.subject = u32(f["subject"]);
      fr.time = f64(f["time"]);
      fr.rejected = boolean(f["rejected"]);
      fr.rounds = u64(f["rounds"]);
      fr.billed_broadcasts = u64(f["billed_broadcasts"]);
      fr.billed_unicasts = u64(f["billed_unicasts"]);
      fr.wire_broadcasts = u64(f["wire_broadcasts"]);
      fr.wire_unicasts = u64(f["wire_unicasts"]);
      fr.aux_messages = u64(f["aux_messages"]);
      for (const auto& l : f["levels"]) {
        fr.levels.push_back({parse_key_ref(l["key"]), u32(l["initiator"]), u64(l["continuing"]), u64(l["newcomers"]),
                             u64(l["wire"]), u64(l["depth"])});
      }
      r.flows.push_back(std::move(fr));
    }
    for (const auto& e : root["energy"]) {
      r.energy[u32(e["node"])] = {f64(e["remaining"]), f64(e["tx"]), f64(e["rx"]), f64(e["relay"])};
    }
    const auto h = root["hierarchy"];
    r.hierarchy.network_leader = u32(h["network_leader"]);
    for (const auto& cl : h["clusters"]) {
      topology::Cluster c2{u32(cl["id"]), u32(cl["head"]), id_set<NodeId>(cl["members"]), id_set<NodeId>(cl["gateways"])};
      r.hierarchy.clusters[c2.id] = std::move(c2);
    }
    for (const auto& l : h["links"]) r.hierarchy.links.push_back({u32(l["gateway"]), u32(l["home"]), u32(l["foreign"])});
    for (const auto& g : h["groups"]) {
      topology::Group g2{u32(g["id"]), u32(g["leader"]), id_set<topology::ClusterId>(g["clusters"])};
      r.hierarchy.groups[g2.id] = std::move(g2);
    }
    for (const auto& i : root["convergence_issues"]) r.convergence_issues.push_back(i.as<std::string>());
    const auto a = root["audit"];
    r.forward_violations = u64(a["forward_violations"]);
    r.backward_violations = u64(a["backward_violations"]);
    for (const auto& v : a["violations"]) r.audit_violations.push_back(v.as<std::string>());
    for (const auto& rt : root["routes"]) {
      protocol::DataRoute d{u32(rt["src"]), u32(rt["dst"]), u64(rt["size_bits"]), {}};
      for (const auto& hop : rt["hops"]) d.hops.push_back({u32(hop["from"]), u32(hop["to"]), parse_key_ref(hop["key"])});
      r.routes.push_back(std::move(d));
    }
    for (const auto& e : root["failed_events"]) {
      r.failed_events.push_back({u64(e["index"]), e["kind"].as<std::string>(), e["error"].as<std::string>()});
    }
  } catch (const YAML::Exception& e) {
    throw ScenarioError("report line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  } catch (const ConfigError& e) {
    throw ScenarioError(std::string("report: ") + e.what());
  }
  return r;
}

std::string render_transcript(const std::vector<simnet::TranscriptEntry>& transcript) {
  std::string out;
  for (const auto& e : transcript) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["time"] = e.time;
    j["kind"] = std::string(protocol::to_string(e.message.kind));
    j["src"] = e.message.src;
    j["scope"] = e.message.scope.to_string();
    j["size_bits"] = e.message.size_bits;
    j["path"] = e.path;
    j["context"] = e.message.sealed ? e.message.sealed->context.to_string() : std::string("plain");
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace hikeys::report
