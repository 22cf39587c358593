#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hikeys/costmodel.hpp"
#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"
#include "hikeys/report.hpp"
#include "hikeys/scenario.hpp"
#include "hikeys/simnet.hpp"

using namespace hikeys;

namespace {

constexpr int kOk = 0;
constexpr int kScenarioError = 2;
constexpr int kProtocolError = 3;
constexpr int kAuditViolation = 4;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("HIKEYS_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw ArgumentError(std::string("HIKEYS_SEED is not an integer: ") + v);
  }
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  out << text;
}

const std::vector<std::size_t> kDefaultSizes{16, 32, 48, 64, 128, 152, 180, 200, 256, 512, 1024};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical group key management: simulation and cost tables"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a scenario realizing a G x M x P hierarchy");
  std::size_t g_groups = 1, g_clusters = 1, g_size = 8;
  std::optional<std::uint64_t> g_seed;
  double g_area = 0.0;
  std::string g_out;
  gen->add_option("--G", g_groups, "groups")->check(CLI::PositiveNumber);
  gen->add_option("--M", g_clusters, "clusters per group")->check(CLI::PositiveNumber);
  gen->add_option("--P", g_size, "key holders per cluster")->check(CLI::PositiveNumber);
  gen->add_option("--seed", g_seed, "seed (falls back to HIKEYS_SEED)");
  gen->add_option("--area", g_area, "side of the square field in meters")->check(CLI::NonNegativeNumber);
  gen->add_option("-o,--out", g_out, "output file (default stdout)");

  // run
  auto* run = app.add_subcommand("run", "Simulate a scenario and write the report");
  std::string r_scenario, r_report, r_transcript;
  std::optional<std::uint64_t> r_seed;
  bool r_insecure = false;
  run->add_option("scenario", r_scenario, "scenario file")->required();
  run->add_option("--seed", r_seed, "override the scenario seed (falls back to HIKEYS_SEED)");
  run->add_option("--report", r_report, "report file (default stdout)");
  run->add_option("--transcript", r_transcript, "newline-delimited transcript dump");
  run->add_flag("--insecure-variant", r_insecure, "broadcast leave rekeys under the old cluster key");

  // costs
  auto* costs = app.add_subcommand("costs", "Rekeying cost table and receiver counts");
  cost::CostParams cp;
  bool c_csv = false;
  costs->add_option("--N", cp.N, "network size");
  costs->add_option("--M", cp.M, "clusters per group");
  costs->add_option("--P", cp.P, "cluster size");
  costs->add_option("--G", cp.G, "number of groups");
  costs->add_flag("--csv", c_csv, "CSV output");

  // crosscheck
  auto* check = app.add_subcommand("crosscheck", "Simulate one event per class and compare with the closed forms");
  std::size_t x_groups = 2, x_clusters = 8, x_size = 16;
  std::optional<std::uint64_t> x_seed;
  check->add_option("--G", x_groups)->check(CLI::PositiveNumber);
  check->add_option("--M", x_clusters)->check(CLI::PositiveNumber);
  check->add_option("--P", x_size)->check(CLI::PositiveNumber);
  check->add_option("--seed", x_seed);

  // energy-sweep
  auto* sweep = app.add_subcommand("energy-sweep", "Total energy per data message size (CSV)");
  std::string s_scenario;
  std::vector<std::size_t> s_sizes;
  sweep->add_option("scenario", s_scenario, "scenario file")->required();
  sweep->add_option("--sizes", s_sizes, "message sizes in bits")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kScenarioError;
  }

  try {
    if (*gen) {
      generator::GeneratorOptions opts;
      opts.preset = {g_groups, g_clusters, g_size};
      opts.seed = g_seed ? *g_seed : env_seed().value_or(0);
      opts.area = g_area;
      write_out(g_out, scenario::serialize_scenario(generator::generate_scenario(opts)));
      return kOk;
    }
    if (*run) {
      const auto sc = scenario::load_scenario(r_scenario);
      simnet::RunOptions opts;
      opts.insecure_variant = r_insecure;
      opts.seed = r_seed ? r_seed : env_seed();
      simnet::RunResult result;
      try {
        result = simnet::run(sc, opts);
      } catch (const ScenarioError&) {
        throw;
      } catch (const Error& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return kProtocolError;
      }
      write_out(r_report, report::render_report(result.report));
      if (!r_transcript.empty()) write_out(r_transcript, report::render_transcript(result.transcript));
      for (const auto& i : result.report.convergence_issues) std::cerr << "convergence: " << i << "\n";
      for (const auto& f : result.report.failed_events) std::cerr << "event " << f.index << ": " << f.error << "\n";
      for (const auto& v : result.report.audit_violations) std::cerr << "audit: " << v << "\n";
      if (!result.report.audit_violations.empty()) return kAuditViolation;
      if (!result.report.convergence_issues.empty() || !result.report.failed_events.empty()) return kProtocolError;
      return kOk;
    }
    if (*costs) {
      if (!cp.consistent()) {
        std::cerr << "warning: N=" << cp.N << " differs from G*M*P=" << cp.G * cp.M * cp.P << "\n";
      }
      std::cout << (c_csv ? cost::render_csv(cp) : cost::render_text(cp));
      return kOk;
    }
    if (*check) {
      const std::uint64_t seed = x_seed ? *x_seed : env_seed().value_or(0);
      const cost::CostParams params{static_cast<std::int64_t>(x_groups * x_clusters * x_size),
                                    static_cast<std::int64_t>(x_clusters), static_cast<std::int64_t>(x_size),
                                    static_cast<std::int64_t>(x_groups)};
      bool all = true;
      for (cost::EventClass c : cost::kEventClasses) {
        const auto sc = cost::crosscheck_scenario({x_groups, x_clusters, x_size}, c, seed);
        const auto result = simnet::run(sc);
        for (const auto& r : cost::crosscheck(result.report, params)) {
          if (r.cls != c) continue;
          const bool ok = r.exercised && r.pass && result.report.convergence_issues.empty();
          all = all && ok;
          std::cout << (ok ? "pass " : "FAIL ") << r.message << "\n";
        }
      }
      return all ? kOk : kProtocolError;
    }
    if (*sweep) {
      const auto sc = scenario::load_scenario(s_scenario);
      std::vector<std::size_t> sizes = s_sizes;
      if (sizes.empty()) sizes = sc.message_size_sweep.empty() ? kDefaultSizes : sc.message_size_sweep;
      std::cout << "size_bits,mean_energy,total_energy\n";
      for (const auto& row : simnet::energy_sweep(sc, sizes)) {
        std::cout << row.size_bits << "," << scenario::format_double(row.mean_energy) << ","
                  << scenario::format_double(row.total_energy) << "\n";
      }
      return kOk;
    }
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kScenarioError;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kScenarioError;
  } catch (const Error& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kProtocolError;
  }
  return kOk;
}
