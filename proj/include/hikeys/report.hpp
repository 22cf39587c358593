#pragma once

#include <string>
#include <vector>

#include "hikeys/simnet.hpp"

namespace hikeys::report {

inline constexpr const char* kReportTag = "hikeys-report/1";

/// YAML document; identical reports render to identical bytes.
std::string render_report(const simnet::SimulationReport& report);
/// Inverse of render_report. Throws ScenarioError on malformed input.
simnet::SimulationReport parse_report(const std::string& text);

/// One JSON object per line: seq, time, kind, src, scope, size_bits, path, context.
std::string render_transcript(const std::vector<simnet::TranscriptEntry>& transcript);

}  // namespace hikeys::report
