#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "osfd/image.hpp"
#include "osfd/protocol.hpp"

namespace osfd {

/// Aligned text table over a set of per-combination reports.
std::string render_report_table(const std::vector<EvalReport>& reports);

/// Line plot of TOSC and rejection rate against lambda.
Image render_lambda_sweep(const EvalReport& report, int side = 480);

/// Loads every report JSON under dir (recursively), renders the table to
/// stdout and a summary.txt, and writes one sweep plot per report.
void render_report_directory(const std::filesystem::path& dir);

}  // namespace osfd
