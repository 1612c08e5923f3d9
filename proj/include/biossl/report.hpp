#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "biossl/eval.hpp"

namespace biossl {

// JSON with summary statistics and every per-repeat value.
void write_report_json(std::ostream& out, const EvalReport& report);
EvalReport read_report_json(std::istream& in);

// One row per (combination, scenario) with mean and std of AUROC and AUPR for
// DDI and DTI; reports are ordered by catalogue position, then scenario.
std::string report_table_csv(std::vector<EvalReport> reports);

// Metric rows (DDI/DTI x AUROC/AUPR) by combination columns for one scenario,
// each row min-max normalized to [0, 1]. Constant rows map to 0.
std::string report_heatmap_csv(const std::vector<EvalReport>& reports, ScenarioKind scenario);

}  // namespace biossl
