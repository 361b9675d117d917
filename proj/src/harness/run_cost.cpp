// Copyright 2026 The ViCA Engine Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <ostream>

#include "vica/harness.hpp"

namespace vica::harness {

int run_cost(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
  const PolicySchedule schedule = cfg.policy();
  const CostReport report =
      cost_report(cfg.preset, cfg.schedule, schedule, cfg.cost_inputs(), cfg.drop_timing);

  std::vector<std::string> outputs = {"cost.json", "cost.txt"};
  write_file(out_dir, "cost.json", cost_report_json(report));
  const std::string table = cost_report_table(report);
  write_file(out_dir, "cost.txt", table);
  out << table;

  int code = kExitPass;
  if (cfg.golden) {
    std::string lines;
    std::size_t failed = 0;
    for (const GoldenResult& r : check_golden()) {
      lines += format_golden(r) + "\n";
      if (!r.pass) {
        ++failed;
        out << format_golden(r) << "\n";
      }
    }
    write_file(out_dir, "golden.txt", lines);
    outputs.push_back("golden.txt");
    out << "golden: " << golden_manifest().size() - failed << "/" << golden_manifest().size()
        << " reference values reproduced\n";
    if (failed > 0) code = kExitFail;
  }
  out << headline(report) << "\n";
  write_file(out_dir, "manifest.json", manifest_json(cfg, outputs));
  return code;
}

}  // namespace vica::harness
