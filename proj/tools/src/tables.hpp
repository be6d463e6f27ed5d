#pragma once

#include <string>
#include <vector>

#include "experiment.hpp"

namespace unlearn::tools {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string footer;

  std::string markdown() const;
  std::string csv() const;
};

// One row per report: value (|gap to reference|) for UA, RA, TA and MIA,
// then Avg. Gap and RTE. Reports are re-gapped against `reference`.
Table comparison_table(const MetricsReport& reference, const std::vector<MetricsReport>& reports);

// One row per forgotten class plus a mean row.
Table per_class_table(const std::string& method, const std::vector<PerClassRow>& rows);

// "<cpu model>, <n> threads", read from /proc/cpuinfo where available.
std::string machine_fingerprint();

}  // namespace unlearn::tools
