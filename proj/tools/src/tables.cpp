#include "tables.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace unlearn::tools {

namespace {

std::string cell(double value, double gap) {
  return format_pct(value) + " (" + format_pct(gap) + ")";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string Table::markdown() const {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& cells) {
    os << "|";
    for (const auto& c : cells) os << " " << c << " |";
    os << "\n";
  };
  line(header);
  os << "|";
  for (std::size_t i = 0; i < header.size(); ++i) os << (i == 0 ? " --- |" : " ---: |");
  os << "\n";
  for (const auto& r : rows) line(r);
  if (!footer.empty()) os << "\n" << footer << "\n";
  return os.str();
}

std::string Table::csv() const {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
    os << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

Table comparison_table(const MetricsReport& reference, const std::vector<MetricsReport>& reports) {
  Table t;
  t.header = {"Method", "UA", "RA", "TA", "MIA", "Avg. Gap", "RTE"};
  for (auto r : reports) {
    r.attach_reference(reference);
    const auto& g = *r.gaps;
    t.rows.push_back({r.method, cell(r.ua, g.ua), cell(r.ra, g.ra), cell(r.ta, g.ta),
                      cell(r.mia, g.mia), format_pct(*r.avg_gap), format_mmss(r.rte_seconds)});
  }
  std::ostringstream foot;
  foot << "Gaps are absolute differences to " << reference.method << " on " << reference.dataset
       << " (" << to_string(reference.split.mode) << " forgetting). RTE measured on "
       << machine_fingerprint() << ".";
  t.footer = foot.str();
  return t;
}

Table per_class_table(const std::string& method, const std::vector<PerClassRow>& rows) {
  Table t;
  t.header = {"Class", "UA", "RA", "TA", "MIA", "RTE"};
  double ua = 0, ra = 0, ta = 0, mia = 0, rte = 0;
  for (const auto& row : rows) {
    const auto& r = row.report;
    t.rows.push_back({std::to_string(row.target_class), format_pct(r.ua), format_pct(r.ra),
                      format_pct(r.ta), format_pct(r.mia), format_mmss(r.rte_seconds)});
    ua += r.ua;
    ra += r.ra;
    ta += r.ta;
    mia += r.mia;
    rte += r.rte_seconds;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    t.rows.push_back({"mean", format_pct(ua / n), format_pct(ra / n), format_pct(ta / n),
                      format_pct(mia / n), format_mmss(rte / n)});
  }
  t.footer = "Class-wise forgetting with " + method + ". RTE measured on " + machine_fingerprint() + ".";
  return t;
}

std::string machine_fingerprint() {
  std::string model = "unknown CPU";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos && colon + 2 <= line.size()) model = line.substr(colon + 2);
      break;
    }
  }
  const unsigned n = std::max(1u, std::thread::hardware_concurrency());
  return model + ", " + std::to_string(n) + (n == 1 ? " thread" : " threads");
}

}  // namespace unlearn::tools
