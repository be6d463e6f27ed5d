#include "cli.hpp"

#include <chrono>
#include <fstream>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "tables.hpp"

namespace fs = std::filesystem;

namespace unlearn::tools {

namespace {

struct Options {
  std::string config;
  std::string output;
  std::optional<std::int64_t> seed;
  std::vector<std::string> overrides;
  std::string method;
  std::string reference;
  std::vector<std::string> names;
  bool quiet = false;
};

ExperimentConfig load_config(const Options& o) {
  KeyValues kv;
  fs::path base;
  if (!o.config.empty()) {
    kv = KeyValues::load(o.config);
    base = fs::path(o.config).parent_path();
  }
  for (const auto& item : o.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + item + "'");
    kv.set(item.substr(0, eq), item.substr(eq + 1));
  }
  if (o.seed) kv.set("run_seed", std::to_string(*o.seed));
  if (!o.method.empty()) kv.set("method", o.method);
  auto cfg = ExperimentConfig::from(kv, base);
  if (!o.output.empty()) cfg.output_dir = o.output;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void print_report(std::ostream& out, const MetricsReport& r) {
  out << r.method << ": UA " << format_pct(r.ua) << "  RA " << format_pct(r.ra) << "  TA "
      << format_pct(r.ta) << "  MIA " << format_pct(r.mia) << "  RTE " << format_mmss(r.rte_seconds);
  if (r.avg_gap) out << "  Avg. Gap " << format_pct(*r.avg_gap);
  out << "\n";
}

int dispatch(const std::string& command, const Options& o, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(o);
  const auto start = std::chrono::steady_clock::now();
  Logger log;
  if (!o.quiet) {
    log = [&err, start](const std::string& line) {
      const auto s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      err << "[" << format_mmss(s) << "] " << line << std::endl;
    };
  }
  Experiment exp(cfg, log);

  if (command == "prepare-data") {
    const auto& d = exp.data();
    const auto& s = exp.split();
    out << d.train.name() << ": " << d.train.size() << " train, " << d.test.size() << " test, "
        << d.train.num_classes() << " classes\n"
        << "forget " << s.forget_indices.size() << ", retain " << s.retain_indices.size() << "\n"
        << "split manifest: " << exp.path("split.manifest").string() << "\n";
  } else if (command == "train-original") {
    exp.original();
    print_report(out, exp.evaluate("original"));
  } else if (command == "unlearn") {
    print_report(out, exp.run(cfg.method).report);
  } else if (command == "evaluate") {
    const std::vector<std::string> names =
        o.names.empty() ? std::vector<std::string>{tools::to_string(cfg.method)} : o.names;
    for (const auto& n : names) print_report(out, exp.evaluate(n));
  } else if (command == "compare") {
    const auto ref_path = exp.path("reports/" + o.reference + ".json");
    if (!fs::exists(ref_path)) {
      throw InputError("reference report " + ref_path.string() + " does not exist");
    }
    const auto reference = read_report(ref_path);
    std::vector<std::string> names = o.names;
    if (names.empty()) {
      for (const auto m : {Method::retrain, Method::ft, Method::ga, Method::rl, Method::cl,
                           Method::ws_cl, Method::wss_cl}) {
        if (fs::exists(exp.path("reports/" + tools::to_string(m) + ".json"))) names.push_back(tools::to_string(m));
      }
    }
    std::vector<MetricsReport> reports;
    for (const auto& n : names) {
      const auto p = exp.path("reports/" + n + ".json");
      if (!fs::exists(p)) throw InputError("no report " + p.string());
      reports.push_back(read_report(p));
    }
    const auto table = comparison_table(reference, reports);
    write_text(exp.path("tables/compare.md"), table.markdown());
    write_text(exp.path("tables/compare.csv"), table.csv());
    out << table.markdown();
  } else if (command == "per-class") {
    const auto rows = exp.per_class(cfg.method);
    const auto table = per_class_table(tools::to_string(cfg.method), rows);
    const auto stem = "tables/per_class_" + tools::to_string(cfg.method);
    write_text(exp.path(stem + ".md"), table.markdown());
    write_text(exp.path(stem + ".csv"), table.csv());
    out << table.markdown();
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Machine unlearning experiments on CIFAR-style image data"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("-o,--output", o.output, "output directory (overrides output_dir)");
  app.add_option("--seed", o.seed, "run seed (overrides run_seed)");
  app.add_option("--set", o.overrides, "override a config key, key=value");
  app.add_flag("-q,--quiet", o.quiet, "no progress log on stderr");

  app.add_subcommand("prepare-data", "load the dataset and write the split manifest");
  app.add_subcommand("train-original", "train or reload the original model and evaluate it");
  auto* un = app.add_subcommand("unlearn", "run one unlearning method");
  un->add_option("-m,--method", o.method, "retrain, ft, ga, rl, cl, ws-cl or wss-cl");
  auto* ev = app.add_subcommand("evaluate", "re-evaluate stored checkpoints");
  ev->add_option("names", o.names, "checkpoint names (original, retrain, ft, ...)");
  auto* cmp = app.add_subcommand("compare", "render the comparison table from stored reports");
  cmp->add_option("-r,--reference", o.reference, "reference report name, usually retrain")->required();
  cmp->add_option("names", o.names, "reports to include (default: all present)");
  auto* pc = app.add_subcommand("per-class", "forget each class in turn");
  pc->add_option("-m,--method", o.method, "unlearning method");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, o, out, err);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace unlearn::tools
