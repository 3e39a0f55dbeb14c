#include <iostream>

#include <CLI11.hpp>

#include "feedforge/pipeline.hpp"

namespace fs = std::filesystem;
using feedforge::ExitCode;

namespace {

int guarded(const char* stage, const std::function<ExitCode()>& fn) {
  try {
    return static_cast<int>(fn());
  } catch (const std::exception& e) {
    std::cerr << "error in stage " << stage << ": " << e.what() << "\n";
    return static_cast<int>(feedforge::exit_code_for(e));
  }
}

ExitCode finish(const feedforge::StageResult& r, bool verbose) {
  if (verbose)
    for (const auto& p : r.written) std::cerr << "wrote " << p.string() << "\n";
  if (r.timed_out) {
    std::cerr << "warning: exact solver hit its time limit; output holds the best incumbent\n";
    return ExitCode::timeout;
  }
  return ExitCode::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize radial distribution feeders from street maps"};
  app.set_version_flag("--version", FEEDFORGE_VERSION);
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Per-stage timing on stderr");

  fs::path config, in, out;
  auto* run = app.add_subcommand("run", "Run every stage and write all artifacts");
  run->add_option("--config", config, "Pipeline config (YAML)")->required();
  run->add_option("--out", out, "Output directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Parse, project, clean, simplify and score the street data");
  ingest->add_option("--config", config, "Pipeline config (YAML)")->required();
  ingest->add_option("--out", out, "Directory for intermediates")->required();

  struct Stage {
    const char* name;
    const char* help;
    CLI::App* cmd = nullptr;
  };
  Stage stages[] = {{"synth", "Select the radial feeder"},
                    {"electrify", "Attach line parameters and loads"},
                    {"pf", "Solve the load-flow scenarios"},
                    {"report", "Write exports, figures and the summary"}};
  for (auto& s : stages) {
    s.cmd = app.add_subcommand(s.name, s.help);
    s.cmd->add_option("--in", in, "Directory holding earlier intermediates")->required();
    s.cmd->add_option("--out", out, "Output directory (default: --in)");
  }
  for (auto* cmd : app.get_subcommands({})) cmd->add_flag("-v,--verbose", verbose, "Per-stage timing on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return static_cast<int>(ExitCode::config);
  }
  if (out.empty()) out = in;

  if (run->parsed()) {
    return guarded("config", [&] {
      const auto cfg = feedforge::load_config(config);
      return feedforge::run_pipeline(cfg, out, std::cout, std::cerr, verbose);
    });
  }
  if (ingest->parsed())
    return guarded("ingest", [&] { return finish(feedforge::stage_ingest(feedforge::load_config(config), out), verbose); });
  if (stages[0].cmd->parsed()) return guarded("synth", [&] { return finish(feedforge::stage_synth(in, out), verbose); });
  if (stages[1].cmd->parsed())
    return guarded("electrify", [&] { return finish(feedforge::stage_electrify(in, out), verbose); });
  if (stages[2].cmd->parsed()) return guarded("pf", [&] { return finish(feedforge::stage_pf(in, out), verbose); });
  return guarded("report", [&] { return finish(feedforge::stage_report(in, out, std::cout), verbose); });
}
