#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "nltheat/cli.hpp"

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw nlt::InputError("cannot write '" + p.string() + "'");
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-kernel invariants of non-Laplace type operators"};
  app.require_subcommand(1, 1);
  std::string config, out;
  std::uint64_t seed = 0;
  double tol = 0.0;
  for (const auto& name : nlt::cli::task_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " task");
    sub->add_option("--config", config, "TOML or JSON config")->required();
    sub->add_option("--out", out, "output directory for report.json and CSV tables");
    sub->add_option("--seed", seed, "override numeric.seed");
    sub->add_option("--tol", tol, "override numeric.rel_tol (eigenvalue clustering)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string task = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  nlt::cli::RunOptions opt;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--tol")) opt.tol = tol;
  try {
    const auto cfg = nlt::cli::load_config_file(config);
    auto report = nlt::cli::run(cfg, task, opt);
    const std::string doc = report.to_json().dump(2) + "\n";
    if (out.empty()) {
      std::cout << doc;
    } else {
      fs::create_directories(out);
      write_file(fs::path(out) / "report.json", doc);
      for (const auto& [name, csv] : report.tables) write_file(fs::path(out) / name, csv);
      std::cout << (report.pass() ? "PASS" : "FAIL") << " " << task << " -> " << (fs::path(out) / "report.json").string() << "\n";
    }
    for (const auto& c : report.checks)
      if (!c.pass) std::cerr << "check failed: " << c.name << " (" << c.identity << "): " << c.value << " > " << c.tol << "\n";
    return report.pass() ? 0 : 1;
  } catch (const nlt::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlt::NotPositive& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlt::NonInvariantSymbol& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlt::DegenerateGap& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlt::RankOverflow& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
