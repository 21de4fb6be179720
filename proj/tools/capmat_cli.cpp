#include <chrono>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "capmat/config.hpp"
#include "capmat/error.hpp"
#include "capmat/experiments.hpp"
#include "capmat/parallel.hpp"

namespace {

constexpr int kValidationExit = 2;
constexpr int kNumericalExit = 3;

const char* describe(const std::string& command) {
  if (command == "cap-finite") return "capacitance matrix of a finite truncated lattice";
  if (command == "cap-quasi") return "quasi-periodic capacitance matrices and band values";
  if (command == "cap-realspace") return "real-space capacitance coefficients by inverse Floquet transform";
  if (command == "spectrum") return "eigenvalues and localization of a defected truncated structure";
  if (command == "converge-cap") return "convergence of the finite capacitance coefficient towards the infinite one";
  if (command == "converge-defect") return "convergence of defect eigenvalues with the truncation size";
  return "finite-structure eigenpairs placed on the continuous band";
}

int run(const std::string& command, const std::string& configPath, const std::string& outDir) {
  const auto start = std::chrono::steady_clock::now();
  const capmat::ExperimentConfig config = capmat::loadConfig(configPath);
  const capmat::RunOutput out = capmat::runCommand(command, config);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  capmat::writeRun(outDir, out, capmat::runManifest(out, config, seconds, capmat::threadCount()));
  for (const auto& t : out.tables) std::printf("%s/%s.csv (%zu rows)\n", outDir.c_str(), t.name().c_str(), t.rows().size());
  std::printf("%s/run.json\n", outDir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacitance matrices of periodic arrays of spherical resonators"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads (0 uses every core)")->check(CLI::NonNegativeNumber);

  std::string configPath, outDir;
  for (const std::string& name : capmat::commandNames()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", configPath, "TOML or JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", outDir, "output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  capmat::setThreadCount(threads);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, configPath, outDir);
  } catch (const capmat::Error& e) {
    std::fprintf(stderr, "capmat %s: %s\n", command.c_str(), e.what());
    return capmat::isValidationError(e.kind()) ? kValidationExit : kNumericalExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "capmat %s: %s\n", command.c_str(), e.what());
    return kNumericalExit;
  }
}
