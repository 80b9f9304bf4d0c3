#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "randcontrol/config.hpp"
#include "randcontrol/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo toolkit for control randomization"};
  std::string mode, config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("mode", mode, "brute|randomized|bsde|oracle|campaign (overrides config)");
  app.add_option("--config", config_path, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  auto* out_opt = app.add_option("--out", out_dir, "output directory override");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::string raw = "{}";
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw randcontrol::ConfigError("cannot read config file '" + config_path + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      raw = ss.str();
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const std::exception& e) {
      throw randcontrol::ConfigError(std::string("config parse: ") + e.what());
    }
    if (!j.is_object()) throw randcontrol::ConfigError("config must be a JSON object");
    if (!mode.empty()) j["mode"] = mode;
    if (seed_opt->count() > 0) j["seed"] = seed;
    if (out_opt->count() > 0) j["out_dir"] = out_dir;
    randcontrol::ExperimentConfig cfg = randcontrol::validate_config(j.dump());
    return randcontrol::run_mode(cfg);
  } catch (const randcontrol::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const randcontrol::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
