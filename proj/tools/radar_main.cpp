#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "radar/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"radar: train and evaluate adversarial-example detectors"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"train-classifier", "train the clean classifier f"},
      {"train-detector", "train the initial detector g on PGD examples"},
      {"finetune-radar", "adversarially finetune g against adaptive attacks"},
      {"attack", "run the configured attack and dump trajectories"},
      {"evaluate", "score a detector against the configured attacks"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("-c,--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the config output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version are success; usage errors exit 1
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    radar::ExperimentConfig cfg = radar::parse_config_file(config_path);
    if (sub->count("--seed") > 0) {
      cfg.seed = seed;
      cfg.has_seed = true;
    }
    if (sub->count("--out") > 0) cfg.out_dir = out_dir;

    const std::string name = sub->get_name();
    if (name == "train-classifier") radar::cmd_train_classifier(cfg);
    else if (name == "train-detector") radar::cmd_train_detector(cfg);
    else if (name == "finetune-radar") radar::cmd_finetune_radar(cfg);
    else if (name == "attack") radar::cmd_attack(cfg);
    else radar::cmd_evaluate(cfg);
  } catch (const radar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
