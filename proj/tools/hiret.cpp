#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "hiret/config.hpp"
#include "hiret/errors.hpp"
#include "hiret/pipeline.hpp"

namespace {

std::string config_help() {
  std::string out = "Config keys (INI sections; values shown for the desk preset):\n";
  std::string section;
  for (const auto& [key, value] : hiret::config_entries(hiret::preset_config("desk"))) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out += "  [" + section + "]\n";
    }
    out += "    " + key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented report generation on a synthetic corpus"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(config_help());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string variant_text = "full";
  std::string log_level = "info";
  hiret::PipelinePaths paths;
  std::string data_dir = paths.data.string();
  std::string out_dir = paths.out.string();
  std::string checkpoint_dir = paths.checkpoints.string();

  app.add_option("--config", config_path, "INI config file (defaults to the desk preset)");
  app.add_option("--seed", seed, "overrides run.seed");
  app.add_option("--data", data_dir, "corpus directory")->capture_default_str();
  app.add_option("--out", out_dir, "metrics, generations and traces")->capture_default_str();
  app.add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->capture_default_str();
  app.add_option("--variant", variant_text, "full, no-vlrm, no-llrm or no-hld")
      ->check(CLI::IsMember({"full", "no-vlrm", "no-llrm", "no-hld"}))
      ->capture_default_str();
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic corpus, vocabulary and dictionary");
  auto* vlr = app.add_subcommand("pretrain-vlr", "stage 1: image-report retrieval");
  auto* llr = app.add_subcommand("pretrain-llr", "stage 2: sentence-sentence retrieval");
  auto* train = app.add_subcommand("train", "stage 3: the decoder with both retrieval modules frozen");
  auto* generate = app.add_subcommand("generate", "write test-set generations, retrieval traces and attention");
  auto* evaluate = app.add_subcommand("evaluate", "score a variant against the V-L Retrieval baseline");
  auto* ablate = app.add_subcommand("ablate", "train and score every variant");
  auto* show = app.add_subcommand("config", "print the effective config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; bad flags are usage errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("hiret"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    hiret::Config config = config_path.empty() ? hiret::preset_config("desk") : hiret::load_config(config_path);
    if (seed) config.seed = *seed;
    hiret::validate(config);
    if (show->parsed()) {
      for (const auto& [key, value] : hiret::config_entries(config)) std::cout << key << " = " << value << '\n';
      return 0;
    }
    paths.data = data_dir;
    paths.out = out_dir;
    paths.checkpoints = checkpoint_dir;
    const hiret::Variant variant = hiret::parse_variant(variant_text);
    hiret::Pipeline pipeline(config, paths);

    if (synth->parsed()) {
      pipeline.synth_data();
    } else if (vlr->parsed()) {
      const auto ev = pipeline.pretrain_vlr();
      std::printf("vlr matching accuracy %.4f  disease AUC %.4f\n", ev.match_accuracy, ev.disease_auc);
    } else if (llr->parsed()) {
      std::printf("llr pair accuracy %.4f\n", pipeline.pretrain_llr());
    } else if (train->parsed()) {
      pipeline.train(variant);
    } else if (generate->parsed()) {
      pipeline.generate(variant);
    } else if (evaluate->parsed()) {
      std::cout << hiret::format_table(pipeline.evaluate(variant));
    } else if (ablate->parsed()) {
      std::cout << hiret::format_table(pipeline.ablate());
    }
  } catch (const hiret::MissingArtifactError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const hiret::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const hiret::UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const hiret::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
