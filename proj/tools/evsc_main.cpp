#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "evsc/config.hpp"
#include "evsc/error.hpp"
#include "evsc/pipeline.hpp"
#include "evsc/version.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::string seed;
  std::string out;
  std::string metric;
  std::string data;
  std::string network;
  std::string bank;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value configuration file");
  cmd->add_option("--seed", flags.seed, "top-level random seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--metric", flags.metric, "euclidean|bhattacharyya|both");
  cmd->add_option("--data", flags.data, "dataset directory (holds the manifests)");
  cmd->add_option("--network", flags.network, "trained network directory");
  cmd->add_option("--bank", flags.bank, "signature bank file");
  cmd->add_option("--in", flags.inputs, "input event file(s)");
}

// Config file first, then flags on top: flags win.
evsc::RunConfig resolve(const CommonFlags& flags) {
  evsc::KeyValues kv;
  if (!flags.config_file.empty()) kv = evsc::read_key_values_file(flags.config_file);
  if (!flags.seed.empty()) kv["seed"] = flags.seed;
  if (!flags.out.empty()) kv["out"] = flags.out;
  if (!flags.metric.empty()) kv["metric"] = flags.metric;
  if (!flags.data.empty()) kv["data"] = flags.data;
  if (!flags.network.empty()) kv["network"] = flags.network;
  if (!flags.bank.empty()) kv["bank"] = flags.bank;
  evsc::RunConfig cfg = evsc::config_from_kv(kv);
  if (!flags.inputs.empty()) cfg.inputs = flags.inputs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical sparse coding of event-camera time surfaces"};
  app.set_version_flag("--version", std::string(evsc::kVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic labeled dataset");
  CLI::App* train = app.add_subcommand("train", "train the hierarchical network");
  CLI::App* encode = app.add_subcommand("encode", "run event files through a trained network");
  CLI::App* classify = app.add_subcommand("classify", "label event files against a bank");
  CLI::App* evaluate = app.add_subcommand("evaluate", "build the bank and score the test set");
  CLI::App* sweep = app.add_subcommand("sweep", "dictionary-size sweep on layer-1 surfaces");
  for (CLI::App* cmd : {generate, train, encode, classify, evaluate, sweep}) {
    add_common(cmd, flags);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    evsc::RunConfig cfg = resolve(flags);
    if (generate->parsed()) {
      evsc::GenerateResult res = evsc::cmd_generate(cfg);
      std::printf("generated %zu train + %zu test examples under %s\n", res.train.size(),
                  res.test.size(), res.dataset_dir.c_str());
    } else if (train->parsed()) {
      evsc::TrainResult res = evsc::cmd_train(cfg);
      std::printf("network written to %s (%.2f s)\n", res.network_dir.c_str(), res.wall_seconds);
    } else if (encode->parsed()) {
      evsc::cmd_encode(cfg);
      std::printf("leaf streams written to %s\n", cfg.out_dir.c_str());
    } else if (classify->parsed()) {
      for (const auto& [path, label] : evsc::cmd_classify(cfg)) {
        std::printf("%s,%s\n", path.c_str(), label.c_str());
      }
    } else if (evaluate->parsed()) {
      evsc::EvaluateResult res = evsc::cmd_evaluate(cfg);
      for (const evsc::EvaluationReport& report : res.reports) {
        std::printf("recognition_rate.%s=%.2f%%\n",
                    report.metric == evsc::Metric::kEuclidean ? "euclidean" : "bhattacharyya",
                    100.0 * report.recognition_rate());
      }
      std::printf("report written to %s\n", res.report_path.c_str());
    } else if (sweep->parsed()) {
      evsc::SizeSelection sel = evsc::cmd_sweep(cfg);
      std::printf("best_atom_count=%d\n", sel.best_atom_count);
    }
  } catch (const evsc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
