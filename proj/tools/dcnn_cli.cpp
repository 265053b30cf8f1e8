#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dcnn/arch.hpp"
#include "dcnn/checkpoint.hpp"
#include "dcnn/correlation.hpp"
#include "dcnn/dtns.hpp"
#include "dcnn/train.hpp"

namespace fs = std::filesystem;
using namespace dcnn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int cmd_train(const std::string& config_file, const std::string& data, std::uint64_t seed,
              const std::string& out, std::size_t epochs, std::size_t batch,
              const std::string& optimizer, double lr, double dropout, bool no_augment,
              int precision, bool no_timing, const std::string& dc_path) {
  train::TrainConfig cfg;
  cfg.arch = arch::load_config(config_file);
  cfg.data = data;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.optimizer = train::parse_optimizer(optimizer);
  cfg.lr = lr;
  cfg.dropout = dropout;
  cfg.augment = !no_augment;
  cfg.record_time = !no_timing;
  if (dc_path == "reference") cfg.dc_path = nn::DoubleConvPath::Reference;
  else if (dc_path != "twostep") throw ParameterError("--dc-path must be twostep or reference");
  const auto history = train::run(cfg, precision, out);
  const auto& last = history.back();
  std::printf("epochs %zu  train_loss %.6f  train_err %.4f  test_err %.4f\n", last.epoch,
              last.train_loss, last.train_err, last.test_err);
  std::printf("wrote %s and %s\n", (fs::path(out) / "metrics.csv").c_str(),
              (fs::path(out) / "checkpoint").c_str());
  return kOk;
}

int cmd_export(const std::string& checkpoint, std::size_t layer, const std::string& out) {
  const fs::path dir(checkpoint);
  const nn::Manifest m = nn::read_manifest(dir / nn::kManifestName);
  for (const auto& e : m.entries) {
    if (e.layer != layer || (e.kind != "conv" && e.kind != "doubleconv")) continue;
    const std::string bytes = dtns::read_bytes(dir / e.file);
    dtns::decode<double>(bytes);  // validate before copying
    std::ofstream os(out, std::ios::binary);
    if (!os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
      throw IoError("cannot write " + out);
    }
    std::printf("layer %zu (%s %s) -> %s\n", layer, e.kind.c_str(), e.name.c_str(), out.c_str());
    return kOk;
  }
  throw ParameterError("layer " + std::to_string(layer) + " of " + checkpoint +
                       " is not a conv or doubleconv layer");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double convolutional network toolkit"};
  app.require_subcommand(1);

  std::string config, data = "synthetic", out, optimizer = "adadelta", dc_path = "twostep";
  std::uint64_t seed = 0;
  std::size_t epochs = 1, batch = 200;
  double lr = 0.01, dropout = 0.5;
  bool no_augment = false, no_timing = false;
  int precision = 32;
  auto* train_cmd = app.add_subcommand("train", "train a network, write metrics and checkpoint");
  train_cmd->add_option("--config", config, "architecture file")->required();
  train_cmd->add_option("--data", data, "CIFAR-10 directory or synthetic[:key=value,...]")
      ->required();
  train_cmd->add_option("--seed", seed)->required();
  train_cmd->add_option("--out", out, "output directory")->required();
  train_cmd->add_option("--epochs", epochs)->capture_default_str();
  train_cmd->add_option("--batch", batch)->capture_default_str();
  train_cmd->add_option("--optimizer", optimizer)
      ->check(CLI::IsMember({"adadelta", "sgd"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", lr, "sgd learning rate")->capture_default_str();
  train_cmd->add_option("--dropout", dropout)->capture_default_str();
  train_cmd->add_flag("--no-augment", no_augment);
  train_cmd->add_option("--precision", precision)
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();
  train_cmd->add_flag("--no-timing", no_timing, "write 0 in the seconds column");
  train_cmd->add_option("--dc-path", dc_path, "twostep|reference")->capture_default_str();

  std::string checkpoint, split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "error rate of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "test"}))->required();

  std::string reference;
  auto* inspect_cmd = app.add_subcommand("inspect", "shape and parameter table");
  inspect_cmd->add_option("--config", config)->required();
  inspect_cmd->add_option("--reference", reference);

  int k = 1;
  std::uint64_t baseline_seed = 0;
  auto* analyze_cmd = app.add_subcommand("analyze", "translation correlation report");
  analyze_cmd->add_option("--checkpoint", checkpoint)->required();
  analyze_cmd->add_option("--k", k)->required()->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--seed", baseline_seed)->capture_default_str();
  analyze_cmd->add_option("--out", out, "CSV file")->required();

  std::size_t layer = 0;
  auto* export_cmd = app.add_subcommand("export-filters", "copy one layer's filters to DTNS");
  export_cmd->add_option("--checkpoint", checkpoint)->required();
  export_cmd->add_option("--layer", layer, "network layer index as in the manifest")->required();
  export_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      return cmd_train(config, data, seed, out, epochs, batch, optimizer, lr, dropout, no_augment,
                       precision, no_timing, dc_path);
    }
    if (*eval_cmd) {
      const double err = train::evaluate_checkpoint(checkpoint, data, data::parse_split(split));
      std::printf("%s error %.6f\n", split.c_str(), err);
      return kOk;
    }
    if (*inspect_cmd) {
      const arch::ArchSpec spec = arch::load_config(config);
      if (reference.empty()) {
        std::cout << arch::inspect_table(spec);
      } else {
        const arch::ArchSpec ref = arch::load_config(reference);
        std::cout << arch::inspect_table(spec, &ref);
      }
      return kOk;
    }
    if (*analyze_cmd) {
      const auto report = correlation::analyze_checkpoint(checkpoint, k, baseline_seed);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::ofstream os(out, std::ios::binary);
      if (!(os << correlation::to_csv(report))) throw IoError("cannot write " + out);
      std::printf("%zu layer(s) -> %s\n", report.records.size(), out.c_str());
      return kOk;
    }
    if (*export_cmd) return cmd_export(checkpoint, layer, out);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DegenerateError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
