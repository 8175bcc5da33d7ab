// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: gen-data, attack, train, eval, report.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "roclab/config.hpp"
#include "roclab/defense.hpp"
#include "roclab/digest.hpp"
#include "roclab/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace roclab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitRateCeiling = 4;
constexpr int kExitNumeric = 5;
constexpr int kExitDigest = 6;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool quiet = false;
};

RunConfig load_effective_config(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.seed >= 0) {
    override_seeds(cfg, static_cast<std::uint64_t>(args.seed));
  }
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

Dataset build_dataset(const RunConfig& cfg) {
  const Taxonomy tax = build_taxonomy(cfg.dataset.classes,
                                      cfg.dataset.image_size,
                                      cfg.dataset.image_size, cfg.dataset.seed);
  Dataset ds = generate_dataset(tax, cfg.dataset.train,
                                cfg.dataset.eval_per_class,
                                cfg.dataset.targets, cfg.dataset.seed);
  ds.config_digest = config_digest(cfg);
  return ds;
}

int cmd_gen_data(const CommonArgs& args) {
  const RunConfig cfg = load_effective_config(args);
  const Dataset ds = build_dataset(cfg);
  const fs::path dir = fs::path(cfg.output_dir) / "dataset";
  save_dataset(ds, dir.string());
  if (!args.quiet) {
    std::cout << "dataset " << dir.string() << "\n"
              << "digest " << dataset_digest(ds) << "\n";
  }
  return 0;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(
    const std::string& s) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw BadConfig("attack.adaptive_pairs: expected 'a:b' entries");
    }
    pairs.emplace_back(std::stoul(item.substr(0, colon)),
                       std::stoul(item.substr(colon + 1)));
  }
  if (pairs.empty()) throw BadConfig("attack.adaptive_pairs: empty list");
  return pairs;
}

int cmd_attack(const CommonArgs& args, const std::string& dataset_path) {
  const RunConfig cfg = load_effective_config(args);
  const Dataset ds = load_dataset(dataset_path);
  if (cfg.attack.kind == "none") {
    throw BadConfig("attack: attack.kind is 'none'");
  }
  const AttackSpec spec = to_attack_spec(cfg, ds.taxonomy);

  PoisonSet poisons;
  if (spec.kind == AttackKind::Targeted) {
    poisons = make_targeted_poisons(ds, spec);
  } else if (spec.kind == AttackKind::AdaptivePairs) {
    poisons = make_adaptive_pairs(ds, parse_pairs(cfg.attack.adaptive_pairs),
                                  cfg.attack.count_per_pair, spec);
  } else {
    poisons = make_backdoor_poisons(ds, spec);
  }

  Rng rng(spec.seed ^ 0xBADF00DULL);
  Dataset poisoned = inject(ds, poisons.poisons, rng, spec.rate_ceiling);
  poisoned.config_digest = config_digest(cfg);

  const fs::path dir = fs::path(cfg.output_dir) / "poisoned";
  save_dataset(poisoned, dir.string());

  json manifest = {
      {"kind", cfg.attack.kind},
      {"adv_class", spec.adv_class},
      {"config_digest", config_digest(cfg)},
      {"poison_count", poisons.poisons.size()},
      {"poison_rate", static_cast<double>(poisons.poisons.size()) /
                          static_cast<double>(ds.train.size())},
      {"target_ids", poisons.target_ids},
  };
  json ids = json::array();
  for (const PairedExample& p : poisons.poisons) ids.push_back(p.id);
  manifest["poison_ids"] = ids;
  write_text(fs::path(cfg.output_dir) / "poison_manifest.json",
             manifest.dump(2) + "\n");

  if (!args.quiet) {
    std::cout << "poisoned " << dir.string() << "\n"
              << "poisons " << poisons.poisons.size() << "\n"
              << "digest " << dataset_digest(poisoned) << "\n";
  }
  return 0;
}

json epoch_to_json(const EpochMetrics& em) {
  json j = {{"epoch", em.epoch},
            {"mode", em.mode},
            {"mean_loss", em.mean_loss},
            {"pool_oldest_stamp", em.pool_oldest_stamp},
            {"pool_newest_stamp", em.pool_newest_stamp}};
  j["clean_own_match_frac"] =
      em.clean_own_match_frac ? json(*em.clean_own_match_frac) : json();
  j["poison_adv_match_frac"] =
      em.poison_adv_match_frac ? json(*em.poison_adv_match_frac) : json();
  return j;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path) {
  const RunConfig cfg = load_effective_config(args);
  const Dataset ds = load_dataset(dataset_path);

  ModelParams params = init_params(
      cfg.train.seed, ds.taxonomy.image_h, ds.taxonomy.image_w,
      ds.taxonomy.vocab_size(), cfg.train.hidden_dim, cfg.train.feature_dim,
      cfg.train.proj_dim);

  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "checkpoints");
  std::ofstream metrics_file(out / "metrics.jsonl", std::ios::trunc);
  if (!metrics_file) throw IoError("cannot open metrics.jsonl");

  std::string last_ckpt;
  const RunMetrics metrics = train(
      ds, params, to_defense_config(cfg), to_train_config(cfg),
      [&](std::size_t epoch, const ModelParams& p, const EpochMetrics& em) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", epoch);
        last_ckpt = (out / "checkpoints" / name).string();
        save_checkpoint(p, last_ckpt);
        metrics_file << epoch_to_json(em).dump() << "\n";
      });
  metrics_file.close();

  if (cfg.train.record_match_trace) {
    std::ostringstream csv;
    csv << "epoch,example_id,provenance,matched_class_vote,true_class,own_class_vote\n";
    for (const MatchTraceRow& row : metrics.match_trace) {
      csv << row.epoch << ',' << row.example_id << ',' << row.provenance << ','
          << row.matched_class_vote << ',' << row.true_class << ','
          << row.own_class_vote << '\n';
    }
    write_text(out / "match_trace.csv", csv.str());
  }

  write_text(out / "train_config_digest.txt", config_digest(cfg) + "\n");
  if (!args.quiet) {
    std::cout << "final_checkpoint " << last_ckpt << "\n";
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& dataset_path,
             const std::string& manifest_path) {
  const RunConfig cfg = load_effective_config(args);
  const Dataset ds = load_dataset(dataset_path);
  const std::string digest = config_digest(cfg);
  if (!ds.config_digest.empty() && ds.config_digest != digest) {
    throw DigestMismatch("eval: dataset was produced by a different config");
  }

  const ModelParams params = load_checkpoint(checkpoint_path);
  const ClassPromptBank bank = build_prompt_bank(ds.taxonomy);

  json summary;
  summary["config_digest"] = digest;
  summary["seed"] = cfg.train.seed;
  summary["zero_shot"] =
      zero_shot_classify(params, ds.eval_images, bank).accuracy;
  summary["linear_probe"] =
      linear_probe(params, ds.eval_images, cfg.eval.probe_train_fraction,
                   cfg.eval.probe_epochs, cfg.eval.probe_lr, cfg.eval.seed);
  summary["psr"] = json();
  summary["bsr"] = json();
  summary["clean_acc_on_patched"] = json();

  if (!manifest_path.empty()) {
    json manifest;
    try {
      manifest = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
      throw IoError(std::string("eval: bad poison manifest: ") + e.what());
    }
    if (manifest.at("config_digest").get<std::string>() != digest) {
      throw DigestMismatch("eval: poison manifest from a different config");
    }
    const std::string kind = manifest.at("kind").get<std::string>();
    const AttackSpec spec = to_attack_spec(cfg, ds.taxonomy);
    if (kind == "targeted") {
      PoisonSet attack;
      attack.spec = spec;
      for (std::uint64_t id :
           manifest.at("target_ids").get<std::vector<std::uint64_t>>()) {
        for (const PairedExample& ex : ds.target_pool) {
          if (ex.id == id) {
            attack.target_images.push_back(ex.image);
            attack.target_ids.push_back(id);
          }
        }
      }
      summary["psr"] = poison_success_rate(params, attack, bank);
    } else if (kind != "adaptive_pairs") {
      const BackdoorResult r = backdoor_success_rate(
          params, spec.trigger, spec.kind, spec.adv_class, ds.eval_images,
          bank, cfg.eval.backdoor_eval_count, cfg.eval.seed);
      summary["bsr"] = r.bsr;
      summary["clean_acc_on_patched"] = r.clean_acc_on_same_images;
    }
  }

  const fs::path out(cfg.output_dir);
  const fs::path metrics_path = out / "metrics.jsonl";
  json per_epoch = json::array();
  if (fs::exists(metrics_path)) {
    std::istringstream in(read_text(metrics_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) per_epoch.push_back(json::parse(line));
    }
  }
  summary["per_epoch"] = per_epoch;

  write_text(out / "summary.json", summary.dump(2) + "\n");

  std::ostringstream table;
  table << "metric          value\n"
        << "zero_shot       " << summary["zero_shot"] << "\n"
        << "linear_probe    " << summary["linear_probe"] << "\n"
        << "psr             " << summary["psr"] << "\n"
        << "bsr             " << summary["bsr"] << "\n";
  write_text(out / "summary_table.txt", table.str());
  if (!args.quiet) std::cout << table.str();
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs,
               const std::string& out_dir, bool quiet) {
  if (run_dirs.empty()) throw BadConfig("report: no run dirs given");
  std::ostringstream csv;
  csv << "run,config_digest,zero_shot,linear_probe,psr,bsr\n";
  for (const std::string& dir : run_dirs) {
    const fs::path summary_path = fs::path(dir) / "summary.json";
    json summary;
    try {
      summary = json::parse(read_text(summary_path));
    } catch (const json::exception& e) {
      throw IoError(std::string("report: bad summary in ") + dir + ": " +
                    e.what());
    }
    auto field = [&](const char* key) {
      return summary.at(key).is_null() ? std::string("")
                                       : summary.at(key).dump();
    };
    csv << fs::path(dir).filename().string() << ','
        << summary.at("config_digest").get<std::string>() << ','
        << field("zero_shot") << ',' << field("linear_probe") << ','
        << field("psr") << ',' << field("bsr") << '\n';

    // Fig.-2-style match-fraction trace per run.
    std::ostringstream trace;
    trace << "epoch,clean_frac,poison_frac\n";
    for (const json& em : summary.at("per_epoch")) {
      trace << em.at("epoch") << ','
            << (em.at("clean_own_match_frac").is_null()
                    ? ""
                    : em.at("clean_own_match_frac").dump())
            << ','
            << (em.at("poison_adv_match_frac").is_null()
                    ? ""
                    : em.at("poison_adv_match_frac").dump())
            << '\n';
    }
    write_text(fs::path(out_dir) /
                   ("trace_" + fs::path(dir).filename().string() + ".csv"),
               trace.str());
  }
  write_text(fs::path(out_dir) / "runs.csv", csv.str());
  if (!quiet) std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive pre-training poisoning/defense laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string dataset_path, checkpoint_path, manifest_path;
  std::vector<std::string> run_dirs;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("--config", args.config_path, "Config file");
    if (needs_config) opt->required();
    sub->add_option("--out", args.out_dir, "Output directory override");
    sub->add_option("--seed", args.seed, "Seed override for all sections");
    sub->add_flag("--quiet", args.quiet, "Suppress stdout");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen);

  auto* attack = app.add_subcommand("attack", "Build and inject poisons");
  add_common(attack);
  attack->add_option("--dataset", dataset_path, "Dataset directory")
      ->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr);
  tr->add_option("--dataset", dataset_path, "Dataset directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev);
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  ev->add_option("--dataset", dataset_path, "Dataset directory")->required();
  ev->add_option("--poisons", manifest_path, "Poison manifest JSON");

  auto* rep = app.add_subcommand("report", "Aggregate run directories");
  rep->add_option("dirs", run_dirs, "Run directories")->required();
  rep->add_option("--out", args.out_dir, "Report output directory");
  rep->add_flag("--quiet", args.quiet, "Suppress stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (attack->parsed()) return cmd_attack(args, dataset_path);
    if (tr->parsed()) return cmd_train(args, dataset_path);
    if (ev->parsed()) {
      return cmd_eval(args, checkpoint_path, dataset_path, manifest_path);
    }
    if (rep->parsed()) {
      return cmd_report(run_dirs, args.out_dir.empty() ? "." : args.out_dir,
                        args.quiet);
    }
  } catch (const BadConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RateCeilingExceeded& e) {
    std::cerr << "rate ceiling: " << e.what() << "\n";
    return kExitRateCeiling;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NonFinite& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DigestMismatch& e) {
    std::cerr << "digest mismatch: " << e.what() << "\n";
    return kExitDigest;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
