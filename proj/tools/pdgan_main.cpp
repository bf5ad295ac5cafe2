// pdgan: command-line front end for the pseudo-depth GAN anti-spoofing
// pipeline. Verbs: synth-data, train-pdgan, finetune, evaluate, embed-pca.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 numeric failure,
// 5 degenerate data, 6 algorithmic non-convergence.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdgan/eval.hpp"
#include "pdgan/io.hpp"
#include "pdgan/models.hpp"
#include "pdgan/synthdata.hpp"
#include "pdgan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdgan;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kNumeric = 4;
constexpr int kDegenerate = 5;
constexpr int kNonConvergence = 6;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(read_text_file(path));
}

// config precedence: built-in default < config file < explicit flag
template <typename T>
void merge(const CLI::App& cmd, const json& cfg, const char* flag, const char* key,
           T& value) {
  if (cmd.count(flag) == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::uint64_t resolve_seed(const CLI::App& cmd, const json& cfg, std::uint64_t flag_value) {
  if (cmd.count("--seed") > 0) return flag_value;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("PDGAN_SEED"))
    return std::strtoull(env, nullptr, 10);
  return flag_value;
}

void write_config_echo(const fs::path& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", resolved.dump(2) + "\n");
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool has_both_classes(const Dataset& ds) {
  bool live = false, spoof = false;
  for (const auto& s : ds.samples) (s.label == Label::kLive ? live : spoof) = true;
  return live && spoof;
}

Tensor batch_rgb(const Dataset& ds, const std::vector<size_t>& idx, size_t begin,
                 size_t end) {
  const int s = ds.size;
  Tensor rgb(Shape{static_cast<int>(end - begin), 3, s, s});
  for (size_t k = begin; k < end; ++k) {
    const auto& src = ds.samples[idx[k]].rgb.data();
    std::copy(src.begin(), src.end(), rgb.data().begin() + (k - begin) * src.size());
  }
  return rgb;
}

// ---------------------------------------------------------------- synth-data

struct SynthOpts {
  std::string config, out, name = "dataset";
  int live = 0, print = 0, screen = 0, mask = 0, size = 32;
  std::uint64_t seed = 0;
};

int run_synth(const CLI::App& cmd, SynthOpts& o) {
  json cfg;
  try {
    cfg = load_config_file(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << "\n";
    return kIo;
  }
  merge(cmd, cfg, "--live", "live", o.live);
  merge(cmd, cfg, "--print", "print", o.print);
  merge(cmd, cfg, "--screen", "screen", o.screen);
  merge(cmd, cfg, "--mask", "mask", o.mask);
  merge(cmd, cfg, "--size", "size", o.size);
  merge(cmd, cfg, "--out", "out", o.out);
  merge(cmd, cfg, "--name", "name", o.name);
  o.seed = resolve_seed(cmd, cfg, o.seed);
  if (o.out.empty()) {
    std::cerr << "error: --out is required\n";
    return kUsage;
  }

  ClassCounts counts{o.live, o.print, o.screen, o.mask};
  json echo{{"command", "synth-data"}, {"live", o.live},   {"print", o.print},
            {"screen", o.screen},      {"mask", o.mask},   {"size", o.size},
            {"seed", o.seed},          {"out", o.out},     {"name", o.name}};
  DatasetManifest manifest;
  try {
    manifest = make_dataset(counts, o.size, o.seed, o.out, o.name);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  write_config_echo(o.out, echo);
  std::cout << "wrote " << manifest.count << " samples (live " << counts.live
            << ", print " << counts.print << ", screen " << counts.screen << ", mask "
            << counts.mask << ") at " << o.size << "x" << o.size << " to " << o.out
            << "\n";
  return kOk;
}

// --------------------------------------------------------------- train-pdgan

struct TrainOpts {
  std::string config, data, out, mode = "intra";
  double width = 0.25;
  double lambda_l = 100.0, lambda_g = 0.2, lambda_cg = 0.1, lambda_d = 1.0,
         lambda_cd = 1.0;
  int epochs = 12, warmup = 5, critic_interval = 25, batch_size = 16;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  bool no_augment = false, dump_depths = false;
};

void dump_depth_maps(Model& generator, const Dataset& ds,
                     const std::vector<size_t>& indices, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<size_t> one(1);
  for (size_t i : indices) {
    one[0] = i;
    Tensor rgb = batch_rgb(ds, one, 0, 1);
    Tensor depth = generator_forward(generator, rgb, /*training=*/false);
    const Sample& s = ds.samples[i];
    std::ostringstream name;
    name << "depth_" << i << '_' << (s.label == Label::kLive ? "live" : "spoof")
         << ".pgm";
    write_pgm(dir / name.str(), depth.data(), ds.size, ds.size);
  }
}

int run_train(const CLI::App& cmd, TrainOpts& o) {
  json cfg;
  try {
    cfg = load_config_file(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << "\n";
    return kIo;
  }
  merge(cmd, cfg, "--data", "data", o.data);
  merge(cmd, cfg, "--out", "out", o.out);
  merge(cmd, cfg, "--mode", "mode", o.mode);
  merge(cmd, cfg, "--width", "width", o.width);
  merge(cmd, cfg, "--lambda-g", "lambda_g", o.lambda_g);
  merge(cmd, cfg, "--lambda-cg", "lambda_cg", o.lambda_cg);
  merge(cmd, cfg, "--lambda-d", "lambda_d", o.lambda_d);
  merge(cmd, cfg, "--lambda-cd", "lambda_cd", o.lambda_cd);
  merge(cmd, cfg, "--epochs", "epochs", o.epochs);
  merge(cmd, cfg, "--warmup", "warmup", o.warmup);
  merge(cmd, cfg, "--critic-interval", "critic_interval", o.critic_interval);
  merge(cmd, cfg, "--batch-size", "batch_size", o.batch_size);
  merge(cmd, cfg, "--val-fraction", "val_fraction", o.val_fraction);
  merge(cmd, cfg, "--no-augment", "no_augment", o.no_augment);
  merge(cmd, cfg, "--dump-depths", "dump_depths", o.dump_depths);
  o.seed = resolve_seed(cmd, cfg, o.seed);
  if (o.mode != "intra" && o.mode != "inter") {
    std::cerr << "error: --mode must be intra or inter\n";
    return kUsage;
  }
  // the mode tag only sets lambda_l's default tier; explicit values win
  if (cmd.count("--lambda-l") > 0)
    ;  // flag value already in place
  else if (cfg.contains("lambda_l"))
    o.lambda_l = cfg.at("lambda_l").get<double>();
  else
    o.lambda_l = o.mode == "inter" ? 50.0 : 100.0;
  if (o.data.empty() || o.out.empty()) {
    std::cerr << "error: --data and --out are required\n";
    return kUsage;
  }

  Dataset ds;
  try {
    ds = load_dataset(fs::path(o.data));
  } catch (const std::exception& e) {
    std::cerr << "error: cannot load dataset: " << e.what() << "\n";
    return kIo;
  }
  if (!has_both_classes(ds)) {
    std::cerr << "error: training dataset must contain live and spoof samples\n";
    return kDegenerate;
  }

  TrainConfig tc;
  tc.lambda_l = o.lambda_l;
  tc.lambda_g = o.lambda_g;
  tc.lambda_cg = o.lambda_cg;
  tc.lambda_d = o.lambda_d;
  tc.lambda_cd = o.lambda_cd;
  tc.total_pdgan_epochs = o.epochs;
  tc.warmup_epochs = o.warmup;
  tc.critic_interval = o.critic_interval;
  tc.batch_size = o.batch_size;
  tc.validation_fraction = o.val_fraction;
  tc.seed = o.seed;
  tc.augment_enabled = !o.no_augment;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  json echo{{"command", "train-pdgan"},
            {"data", o.data},
            {"out", o.out},
            {"mode", o.mode},
            {"width", o.width},
            {"lambda_l", o.lambda_l},
            {"lambda_g", o.lambda_g},
            {"lambda_cg", o.lambda_cg},
            {"lambda_d", o.lambda_d},
            {"lambda_cd", o.lambda_cd},
            {"epochs", o.epochs},
            {"warmup", o.warmup},
            {"critic_interval", o.critic_interval},
            {"batch_size", o.batch_size},
            {"val_fraction", o.val_fraction},
            {"seed", o.seed},
            {"no_augment", o.no_augment},
            {"dump_depths", o.dump_depths}};
  try {
    write_config_echo(o.out, echo);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }

  Model generator = init_generator(o.width, o.seed);
  Model critic = init_critic(o.width, o.seed ^ 0x637269746963ULL);
  PdganTrainer trainer(std::move(generator), std::move(critic), tc, ds);

  std::ostringstream header;
  header << "# mode=" << o.mode << " lambda_l=" << o.lambda_l
         << " lambda_g=" << o.lambda_g << " lambda_cg=" << o.lambda_cg
         << " lambda_d=" << o.lambda_d << " lambda_cd=" << o.lambda_cd
         << " seed=" << o.seed << " width=" << o.width << "\n";

  TrainLog log;
  int code = kOk;
  try {
    for (int e = 0; e < tc.total_pdgan_epochs; ++e) {
      if (trainer.epochs_done() < tc.warmup_epochs)
        trainer.warmup_epoch(log);
      else
        trainer.pdgan_epoch(log);
      log.epoch_val_l1.push_back(trainer.validation_l1());
      json extra{{"pdgan_epochs", trainer.epochs_done()},
                 {"warmup_epochs", tc.warmup_epochs},
                 {"step_counter", trainer.generator_steps()},
                 {"seed", o.seed}};
      std::ostringstream tag;
      tag << "epoch_" << trainer.epochs_done();
      save_checkpoint(trainer.generator(),
                      fs::path(o.out) / "checkpoints" / tag.str() / "generator", extra);
      save_checkpoint(trainer.critic(),
                      fs::path(o.out) / "checkpoints" / tag.str() / "critic", extra);
    }
  } catch (const NonFiniteError& e) {
    // last-good per-epoch checkpoint is already on disk
    std::cerr << "error: " << e.what() << "\n";
    code = kNumeric;
  }

  try {
    write_text_file(fs::path(o.out) / "train_log.csv", header.str() + log.to_csv());
    if (code == kOk) {
      json extra{{"pdgan_epochs", trainer.epochs_done()},
                 {"warmup_epochs", tc.warmup_epochs},
                 {"step_counter", trainer.generator_steps()},
                 {"seed", o.seed}};
      save_checkpoint(trainer.generator(), fs::path(o.out) / "generator", extra);
      save_checkpoint(trainer.critic(), fs::path(o.out) / "critic", extra);
      if (o.dump_depths) {
        std::vector<size_t> indices = trainer.validation_indices();
        if (indices.empty())
          for (size_t i = 0; i < ds.samples.size(); ++i) indices.push_back(i);
        dump_depth_maps(trainer.generator(), ds, indices, fs::path(o.out) / "depths");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }
  if (code == kOk)
    std::cout << "trained " << trainer.epochs_done() << " epochs ("
              << tc.warmup_epochs << " warmup), " << trainer.generator_steps()
              << " generator steps, " << trainer.critic_steps()
              << " critic steps; final validation L1 "
              << (log.epoch_val_l1.empty() ? 0.0 : log.epoch_val_l1.back()) << "\n";
  return code;
}

// ------------------------------------------------------------------ finetune

struct FinetuneOpts {
  std::string config, data, out, backbone;
  int epochs = -1, epoch_normalize = -1, batch_size = 16;
  bool multihead = false, no_augment = false;
  std::uint64_t seed = 0;
};

int run_finetune(const CLI::App& cmd, FinetuneOpts& o) {
  json cfg;
  try {
    cfg = load_config_file(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << "\n";
    return kIo;
  }
  merge(cmd, cfg, "--data", "data", o.data);
  merge(cmd, cfg, "--out", "out", o.out);
  merge(cmd, cfg, "--backbone", "backbone", o.backbone);
  merge(cmd, cfg, "--epochs", "epochs", o.epochs);
  merge(cmd, cfg, "--epoch-normalize", "epoch_normalize", o.epoch_normalize);
  merge(cmd, cfg, "--batch-size", "batch_size", o.batch_size);
  merge(cmd, cfg, "--multihead", "multihead", o.multihead);
  merge(cmd, cfg, "--no-augment", "no_augment", o.no_augment);
  o.seed = resolve_seed(cmd, cfg, o.seed);
  if (o.data.empty() || o.out.empty() || o.backbone.empty()) {
    std::cerr << "error: --data, --out and --backbone are required\n";
    return kUsage;
  }

  Model backbone_generator, backbone_classifier;
  const Model* gen_ptr = nullptr;
  const Model* clf_ptr = nullptr;
  int backbone_epochs = 0;
  std::string tag;
  if (o.backbone == "he") {
    tag = "he";
  } else if (o.backbone.rfind("pdgan:", 0) == 0) {
    tag = "pdgan";
    try {
      Checkpoint ck = load_checkpoint(o.backbone.substr(6));
      if (ck.model.def.arch != Arch::kGenerator) {
        std::cerr << "error: pdgan backbone checkpoint is not a generator\n";
        return kUsage;
      }
      backbone_generator = std::move(ck.model);
      backbone_epochs = ck.extra.value("pdgan_epochs", 0);
      gen_ptr = &backbone_generator;
    } catch (const std::exception& e) {
      std::cerr << "error: cannot load backbone checkpoint: " << e.what() << "\n";
      return kIo;
    }
  } else if (o.backbone.rfind("ckpt:", 0) == 0) {
    tag = "ckpt";
    try {
      Checkpoint ck = load_checkpoint(o.backbone.substr(5));
      if (ck.model.def.arch != Arch::kClassifier) {
        std::cerr << "error: ckpt backbone checkpoint is not a classifier\n";
        return kUsage;
      }
      backbone_classifier = std::move(ck.model);
      backbone_epochs = ck.extra.value("epochs_seen", 0);
      clf_ptr = &backbone_classifier;
    } catch (const std::exception& e) {
      std::cerr << "error: cannot load backbone checkpoint: " << e.what() << "\n";
      return kIo;
    }
  } else {
    std::cerr << "error: --backbone must be he, pdgan:PATH or ckpt:PATH\n";
    return kUsage;
  }

  int epochs = o.epochs;
  if (o.epoch_normalize >= 0) {
    try {
      epochs = epoch_budget(o.epoch_normalize, backbone_epochs);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUsage;
    }
  }
  if (epochs < 0) {
    std::cerr << "error: one of --epochs or --epoch-normalize is required\n";
    return kUsage;
  }

  Dataset ds;
  try {
    ds = load_dataset(fs::path(o.data));
  } catch (const std::exception& e) {
    std::cerr << "error: cannot load dataset: " << e.what() << "\n";
    return kIo;
  }
  if (!has_both_classes(ds)) {
    std::cerr << "error: training dataset must contain live and spoof samples\n";
    return kDegenerate;
  }

  TrainConfig tc;
  tc.seed = o.seed;
  tc.batch_size = o.batch_size;
  tc.augment_enabled = !o.no_augment;

  json echo{{"command", "finetune"},   {"data", o.data},
            {"out", o.out},            {"backbone", o.backbone},
            {"epochs", o.epochs},      {"epoch_normalize", o.epoch_normalize},
            {"batch_size", o.batch_size}, {"multihead", o.multihead},
            {"no_augment", o.no_augment}, {"seed", o.seed}};
  try {
    write_config_echo(o.out, echo);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }

  FinetuneResult result;
  try {
    result = finetune_classifier(gen_ptr, clf_ptr, ds, epochs, o.multihead, tc);
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  std::ostringstream header;
  header << "# backbone=" << tag << " backbone_epochs=" << backbone_epochs
         << " epochs=" << epochs << " multihead=" << (o.multihead ? 1 : 0)
         << " seed=" << o.seed << "\n";
  try {
    write_text_file(fs::path(o.out) / "finetune_log.csv",
                    header.str() + result.log.to_csv());
    json extra{{"backbone", tag},
               {"backbone_epochs", backbone_epochs},
               {"finetune_epochs", epochs},
               {"epochs_seen", backbone_epochs + epochs},
               {"seed", o.seed}};
    save_checkpoint(result.classifier, fs::path(o.out) / "classifier", extra);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }
  std::cout << "finetuned classifier (" << tag << " backbone) for " << epochs
            << " epochs, " << result.log.steps.size() << " steps\n";
  return kOk;
}

// ------------------------------------------------------------------ evaluate

struct EvalOpts {
  std::string config, classifier, data, out;
  int batch_size = 32;
};

int run_evaluate(const CLI::App& cmd, EvalOpts& o) {
  json cfg;
  try {
    cfg = load_config_file(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << "\n";
    return kIo;
  }
  merge(cmd, cfg, "--classifier", "classifier", o.classifier);
  merge(cmd, cfg, "--data", "data", o.data);
  merge(cmd, cfg, "--out", "out", o.out);
  merge(cmd, cfg, "--batch-size", "batch_size", o.batch_size);
  if (o.classifier.empty() || o.data.empty() || o.out.empty()) {
    std::cerr << "error: --classifier, --data and --out are required\n";
    return kUsage;
  }

  Model classifier;
  Dataset ds;
  try {
    Checkpoint ck = load_checkpoint(o.classifier);
    if (ck.model.def.arch != Arch::kClassifier) {
      std::cerr << "error: checkpoint is not a classifier\n";
      return kUsage;
    }
    classifier = std::move(ck.model);
    ds = load_dataset(fs::path(o.data));
  } catch (const std::exception& e) {
    std::cerr << "error: cannot load inputs: " << e.what() << "\n";
    return kIo;
  }
  if (!has_both_classes(ds)) {
    std::cerr << "error: test set must contain live and spoof samples\n";
    return kDegenerate;
  }

  json echo{{"command", "evaluate"},
            {"classifier", o.classifier},
            {"data", o.data},
            {"out", o.out},
            {"batch_size", o.batch_size}};
  try {
    write_config_echo(o.out, echo);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }

  ScoredSet set = score_dataset(classifier, ds, o.batch_size);
  MetricsReport r = sweep_threshold(set);

  std::ostringstream scores_csv;
  scores_csv << "index,score,label\n";
  for (size_t i = 0; i < set.scores.size(); ++i)
    scores_csv << i << ',' << csv_number(set.scores[i]) << ',' << set.labels[i] << '\n';

  json report{{"bpcer", r.bpcer},
              {"apcer", r.apcer},
              {"acer", r.acer},
              {"f1", r.f1},
              {"auc", r.auc},
              {"threshold", r.threshold},
              {"counts",
               {{"tp", r.counts.tp},
                {"fp", r.counts.fp},
                {"tn", r.counts.tn},
                {"fn", r.counts.fn}}},
              {"convention", "score = p(live); predicted live iff score >= "
                             "threshold; F1 positive class = live"}};
  try {
    write_text_file(fs::path(o.out) / "scores.csv", scores_csv.str());
    write_text_file(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }

  std::cout << "# score = p(live); predicted live iff score >= threshold; "
               "F1 positive class = live\n";
  std::cout << "BPCER APCER ACER F1 Threshold AUC\n";
  std::ostringstream row;
  row.precision(6);
  row << std::fixed << r.bpcer << ' ' << r.apcer << ' ' << r.acer << ' ' << r.f1 << ' '
      << r.threshold << ' ' << r.auc << '\n';
  std::cout << row.str();
  return kOk;
}

// ----------------------------------------------------------------- embed-pca

struct EmbedOpts {
  std::string config, data, out;
  std::vector<std::string> sources;
  double width = 0.25;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

int run_embed(const CLI::App& cmd, EmbedOpts& o) {
  json cfg;
  try {
    cfg = load_config_file(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << "\n";
    return kIo;
  }
  merge(cmd, cfg, "--data", "data", o.data);
  merge(cmd, cfg, "--out", "out", o.out);
  merge(cmd, cfg, "--source", "sources", o.sources);
  merge(cmd, cfg, "--width", "width", o.width);
  merge(cmd, cfg, "--batch-size", "batch_size", o.batch_size);
  o.seed = resolve_seed(cmd, cfg, o.seed);
  if (o.data.empty() || o.out.empty() || o.sources.empty()) {
    std::cerr << "error: --data, --out and at least one --source are required\n";
    return kUsage;
  }

  Dataset ds;
  try {
    ds = load_dataset(fs::path(o.data));
  } catch (const std::exception& e) {
    std::cerr << "error: cannot load dataset: " << e.what() << "\n";
    return kIo;
  }

  json echo{{"command", "embed-pca"}, {"data", o.data},       {"out", o.out},
            {"sources", o.sources},   {"width", o.width},     {"seed", o.seed},
            {"batch_size", o.batch_size}};
  try {
    write_config_echo(o.out, echo);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kIo;
  }

  std::vector<std::string> used_tags;
  for (const std::string& source : o.sources) {
    Model model;
    std::string tag;
    if (source == "he") {
      model = init_generator(o.width, o.seed);
      tag = "he";
    } else if (source.rfind("ckpt:", 0) == 0) {
      try {
        Checkpoint ck = load_checkpoint(source.substr(5));
        model = std::move(ck.model);
      } catch (const std::exception& e) {
        std::cerr << "error: cannot load checkpoint: " << e.what() << "\n";
        return kIo;
      }
      tag = fs::path(source.substr(5)).filename().string();
      if (tag.empty()) tag = "ckpt";
    } else {
      std::cerr << "error: --source must be he or ckpt:PATH\n";
      return kUsage;
    }
    while (std::count(used_tags.begin(), used_tags.end(), tag) > 0) tag += "_dup";
    used_tags.push_back(tag);

    std::vector<std::vector<double>> embeddings;
    std::vector<int> labels;
    std::vector<size_t> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), 0u);
    for (size_t begin = 0; begin < idx.size();
         begin += static_cast<size_t>(o.batch_size)) {
      size_t end = std::min(idx.size(), begin + static_cast<size_t>(o.batch_size));
      Tensor rgb = batch_rgb(ds, idx, begin, end);
      Tensor emb = encoder_embed(model, rgb);
      const int dim = emb.shape()[1];
      for (size_t row = 0; row < end - begin; ++row) {
        embeddings.emplace_back(emb.data().begin() + row * dim,
                                emb.data().begin() + (row + 1) * dim);
        labels.push_back(static_cast<int>(ds.samples[idx[begin + row]].label));
      }
    }

    PcaProjection proj;
    try {
      proj = pca_2d(embeddings, labels);
    } catch (const std::exception& e) {
      std::cerr << "error: pca failed for source " << tag << ": " << e.what() << "\n";
      return kNonConvergence;
    }
    std::ostringstream csv;
    csv << "x,y,label\n";
    for (size_t i = 0; i < proj.x.size(); ++i)
      csv << csv_number(proj.x[i]) << ',' << csv_number(proj.y[i]) << ','
          << proj.labels[i] << '\n';
    try {
      write_text_file(fs::path(o.out) / ("pca_" + tag + ".csv"), csv.str());
    } catch (const std::exception& e) {
      std::cerr << "error: cannot write outputs: " << e.what() << "\n";
      return kIo;
    }
    std::cout << "pca_" << tag << ".csv: var1 " << proj.var1 << ", var2 " << proj.var2
              << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdgan: pseudo-depth GAN face anti-spoofing pipeline"};
  app.require_subcommand(1);

  SynthOpts so;
  CLI::App* synth = app.add_subcommand("synth-data", "generate a synthetic dataset");
  synth->add_option("--config", so.config, "JSON config file");
  synth->add_option("--live", so.live, "live sample count");
  synth->add_option("--print", so.print, "print-attack sample count");
  synth->add_option("--screen", so.screen, "screen-attack sample count");
  synth->add_option("--mask", so.mask, "mask-attack sample count");
  synth->add_option("--size", so.size, "image side length");
  synth->add_option("--seed", so.seed, "rng seed");
  synth->add_option("--out", so.out, "output directory");
  synth->add_option("--name", so.name, "dataset name");

  TrainOpts to;
  CLI::App* train = app.add_subcommand("train-pdgan", "train the depth generator");
  train->add_option("--config", to.config, "JSON config file");
  train->add_option("--data", to.data, "training manifest");
  train->add_option("--out", to.out, "output directory");
  train->add_option("--mode", to.mode, "intra | inter (lambda_l default tier)");
  train->add_option("--width", to.width, "width multiplier");
  train->add_option("--lambda-l", to.lambda_l, "L1 weight");
  train->add_option("--lambda-g", to.lambda_g, "generator adversarial weight");
  train->add_option("--lambda-cg", to.lambda_cg, "generator aux-class weight");
  train->add_option("--lambda-d", to.lambda_d, "critic adversarial weight");
  train->add_option("--lambda-cd", to.lambda_cd, "critic aux-class weight");
  train->add_option("--epochs", to.epochs, "total epochs incl. warmup");
  train->add_option("--warmup", to.warmup, "warmup epochs");
  train->add_option("--critic-interval", to.critic_interval, "generator steps per critic step");
  train->add_option("--batch-size", to.batch_size, "batch size");
  train->add_option("--val-fraction", to.val_fraction, "validation split fraction");
  train->add_option("--seed", to.seed, "rng seed");
  train->add_flag("--no-augment", to.no_augment, "disable augmentation");
  train->add_flag("--dump-depths", to.dump_depths, "write generated depth PGMs");

  FinetuneOpts fo;
  CLI::App* finetune = app.add_subcommand("finetune", "train the liveness classifier");
  finetune->add_option("--config", fo.config, "JSON config file");
  finetune->add_option("--data", fo.data, "training manifest");
  finetune->add_option("--out", fo.out, "output directory");
  finetune->add_option("--backbone", fo.backbone, "he | pdgan:PATH | ckpt:PATH");
  finetune->add_option("--epochs", fo.epochs, "training epochs");
  finetune->add_option("--epoch-normalize", fo.epoch_normalize,
                       "baseline budget; epochs = budget - backbone epochs");
  finetune->add_option("--batch-size", fo.batch_size, "batch size");
  finetune->add_option("--seed", fo.seed, "rng seed");
  finetune->add_flag("--multihead", fo.multihead, "add the 4-way spoof-class head");
  finetune->add_flag("--no-augment", fo.no_augment, "disable augmentation");

  EvalOpts eo;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a test set and report metrics");
  evaluate->add_option("--config", eo.config, "JSON config file");
  evaluate->add_option("--classifier", eo.classifier, "classifier checkpoint directory");
  evaluate->add_option("--data", eo.data, "test manifest");
  evaluate->add_option("--out", eo.out, "output directory");
  evaluate->add_option("--batch-size", eo.batch_size, "batch size");

  EmbedOpts mo;
  CLI::App* embed = app.add_subcommand("embed-pca", "project encoder embeddings to 2-D");
  embed->add_option("--config", mo.config, "JSON config file");
  embed->add_option("--data", mo.data, "dataset manifest");
  embed->add_option("--out", mo.out, "output directory");
  embed->add_option("--source", mo.sources, "he | ckpt:PATH (repeatable)");
  embed->add_option("--width", mo.width, "width multiplier for the he source");
  embed->add_option("--batch-size", mo.batch_size, "batch size");
  embed->add_option("--seed", mo.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return run_synth(*synth, so);
    if (train->parsed()) return run_train(*train, to);
    if (finetune->parsed()) return run_finetune(*finetune, fo);
    if (evaluate->parsed()) return run_evaluate(*evaluate, eo);
    if (embed->parsed()) return run_embed(*embed, mo);
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
