// Acceptance suite: one pass/fail line per criterion. Runs the desk-scale
// training protocols end to end, so expect roughly half an hour total.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "pdgan/eval.hpp"
#include "pdgan/io.hpp"
#include "pdgan/models.hpp"
#include "pdgan/rng.hpp"
#include "pdgan/synthdata.hpp"
#include "pdgan/training.hpp"

namespace fs = std::filesystem;
using namespace pdgan;
using pdgan::testing::gradcheck;
using pdgan::testing::gradcheck_sampled;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi, bool grad = true) {
  Tensor t(std::move(shape), grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// uniform values with a dead zone around 0, keeping relu/abs kinks away from
// the finite-difference step
Tensor random_signed(Rng& rng, Shape shape, bool grad = true) {
  Tensor t(std::move(shape), grad);
  for (double& v : t.data())
    v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

Dataset synth(int live, int print, int screen, int mask, int size, std::uint64_t seed) {
  Dataset ds;
  ds.size = size;
  int idx = 0;
  auto gen = [&](Label l, SpoofClass c, int n) {
    for (int i = 0; i < n; ++i) {
      Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(idx++));
      ds.samples.push_back(generate_sample(rng, l, c, size));
    }
  };
  gen(Label::kLive, SpoofClass::kNone, live);
  gen(Label::kSpoof, SpoofClass::kPrint, print);
  gen(Label::kSpoof, SpoofClass::kScreen, screen);
  gen(Label::kSpoof, SpoofClass::kMask, mask);
  return ds;
}

struct ModelBatch {
  Tensor rgb, gt;
  std::vector<int> labels, class_ids;
};

ModelBatch small_batch(std::uint64_t seed) {
  ModelBatch b;
  b.rgb = Tensor(Shape{4, 3, 16, 16});
  b.gt = Tensor(Shape{4, 1, 16, 16});
  for (int i = 0; i < 4; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    Label l = i % 2 ? Label::kSpoof : Label::kLive;
    SpoofClass c = i % 2 ? static_cast<SpoofClass>(1 + i / 2) : SpoofClass::kNone;
    Sample s = generate_sample(rng, l, c, 16);
    std::copy(s.rgb.data().begin(), s.rgb.data().end(),
              b.rgb.data().begin() + i * 3 * 256);
    std::copy(s.depth_target.data().begin(), s.depth_target.data().end(),
              b.gt.data().begin() + i * 256);
    b.labels.push_back(static_cast<int>(l));
    b.class_ids.push_back(static_cast<int>(c));
  }
  return b;
}

// ------------------------------------------------------- gradient correctness

bool criterion_gradients() {
  auto t0 = Clock::now();
  double worst_ops = 0.0, worst_bn = 0.0, worst_model = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);

    // elementwise op chain: add/sub/mul/scalar-mul/relu/leaky/sigmoid/tanh/
    // log/abs/mean in one loss
    Tensor a = random_signed(rng, Shape{6});
    Tensor b = random_signed(rng, Shape{6});
    Tensor c = random_signed(rng, Shape{6});
    Tensor d = random_tensor(rng, Shape{6}, 0.2, 2.0);
    auto chain = [&] {
      Tensor m = mul(sigmoid(a), tanh_op(b));
      Tensor r = add(scalar_mul(relu(c), 0.5), leaky_relu(c));
      Tensor l = sub(log_op(d), abs_op(b));
      return mean(add(add(m, r), l));
    };
    worst_ops = std::max(worst_ops, gradcheck(chain, {a, b, c, d}));

    // conv2d on the documented random geometry
    Tensor x = random_tensor(rng, Shape{1, 2, 5, 5}, -1.0, 1.0);
    Tensor k = random_tensor(rng, Shape{3, 2, 3, 3}, -1.0, 1.0);
    Tensor kb = random_tensor(rng, Shape{3}, -0.5, 0.5);
    auto conv_loss = [&] { return mean(sigmoid(conv2d(x, k, kb, 1, 1))); };
    worst_ops = std::max(worst_ops, gradcheck(conv_loss, {x, k, kb}));
    auto conv_s2 = [&] { return mean(sigmoid(conv2d(x, k, 2, 1))); };
    worst_ops = std::max(worst_ops, gradcheck(conv_s2, {x, k}));

    // linear
    Tensor lx = random_tensor(rng, Shape{3, 4}, -1.0, 1.0);
    Tensor lw = random_tensor(rng, Shape{4, 2}, -1.0, 1.0);
    Tensor lb = random_tensor(rng, Shape{2}, -0.5, 0.5);
    auto lin_loss = [&] { return mean(sigmoid(linear(lx, lw, lb))); };
    worst_ops = std::max(worst_ops, gradcheck(lin_loss, {lx, lw, lb}));

    // upsample + pooling
    Tensor ux = random_tensor(rng, Shape{1, 2, 3, 3}, -1.0, 1.0);
    auto up_loss = [&] { return mean(global_avg_pool(upsample_nearest2x(ux))); };
    worst_ops = std::max(worst_ops, gradcheck(up_loss, {ux}));

    // bce on scores bounded away from the clamp
    Tensor pred_logit = random_tensor(rng, Shape{5}, -2.0, 2.0);
    std::vector<double> tv(5);
    for (double& v : tv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor targets(Shape{5}, tv);
    auto bce_loss = [&] { return bce(sigmoid(pred_logit), targets); };
    worst_ops = std::max(worst_ops, gradcheck(bce_loss, {pred_logit}));

    // l1 with operands separated away from the kink
    Tensor p1 = random_tensor(rng, Shape{2, 3}, 0.6, 1.0);
    Tensor p2 = random_tensor(rng, Shape{2, 3}, 0.0, 0.4);
    auto l1 = [&] { return l1_loss(p1, p2); };
    worst_ops = std::max(worst_ops, gradcheck(l1, {p1, p2}));

    // multihead sum: bce + softmax cross entropy
    Tensor mx = random_tensor(rng, Shape{4, 3}, -1.0, 1.0);
    Tensor mw = random_tensor(rng, Shape{3, 4}, -1.0, 1.0);
    Tensor mb = random_tensor(rng, Shape{4}, -0.5, 0.5);
    Tensor hw = random_tensor(rng, Shape{3, 1}, -1.0, 1.0);
    Tensor hb = random_tensor(rng, Shape{1}, -0.5, 0.5);
    std::vector<int> picks{0, 3, 1, 2};
    Tensor bt(Shape{4}, std::vector<double>{1, 0, 1, 0});
    auto multihead = [&] {
      Tensor live = bce(sigmoid(reshape(linear(mx, hw, hb), Shape{4})), bt);
      Tensor probs = softmax_rows(linear(mx, mw, mb));
      Tensor ce = scalar_mul(mean(log_op(gather_rows(probs, picks))), -1.0);
      return add(live, ce);
    };
    worst_ops = std::max(worst_ops, gradcheck(multihead, {mx, mw, mb, hw, hb}));

    // batchnorm, train mode
    Tensor bx = random_tensor(rng, Shape{2, 3, 2, 2}, -1.0, 1.0);
    Tensor gamma = random_tensor(rng, Shape{3}, 0.5, 1.5);
    Tensor beta = random_tensor(rng, Shape{3}, -0.5, 0.5);
    auto bn_loss = [&] {
      Tensor rm = Tensor::zeros(Shape{3});
      Tensor rv = Tensor::full(Shape{3}, 1.0);
      Tensor y = batchnorm2d(bx, gamma, beta, rm, rv, true);
      return mean(mul(y, y));
    };
    // per-channel normalization leaves some near-zero gradients whose
    // difference quotient is pure roundoff; raise the relative-error floor
    worst_bn = std::max(worst_bn, gradcheck(bn_loss, {bx, gamma, beta}, 1e-5, 1e-4));

    // full-model losses at 16x16, width 0.0625
    ModelBatch batch = small_batch(seed);
    TrainConfig cfg;
    cfg.lambda_l = 2.0;
    Model g = init_generator(0.0625, seed);
    Model dcr = init_critic(0.0625, seed + 100);
    std::vector<Tensor> gparams, dparams;
    for (auto& [n, t] : g.params) gparams.push_back(t);
    for (auto& [n, t] : dcr.params) dparams.push_back(t);
    auto gen_loss = [&] {
      Tensor fake = generator_forward(g, batch.rgb, true);
      CriticOutput out = critic_forward(dcr, fake, false);
      return generator_loss(out.adv_score, out.class_prob, batch.labels, fake,
                            batch.gt, cfg)
          .total;
    };
    worst_model =
        std::max(worst_model, gradcheck_sampled(gen_loss, gparams, 2, 1e-5, 1e-4));
    auto crit_loss = [&] {
      Tensor fake = generator_forward(g, batch.rgb, false).detach();
      CriticOutput real = critic_forward(dcr, batch.gt, true);
      CriticOutput fk = critic_forward(dcr, fake, true);
      return critic_loss(real.adv_score, fk.adv_score, real.class_prob,
                         fk.class_prob, batch.labels, cfg)
          .total;
    };
    worst_model =
        std::max(worst_model, gradcheck_sampled(crit_loss, dparams, 2, 1e-5, 1e-4));
    Model clf = init_classifier(0.0625, 16, true, seed + 200);
    std::vector<Tensor> cparams;
    for (auto& [n, t] : clf.params) cparams.push_back(t);
    std::vector<double> live_t;
    for (int l : batch.labels) live_t.push_back(l == 0 ? 1.0 : 0.0);
    Tensor lt(Shape{4}, live_t);
    auto clf_loss = [&] {
      ClassifierOutput out = classifier_forward(clf, batch.rgb, true);
      Tensor ce = scalar_mul(mean(log_op(gather_rows(out.class_probs, batch.class_ids))),
                             -1.0);
      return add(bce(out.liveness, lt), ce);
    };
    worst_model =
        std::max(worst_model, gradcheck_sampled(clf_loss, cparams, 2, 1e-5, 1e-4));
  }
  double elapsed = seconds_since(t0);
  bool ok = worst_ops < 1e-6 && worst_bn < 1e-5 && worst_model < 1e-5 && elapsed < 60.0;
  std::printf("[%s] 1 gradient correctness: op rel-err %.2e (<1e-6), "
              "batchnorm %.2e (<1e-5), full-model %.2e (<1e-5), 20 seeds, %.1fs (<60s)\n",
              ok ? "PASS" : "FAIL", worst_ops, worst_bn, worst_model, elapsed);
  return ok;
}

// ------------------------------------------------------ metric oracle checks

double acer_by_counting(const ScoredSet& set, double t) {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < set.scores.size(); ++i) {
    bool live_pred = set.scores[i] >= t;
    if (set.labels[i] == 0)
      (live_pred ? tp : fn)++;
    else
      (live_pred ? fp : tn)++;
  }
  return 0.5 * (static_cast<double>(fp) / (fp + tn) + static_cast<double>(fn) / (tp + fn));
}

bool criterion_metric_oracles() {
  auto t0 = Clock::now();
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 100 && ok; ++seed) {
    Rng rng(seed);
    size_t n = 2 + rng.below(199);
    ScoredSet set;
    for (size_t i = 0; i < n; ++i) {
      double s = rng.uniform(0.0, 1.0);
      if (seed % 2 == 0) s = std::round(s * 20.0) / 20.0;  // force ties
      set.scores.push_back(s);
      set.labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    set.labels[0] = 0;
    set.labels[n - 1] = 1;

    MetricsReport r = sweep_threshold(set);

    // brute-force enumeration over every threshold interval
    std::vector<double> distinct = set.scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> candidates{0.0, 1.0};
    for (size_t i = 0; i + 1 < distinct.size(); ++i)
      candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    std::sort(candidates.begin(), candidates.end());
    double best = 2.0, best_t = 0.0;
    for (double t : candidates) {
      double a = acer_by_counting(set, t);
      if (a < best) {
        best = a;
        best_t = t;
      }
    }
    ok = ok && r.acer == best && r.threshold == best_t;
    ok = ok && r.acer == 0.5 * (r.apcer + r.bpcer);

    // pairwise Mann-Whitney enumeration
    double wins = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < n; ++i) {
      if (set.labels[i] != 0) continue;
      for (size_t j = 0; j < n; ++j) {
        if (set.labels[j] != 1) continue;
        ++pairs;
        if (set.scores[i] > set.scores[j])
          wins += 1.0;
        else if (set.scores[i] == set.scores[j])
          wins += 0.5;
      }
    }
    ok = ok && std::abs(auc(set) - wins / pairs) < 1e-12;
  }
  double elapsed = seconds_since(t0);
  ok = ok && elapsed < 10.0;
  std::printf("[%s] 2 metric oracle equivalence: 100 random sets, exact sweep match, "
              "auc to 1e-12, %.1fs (<10s)\n",
              ok ? "PASS" : "FAIL", elapsed);
  return ok;
}

// -------------------------------------------------- fixed reference values

bool criterion_reference_values() {
  auto t0 = Clock::now();
  bool ok = epoch_budget(50, 12) == 38 && epoch_budget(20, 12) == 8;
  ok = ok && 0.5 * (0.0653 + 0.0618) == 0.06355;

  TrainConfig defaults;
  ok = ok && defaults.lambda_l == 100.0 && defaults.lambda_g == 0.2 &&
       defaults.lambda_cg == 0.1 && defaults.lambda_d == 1.0 &&
       defaults.lambda_cd == 1.0 && defaults.warmup_epochs == 5 &&
       defaults.total_pdgan_epochs == 12 && defaults.critic_interval == 25;

  // the inter tier resolves to lambda_l = 50 through the CLI default logic
  fs::path tmp = fs::temp_directory_path() / "pdgan_acc_c3";
  fs::remove_all(tmp);
  std::string cli = PDGAN_CLI_PATH;
  int rc = std::system((cli + " synth-data --live 8 --print 8 --screen 0 --mask 0"
                              " --size 16 --seed 1 --out " +
                        (tmp / "ds").string() + " >/dev/null 2>&1")
                           .c_str());
  rc |= std::system((cli + " train-pdgan --mode inter --epochs 1 --warmup 1 --seed 1"
                           " --data " +
                     (tmp / "ds/manifest.json").string() + " --out " +
                     (tmp / "gan").string() + " >/dev/null 2>&1")
                        .c_str());
  bool tier = false;
  if (rc == 0) {
    auto echo = nlohmann::json::parse(read_text_file(tmp / "gan" / "config.json"));
    tier = echo.at("lambda_l").get<double>() == 50.0;
  }
  ok = ok && tier;
  fs::remove_all(tmp);

  // schedule: 100 generator steps produce exactly 4 critic steps
  Dataset ds = synth(80, 40, 40, 0, 16, 77);
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.warmup_epochs = 0;
  cfg.total_pdgan_epochs = 10;
  cfg.validation_fraction = 0.0;
  cfg.augment_enabled = false;
  PdganTrainer trainer(init_generator(0.0625, 1), init_critic(0.0625, 2), cfg, ds);
  TrainLog log;
  trainer.run(log);
  ok = ok && trainer.generator_steps() == 100 && trainer.critic_steps() == 4;

  std::printf("[%s] 3 fixed reference values: epoch budgets 38/8, acer 0.06355, "
              "lambda defaults (inter tier 50), 100 steps -> 4 critic steps, %.1fs\n",
              ok ? "PASS" : "FAIL", seconds_since(t0));
  return ok;
}

// -------------------------------------------------- desk-scale training runs

struct C4Result {
  bool ok = false;
  double spoof_mass = 0, live_mass = 0, live_l1 = 0, elapsed = 0;
};

C4Result run_anticollapse(const fs::path& out) {
  auto t0 = Clock::now();
  fs::create_directories(out);
  Dataset train = synth(256, 86, 85, 85, 32, 1001);
  Dataset test = synth(128, 43, 43, 42, 32, 2002);
  TrainConfig cfg;
  cfg.seed = 7;
  PdganTrainer trainer(init_generator(0.25, 7), init_critic(0.25, 7 ^ 0x637269746963ULL),
                       cfg, train);
  TrainLog log;
  trainer.run(log);
  write_text_file(out / "train_log.csv", log.to_csv());
  nlohmann::json extra{{"pdgan_epochs", trainer.epochs_done()},
                       {"step_counter", trainer.generator_steps()}};
  save_checkpoint(trainer.generator(), out / "generator", extra);
  save_checkpoint(trainer.critic(), out / "critic", extra);

  C4Result r;
  Model& g = trainer.generator();
  double live_mass = 0, spoof_mass = 0, live_l1 = 0;
  long live_px = 0, spoof_px = 0, live_n = 0;
  for (const Sample& s : test.samples) {
    Tensor rgb(Shape{1, 3, 32, 32}, s.rgb.data());
    Tensor d = generator_forward(g, rgb, false);
    double sum = 0;
    for (double v : d.data()) sum += v;
    if (s.label == Label::kLive) {
      live_mass += sum;
      live_px += d.size();
      double l1 = 0;
      for (int i = 0; i < d.size(); ++i)
        l1 += std::abs(d.data()[i] - s.depth_target.data()[i]);
      live_l1 += l1 / d.size();
      ++live_n;
    } else {
      spoof_mass += sum;
      spoof_px += d.size();
    }
  }
  r.spoof_mass = spoof_mass / spoof_px;
  r.live_mass = live_mass / live_px;
  r.live_l1 = live_l1 / live_n;
  r.elapsed = seconds_since(t0);
  r.ok = r.spoof_mass < 0.04 && r.live_mass > 10.0 * r.spoof_mass && r.live_l1 < 0.08 &&
         r.elapsed < 900.0;
  return r;
}

bool criterion_anticollapse(const fs::path& out) {
  C4Result r = run_anticollapse(out);
  std::printf("[%s] 4 anti-collapse 12-epoch run: spoof depth %.4f (<0.04), "
              "live depth %.4f (%.1fx spoof, >10x), live L1 %.4f (<0.08), %.0fs (<900s)\n",
              r.ok ? "PASS" : "FAIL", r.spoof_mass, r.live_mass,
              r.live_mass / r.spoof_mass, r.live_l1, r.elapsed);
  return r.ok;
}

double embedding_separation(Model& m, const Dataset& ds, const fs::path& csv_path) {
  std::vector<std::vector<double>> emb;
  std::vector<int> labels;
  for (const Sample& s : ds.samples) {
    Tensor rgb(Shape{1, 3, ds.size, ds.size}, s.rgb.data());
    Tensor e = encoder_embed(m, rgb);
    emb.emplace_back(e.data());
    labels.push_back(static_cast<int>(s.label));
  }
  PcaProjection p = pca_2d(emb, labels);
  std::ostringstream csv;
  csv.precision(17);
  csv << "x,y,label\n";
  for (size_t i = 0; i < p.x.size(); ++i)
    csv << p.x[i] << ',' << p.y[i] << ',' << p.labels[i] << '\n';
  write_text_file(csv_path, csv.str());

  double cx[2] = {0, 0}, cy[2] = {0, 0};
  long n[2] = {0, 0};
  for (size_t i = 0; i < p.x.size(); ++i) {
    cx[p.labels[i]] += p.x[i];
    cy[p.labels[i]] += p.y[i];
    ++n[p.labels[i]];
  }
  for (int c = 0; c < 2; ++c) {
    cx[c] /= static_cast<double>(n[c]);
    cy[c] /= static_cast<double>(n[c]);
  }
  double between = std::hypot(cx[0] - cx[1], cy[0] - cy[1]);
  double within = 0;
  for (size_t i = 0; i < p.x.size(); ++i)
    within += std::hypot(p.x[i] - cx[p.labels[i]], p.y[i] - cy[p.labels[i]]);
  within /= static_cast<double>(p.x.size());
  return between / within;
}

struct C5Result {
  bool ok = false;
  double mean_acer_pd = 0, mean_acer_he = 0;
  int pca_wins = 0;
  double elapsed = 0;
};

C5Result run_backbone_advantage(const fs::path& out) {
  auto t0 = Clock::now();
  fs::create_directories(out);
  C5Result r;
  for (int s = 0; s < 5; ++s) {
    std::uint64_t seed = 100 + static_cast<std::uint64_t>(s);
    Dataset train = synth(256, 86, 85, 85, 32, seed * 17 + 1);
    Dataset test = synth(128, 43, 43, 42, 32, seed * 17 + 2);
    // fine-tuning uses a small labeled subset: with all 512 labels both arms
    // saturate at zero test error and the comparison degenerates to noise
    Dataset labeled = synth(32, 11, 11, 11, 32, seed * 17 + 3);

    TrainConfig cfg;
    cfg.seed = seed;
    PdganTrainer trainer(init_generator(0.25, seed),
                         init_critic(0.25, seed ^ 0x637269746963ULL), cfg, train);
    TrainLog log;
    trainer.run(log);

    // epoch normalization: 20-epoch baseline budget minus 12 backbone epochs
    FinetuneResult pd = finetune_classifier(&trainer.generator(), nullptr, labeled,
                                            epoch_budget(20, 12), false, cfg);
    FinetuneResult he = finetune_classifier(nullptr, nullptr, labeled, 20, false, cfg);

    MetricsReport rep_pd = sweep_threshold(score_dataset(pd.classifier, test, 32));
    MetricsReport rep_he = sweep_threshold(score_dataset(he.classifier, test, 32));
    r.mean_acer_pd += rep_pd.acer / 5.0;
    r.mean_acer_he += rep_he.acer / 5.0;

    Model he_gen = init_generator(0.25, seed);
    std::string tag = "seed" + std::to_string(s);
    double sep_pd = embedding_separation(trainer.generator(), test,
                                         out / ("pca_pdgan_" + tag + ".csv"));
    double sep_he =
        embedding_separation(he_gen, test, out / ("pca_he_" + tag + ".csv"));
    if (sep_pd > sep_he) ++r.pca_wins;

    nlohmann::json report{{"seed", seed},
                          {"acer_pdgan", rep_pd.acer},
                          {"acer_he", rep_he.acer},
                          {"separation_pdgan", sep_pd},
                          {"separation_he", sep_he}};
    write_text_file(out / ("report_" + tag + ".json"), report.dump(2) + "\n");
    save_checkpoint(pd.classifier, out / ("classifier_pdgan_" + tag));
    save_checkpoint(he.classifier, out / ("classifier_he_" + tag));
  }
  r.elapsed = seconds_since(t0);
  r.ok = r.mean_acer_pd <= r.mean_acer_he && r.pca_wins >= 4 && r.elapsed < 5400.0;
  return r;
}

bool criterion_backbone_advantage(const fs::path& out) {
  C5Result r = run_backbone_advantage(out);
  std::printf("[%s] 5 backbone advantage over 5 seeds: mean acer pdgan %.4f <= he %.4f, "
              "pca separation wins %d/5 (>=4), %.0fs (<5400s)\n",
              r.ok ? "PASS" : "FAIL", r.mean_acer_pd, r.mean_acer_he, r.pca_wins,
              r.elapsed);
  return r.ok;
}

// --------------------------------------------------------- multihead ablation

bool criterion_multihead() {
  auto t0 = Clock::now();
  Dataset train = synth(32, 11, 11, 10, 16, 3001);
  Dataset test = synth(16, 6, 5, 5, 16, 3002);
  TrainConfig cfg;
  cfg.seed = 5;
  FinetuneResult r = finetune_classifier(nullptr, nullptr, train, 3, true, cfg);
  bool ok = !r.log.steps.empty();
  for (const auto& rec : r.log.steps) {
    ok = ok && rec.loss_aux > 0.0;  // spoof-class head trained on every step
    ok = ok && std::abs(rec.loss_total - (rec.loss_adv + rec.loss_aux)) <= 1e-9;
  }
  MetricsReport rep = sweep_threshold(score_dataset(r.classifier, test, 16));
  ok = ok && rep.acer == 0.5 * (rep.apcer + rep.bpcer);
  std::printf("[%s] 6 multihead ablation end-to-end: both losses logged every step, "
              "totals recombine to 1e-9, eval acer %.4f, %.1fs\n",
              ok ? "PASS" : "FAIL", rep.acer, seconds_since(t0));
  return ok;
}

// -------------------------------------------------------------- determinism

bool files_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  if (rel.empty()) return false;
  for (const auto& p : rel) {
    if (!fs::exists(b / p)) return false;
    if (read_text_file(a / p) != read_text_file(b / p)) return false;
  }
  return true;
}

bool criterion_determinism(const fs::path& first4, const fs::path& first5) {
  auto t0 = Clock::now();
  fs::path again4 = first4.parent_path() / "anticollapse_rerun";
  fs::path again5 = first5.parent_path() / "backbone_rerun";
  run_anticollapse(again4);
  run_backbone_advantage(again5);
  bool ok = files_identical(first4, again4) && files_identical(first5, again5);
  std::printf("[%s] 7 determinism: repeated desk-scale runs byte-identical "
              "(checkpoints, logs, reports), %.0fs\n",
              ok ? "PASS" : "FAIL", seconds_since(t0));
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  // optional args select individual criteria by number, e.g. "acceptance 1 3"
  auto wanted = [&](int n) {
    if (argc < 2) return true;
    for (int i = 1; i < argc; ++i)
      if (std::atoi(argv[i]) == n) return true;
    return false;
  };

  fs::path work = fs::temp_directory_path() / "pdgan_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0, run = 0;
  auto step = [&](int n, bool ok) {
    ++run;
    failures += !ok;
  };
  if (wanted(1)) step(1, criterion_gradients());
  if (wanted(2)) step(2, criterion_metric_oracles());
  if (wanted(3)) step(3, criterion_reference_values());
  if (wanted(4)) step(4, criterion_anticollapse(work / "anticollapse"));
  if (wanted(5)) step(5, criterion_backbone_advantage(work / "backbone"));
  if (wanted(6)) step(6, criterion_multihead());
  if (wanted(7)) {
    if (!fs::exists(work / "anticollapse")) run_anticollapse(work / "anticollapse");
    if (!fs::exists(work / "backbone")) run_backbone_advantage(work / "backbone");
    step(7, criterion_determinism(work / "anticollapse", work / "backbone"));
  }

  std::printf("%d/%d criteria passed\n", run - failures, run);
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
