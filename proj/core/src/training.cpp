#include "pdgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pdgan/rng.hpp"

namespace pdgan {

void TrainConfig::validate() const {
  if (lambda_l < 0 || lambda_g < 0 || lambda_cg < 0 || lambda_d < 0 || lambda_cd < 0)
    throw std::invalid_argument("lambda weights must be non-negative");
  if (warmup_epochs > total_pdgan_epochs)
    throw std::invalid_argument("warmup epochs exceed total pdgan epochs");
  if (critic_interval < 1) throw std::invalid_argument("critic interval must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,step,phase,loss_total,loss_l1,loss_adv,loss_aux,"
        "critic_total,critic_adv,critic_aux\n";
  for (const auto& r : steps) {
    os << r.epoch << ',' << r.step << ',' << r.phase << ',' << r.loss_total << ','
       << r.loss_l1 << ',' << r.loss_adv << ',' << r.loss_aux << ',';
    if (r.has_critic)
      os << r.critic_total << ',' << r.critic_adv << ',' << r.critic_aux;
    else
      os << ",,";
    os << '\n';
  }
  return os.str();
}

namespace {

// target for the aux head, which predicts p(live): 1 for live (label 0)
Tensor live_targets(const std::vector<int>& labels) {
  std::vector<double> t(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) t[i] = labels[i] == 0 ? 1.0 : 0.0;
  return Tensor(Shape{static_cast<int>(labels.size())}, std::move(t));
}

}  // namespace

LossParts critic_loss(const Tensor& adv_real, const Tensor& adv_fake,
                      const Tensor& class_real, const Tensor& class_fake,
                      const std::vector<int>& labels, const TrainConfig& cfg) {
  if (adv_real.size() != static_cast<int>(labels.size()) ||
      adv_fake.size() != static_cast<int>(labels.size()))
    throw std::invalid_argument("critic_loss: score/label length mismatch");
  Tensor ones = Tensor::full(adv_real.shape(), 1.0);
  Tensor zeros = Tensor::zeros(adv_fake.shape());
  Tensor live_t = live_targets(labels);
  Tensor adv = add(bce(adv_real, ones), bce(adv_fake, zeros));
  Tensor aux = add(bce(class_real, live_t), bce(class_fake, live_t));
  LossParts parts;
  parts.adv = adv.item();
  parts.aux = aux.item();
  parts.total = add(scalar_mul(adv, cfg.lambda_d), scalar_mul(aux, cfg.lambda_cd));
  return parts;
}

LossParts generator_loss(const Tensor& adv_fake, const Tensor& class_fake,
                         const std::vector<int>& labels, const Tensor& gen_depth,
                         const Tensor& gt_depth, const TrainConfig& cfg) {
  if (adv_fake.size() != static_cast<int>(labels.size()))
    throw std::invalid_argument("generator_loss: score/label length mismatch");
  Tensor ones = Tensor::full(adv_fake.shape(), 1.0);
  Tensor live_t = live_targets(labels);
  Tensor adv = bce(adv_fake, ones);  // non-saturating -E[log D(G(z))]
  Tensor aux = bce(class_fake, live_t);
  Tensor l1 = l1_loss(gen_depth, gt_depth);
  LossParts parts;
  parts.adv = adv.item();
  parts.aux = aux.item();
  parts.l1 = l1.item();
  parts.total = add(add(scalar_mul(adv, cfg.lambda_g), scalar_mul(aux, cfg.lambda_cg)),
                    scalar_mul(l1, cfg.lambda_l));
  return parts;
}

int epoch_budget(int baseline_epochs, int backbone_epochs) {
  if (baseline_epochs < backbone_epochs)
    throw std::invalid_argument("epoch_budget: baseline smaller than backbone epochs");
  return baseline_epochs - backbone_epochs;
}

namespace {

struct Batch {
  Tensor rgb;    // B x 3 x S x S
  Tensor depth;  // B x 1 x S x S
  std::vector<int> labels;
  std::vector<int> class_ids;
};

Batch collect_batch(const Dataset& ds, const std::vector<size_t>& indices,
                    size_t begin, size_t end, const AugmentConfig* aug,
                    std::uint64_t aug_seed) {
  const int b = static_cast<int>(end - begin);
  const int s = ds.size;
  Batch batch;
  batch.rgb = Tensor(Shape{b, 3, s, s});
  batch.depth = Tensor(Shape{b, 1, s, s});
  const size_t rgb_stride = 3u * s * s;
  const size_t depth_stride = 1u * s * s;
  for (size_t k = begin; k < end; ++k) {
    const Sample& base = ds.samples[indices[k]];
    Sample sample;
    if (aug) {
      Rng rng = Rng::substream(aug_seed, indices[k]);
      sample = augment(base, *aug, rng);
    } else {
      sample = base;
    }
    size_t row = k - begin;
    std::copy(sample.rgb.data().begin(), sample.rgb.data().end(),
              batch.rgb.data().begin() + row * rgb_stride);
    std::copy(sample.depth_target.data().begin(), sample.depth_target.data().end(),
              batch.depth.data().begin() + row * depth_stride);
    batch.labels.push_back(static_cast<int>(base.label));
    batch.class_ids.push_back(static_cast<int>(base.spoof_class));
  }
  return batch;
}

void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

}  // namespace

PdganTrainer::PdganTrainer(Model generator, Model critic, TrainConfig cfg,
                           const Dataset& dataset)
    : generator_(std::move(generator)),
      critic_(std::move(critic)),
      cfg_(cfg),
      dataset_(dataset),
      gen_opt_(cfg.gen_adam),
      critic_opt_(cfg.critic_sgd) {
  cfg_.validate();
  if (dataset_.samples.empty()) throw std::invalid_argument("pdgan: empty dataset");
  bool has_live = false, has_spoof = false;
  for (const auto& s : dataset_.samples)
    (s.label == Label::kLive ? has_live : has_spoof) = true;
  if (!has_live || !has_spoof)
    throw std::invalid_argument("pdgan: dataset must contain both classes");

  std::vector<size_t> all(dataset_.samples.size());
  std::iota(all.begin(), all.end(), 0u);
  Rng rng(cfg_.seed ^ 0x76616c6964ULL);
  shuffle_indices(all, rng);
  size_t n_val = static_cast<size_t>(std::floor(all.size() * cfg_.validation_fraction));
  val_indices_.assign(all.begin(), all.begin() + n_val);
  train_indices_.assign(all.begin() + n_val, all.end());
  if (train_indices_.empty()) throw std::invalid_argument("pdgan: empty training split");
}

void PdganTrainer::train_epoch(bool adversarial, TrainLog& log) {
  std::vector<size_t> order = train_indices_;
  Rng shuffle_rng(cfg_.seed + 0x9e37ULL * static_cast<std::uint64_t>(epoch_ + 1));
  shuffle_indices(order, shuffle_rng);
  const std::uint64_t aug_seed =
      cfg_.seed ^ (0xabcdULL + static_cast<std::uint64_t>(epoch_) * 0x10001ULL);
  const AugmentConfig* aug = cfg_.augment_enabled ? &cfg_.augment : nullptr;

  const size_t n = order.size();
  const size_t bs = static_cast<size_t>(cfg_.batch_size);
  for (size_t begin = 0; begin < n; begin += bs) {
    size_t end = std::min(n, begin + bs);
    Batch batch = collect_batch(dataset_, order, begin, end, aug, aug_seed);

    gen_opt_.zero_grad(generator_.params);
    critic_opt_.zero_grad(critic_.params);

    Tensor gen_depth = generator_forward(generator_, batch.rgb, /*training=*/true);
    StepRecord rec;
    rec.epoch = epoch_;
    rec.step = gen_steps_ + 1;
    if (adversarial) {
      // critic runs in eval mode here: its statistics are only updated on
      // its own training steps
      CriticOutput d_fake = critic_forward(critic_, gen_depth, /*training=*/false);
      LossParts parts = generator_loss(d_fake.adv_score, d_fake.class_prob,
                                       batch.labels, gen_depth, batch.depth, cfg_);
      parts.total.check_finite("generator loss");
      backward(parts.total);
      rec.phase = "adversarial";
      rec.loss_total = parts.total.item();
      rec.loss_l1 = parts.l1;
      rec.loss_adv = parts.adv;
      rec.loss_aux = parts.aux;
    } else {
      Tensor l1 = l1_loss(gen_depth, batch.depth);
      l1.check_finite("warmup loss");
      backward(l1);
      rec.phase = "warmup";
      rec.loss_total = l1.item();
      rec.loss_l1 = rec.loss_total;
    }
    // critic gradients may have been populated through the adversarial
    // term; only the generator is stepped here
    gen_opt_.step(generator_.params);
    ++gen_steps_;

    if (adversarial && gen_steps_ % cfg_.critic_interval == 0) {
      critic_opt_.zero_grad(critic_.params);
      Tensor fake = generator_forward(generator_, batch.rgb, /*training=*/false).detach();
      CriticOutput d_real = critic_forward(critic_, batch.depth, /*training=*/true);
      CriticOutput d_fake = critic_forward(critic_, fake, /*training=*/true);
      LossParts closs = critic_loss(d_real.adv_score, d_fake.adv_score,
                                    d_real.class_prob, d_fake.class_prob,
                                    batch.labels, cfg_);
      closs.total.check_finite("critic loss");
      backward(closs.total);
      critic_opt_.step(critic_.params);
      ++critic_steps_;
      rec.has_critic = true;
      rec.critic_total = closs.total.item();
      rec.critic_adv = closs.adv;
      rec.critic_aux = closs.aux;
    }
    log.steps.push_back(rec);
  }
  ++epoch_;
}

void PdganTrainer::warmup_epoch(TrainLog& log) {
  if (epoch_ >= cfg_.warmup_epochs)
    throw std::logic_error("warmup_epoch called past the warmup phase");
  train_epoch(/*adversarial=*/false, log);
}

void PdganTrainer::pdgan_epoch(TrainLog& log) {
  if (epoch_ < cfg_.warmup_epochs)
    throw std::logic_error("pdgan_epoch called during the warmup phase");
  train_epoch(/*adversarial=*/true, log);
}

void PdganTrainer::run(TrainLog& log) {
  for (int e = 0; e < cfg_.total_pdgan_epochs; ++e) {
    if (epoch_ < cfg_.warmup_epochs)
      warmup_epoch(log);
    else
      pdgan_epoch(log);
    log.epoch_val_l1.push_back(validation_l1());
  }
}

double PdganTrainer::validation_l1() {
  const auto& idx = val_indices_.empty() ? train_indices_ : val_indices_;
  double total = 0.0;
  long count = 0;
  const size_t bs = static_cast<size_t>(cfg_.batch_size);
  for (size_t begin = 0; begin < idx.size(); begin += bs) {
    size_t end = std::min(idx.size(), begin + bs);
    Batch batch = collect_batch(dataset_, idx, begin, end, nullptr, 0);
    Tensor gen_depth = generator_forward(generator_, batch.rgb, /*training=*/false);
    Tensor l1 = l1_loss(gen_depth, batch.depth);
    total += l1.item() * static_cast<double>(end - begin);
    count += static_cast<long>(end - begin);
  }
  return total / static_cast<double>(count);
}

double PdganTrainer::validation_depth_mass(Label label) {
  const auto& pool = val_indices_.empty() ? train_indices_ : val_indices_;
  std::vector<size_t> idx;
  for (size_t i : pool)
    if (dataset_.samples[i].label == label) idx.push_back(i);
  if (idx.empty()) throw std::runtime_error("validation split lacks the requested class");
  double total = 0.0;
  long pixels = 0;
  const size_t bs = static_cast<size_t>(cfg_.batch_size);
  for (size_t begin = 0; begin < idx.size(); begin += bs) {
    size_t end = std::min(idx.size(), begin + bs);
    Batch batch = collect_batch(dataset_, idx, begin, end, nullptr, 0);
    Tensor gen_depth = generator_forward(generator_, batch.rgb, /*training=*/false);
    for (double v : gen_depth.data()) total += v;
    pixels += gen_depth.size();
  }
  return total / static_cast<double>(pixels);
}

FinetuneResult finetune_classifier(const Model* backbone_generator,
                                   const Model* backbone_classifier,
                                   const Dataset& dataset, int epochs,
                                   bool multihead, const TrainConfig& cfg) {
  cfg.validate();
  if (epochs < 0) throw std::invalid_argument("finetune: negative epoch count");
  if (dataset.samples.empty()) throw std::invalid_argument("finetune: empty dataset");
  bool has_live = false, has_spoof = false;
  for (const auto& s : dataset.samples)
    (s.label == Label::kLive ? has_live : has_spoof) = true;
  if (!has_live || !has_spoof)
    throw std::invalid_argument("finetune: dataset must contain both classes");

  double width = backbone_generator   ? backbone_generator->def.width
                 : backbone_classifier ? backbone_classifier->def.width
                                       : 0.25;
  FinetuneResult result;
  if (backbone_classifier) {
    result.classifier = clone_model(*backbone_classifier);
    if (result.classifier.def.multihead != multihead)
      throw std::invalid_argument("finetune: checkpoint multihead flag mismatch");
  } else {
    result.classifier = init_classifier(width, dataset.size, multihead, cfg.seed);
    if (backbone_generator) transfer_encoder(*backbone_generator, result.classifier);
  }

  Adam opt(cfg.clf_adam);
  std::vector<size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0u);
  const AugmentConfig* aug = cfg.augment_enabled ? &cfg.augment : nullptr;
  long step = 0;
  for (int e = 0; e < epochs; ++e) {
    Rng shuffle_rng(cfg.seed + 0xc1a55ULL * static_cast<std::uint64_t>(e + 1));
    shuffle_indices(order, shuffle_rng);
    const std::uint64_t aug_seed =
        cfg.seed ^ (0xf17eULL + static_cast<std::uint64_t>(e) * 0x10001ULL);
    const size_t n = order.size();
    const size_t bs = static_cast<size_t>(cfg.batch_size);
    for (size_t begin = 0; begin < n; begin += bs) {
      size_t end = std::min(n, begin + bs);
      Batch batch = collect_batch(dataset, order, begin, end, aug, aug_seed);
      opt.zero_grad(result.classifier.params);
      ClassifierOutput out =
          classifier_forward(result.classifier, batch.rgb, /*training=*/true);
      Tensor bce_loss = bce(out.liveness, live_targets(batch.labels));
      StepRecord rec;
      rec.epoch = e;
      rec.step = ++step;
      rec.phase = "finetune";
      rec.loss_adv = bce_loss.item();
      Tensor total = bce_loss;
      if (multihead) {
        Tensor picked = gather_rows(out.class_probs, batch.class_ids);
        Tensor ce = scalar_mul(mean(log_op(picked)), -1.0);
        rec.loss_aux = ce.item();
        total = add(bce_loss, ce);  // same weight on both losses
      }
      total.check_finite("classifier loss");
      rec.loss_total = total.item();
      backward(total);
      opt.step(result.classifier.params);
      result.log.steps.push_back(rec);
    }
  }
  return result;
}

ScoredSet score_dataset(Model& classifier, const Dataset& dataset, int batch_size) {
  if (dataset.samples.empty()) throw std::invalid_argument("score_dataset: empty dataset");
  ScoredSet set;
  std::vector<size_t> idx(dataset.samples.size());
  std::iota(idx.begin(), idx.end(), 0u);
  const size_t bs = static_cast<size_t>(batch_size);
  for (size_t begin = 0; begin < idx.size(); begin += bs) {
    size_t end = std::min(idx.size(), begin + bs);
    Batch batch = collect_batch(dataset, idx, begin, end, nullptr, 0);
    ClassifierOutput out = classifier_forward(classifier, batch.rgb, /*training=*/false);
    for (int i = 0; i < out.liveness.size(); ++i) {
      set.scores.push_back(out.liveness.data()[static_cast<size_t>(i)]);
      set.labels.push_back(batch.labels[static_cast<size_t>(i)]);
    }
  }
  return set;
}

}  // namespace pdgan
