#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdgan/eval.hpp"
#include "pdgan/models.hpp"
#include "pdgan/optim.hpp"
#include "pdgan/synthdata.hpp"

namespace pdgan {

struct TrainConfig {
  double lambda_l = 100.0;  // 100 intra-dataset, 50 inter-dataset
  double lambda_g = 0.2;
  double lambda_cg = 0.1;
  double lambda_d = 1.0;
  double lambda_cd = 1.0;
  int warmup_epochs = 5;
  int total_pdgan_epochs = 12;  // includes the warmup epochs
  int critic_interval = 25;
  AdamConfig gen_adam{1e-4, 0.5, 0.999, 1e-8};
  SgdConfig critic_sgd{1e-5, 0.0};
  AdamConfig clf_adam{1e-3, 0.9, 0.999, 1e-8};
  int batch_size = 16;
  std::uint64_t seed = 0;
  int baseline_classifier_epochs = 50;  // 50 intra, 20 inter
  double validation_fraction = 0.1;
  bool augment_enabled = true;
  AugmentConfig augment;

  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  long step = 0;
  std::string phase;  // warmup | adversarial | finetune
  double loss_total = 0.0;
  // generator components (unweighted); for finetune loss_adv carries the
  // liveness bce and loss_aux the spoof-class cross entropy
  double loss_l1 = 0.0;
  double loss_adv = 0.0;
  double loss_aux = 0.0;
  bool has_critic = false;
  double critic_total = 0.0;
  double critic_adv = 0.0;
  double critic_aux = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_val_l1;  // per epoch, validation mean L1 (pdgan only)

  std::string to_csv() const;
};

struct LossParts {
  Tensor total;
  double adv = 0.0;  // unweighted component values
  double aux = 0.0;
  double l1 = 0.0;
};

// Minimized negative-log forms of the critic and generator objectives.
LossParts critic_loss(const Tensor& adv_real, const Tensor& adv_fake,
                      const Tensor& class_real, const Tensor& class_fake,
                      const std::vector<int>& labels, const TrainConfig& cfg);
LossParts generator_loss(const Tensor& adv_fake, const Tensor& class_fake,
                         const std::vector<int>& labels, const Tensor& gen_depth,
                         const Tensor& gt_depth, const TrainConfig& cfg);

// classifier_epochs = baseline - backbone; throws when baseline < backbone.
int epoch_budget(int baseline_epochs, int backbone_epochs);

// Two-phase PDGAN training: warmup (generator, pure L1) then adversarial
// epochs with the critic trained every critic_interval generator steps.
class PdganTrainer {
 public:
  PdganTrainer(Model generator, Model critic, TrainConfig cfg,
               const Dataset& dataset);

  void warmup_epoch(TrainLog& log);
  void pdgan_epoch(TrainLog& log);
  // runs all total_pdgan_epochs and records per-epoch validation L1
  void run(TrainLog& log);

  Model& generator() { return generator_; }
  Model& critic() { return critic_; }
  long generator_steps() const { return gen_steps_; }
  long critic_steps() const { return critic_steps_; }
  int epochs_done() const { return epoch_; }
  const std::vector<size_t>& validation_indices() const { return val_indices_; }

  double validation_l1();
  // mean generated depth pixel value over validation samples of one label
  double validation_depth_mass(Label label);

 private:
  void train_epoch(bool adversarial, TrainLog& log);

  Model generator_;
  Model critic_;
  TrainConfig cfg_;
  const Dataset& dataset_;
  Adam gen_opt_;
  Sgd critic_opt_;
  std::vector<size_t> train_indices_;
  std::vector<size_t> val_indices_;
  long gen_steps_ = 0;
  long critic_steps_ = 0;
  int epoch_ = 0;
};

enum class BackboneSource { kPdgan, kHeInit, kCheckpoint };

struct FinetuneResult {
  Model classifier;
  TrainLog log;
};

// Trains the liveness classifier. All weights stay trainable, including a
// transferred backbone. With multihead, loss = bce + softmax cross entropy,
// weight 1 each.
FinetuneResult finetune_classifier(const Model* backbone_generator,
                                   const Model* backbone_classifier,
                                   const Dataset& dataset, int epochs,
                                   bool multihead, const TrainConfig& cfg);

// Scores every sample with the classifier in eval mode.
ScoredSet score_dataset(Model& classifier, const Dataset& dataset, int batch_size);

}  // namespace pdgan
