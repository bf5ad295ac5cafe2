#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdgan/optim.hpp"
#include "pdgan/tensor.hpp"

namespace pdgan {

enum class Arch { kGenerator, kCritic, kClassifier };

std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

// Stage output channels for a width multiplier: round(w * (64,128,256,512)).
std::vector<int> stage_widths(double width);

struct ModelDef {
  Arch arch = Arch::kGenerator;
  double width = 0.25;
  int image_size = 32;      // classifier head geometry depends on it
  bool multihead = false;   // classifier only
};

struct Model {
  ModelDef def;
  ParamMap params;   // trainable
  ParamMap buffers;  // batchnorm running statistics
};

Model init_generator(double width, std::uint64_t seed);
Model init_critic(double width, std::uint64_t seed);
Model init_classifier(double width, int image_size, bool multihead, std::uint64_t seed);
Model init_params(const ModelDef& def, std::uint64_t seed);

// rgb batch Nx3xHxW -> depth batch Nx1xHxW in (0,1)
Tensor generator_forward(Model& model, const Tensor& rgb, bool training);

// flattened final encoder feature map, pre-decoder: N x D
Tensor encoder_embed(Model& model, const Tensor& rgb);
int embedding_dim(const ModelDef& def);

struct CriticOutput {
  Tensor adv_score;   // N, in (0,1): estimated "is real GT depth"
  Tensor class_prob;  // N, in (0,1): estimated p(live)
};
CriticOutput critic_forward(Model& model, const Tensor& depth, bool training);

struct ClassifierOutput {
  Tensor liveness;     // N, in (0,1)
  Tensor class_probs;  // N x 4 softmax rows; defined only for multihead models
};
ClassifierOutput classifier_forward(Model& model, const Tensor& rgb, bool training);

// Copies the generator's encoder weights (and bn buffers) into a classifier.
void transfer_encoder(const Model& generator, Model& classifier);

long param_count(const Model& model);

// Deep copy: fresh tensors, no sharing with the source.
Model clone_model(const Model& model);

// Checkpoint: one PDT1 file per named tensor plus an index JSON.
void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
struct Checkpoint {
  Model model;
  nlohmann::json extra;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace pdgan
