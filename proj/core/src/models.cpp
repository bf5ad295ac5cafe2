#include "pdgan/models.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "pdgan/io.hpp"
#include "pdgan/rng.hpp"

namespace pdgan {

using nlohmann::json;

std::string to_string(Arch a) {
  switch (a) {
    case Arch::kGenerator: return "generator";
    case Arch::kCritic: return "critic";
    case Arch::kClassifier: return "classifier";
  }
  throw std::logic_error("bad arch");
}

Arch arch_from_string(const std::string& s) {
  if (s == "generator") return Arch::kGenerator;
  if (s == "critic") return Arch::kCritic;
  if (s == "classifier") return Arch::kClassifier;
  throw std::invalid_argument("unknown arch: " + s);
}

std::vector<int> stage_widths(double width) {
  if (width <= 0.0 || width > 1.0)
    throw std::invalid_argument("width multiplier must be in (0, 1]");
  std::vector<int> ws;
  for (int base : {64, 128, 256, 512})
    ws.push_back(std::max(1, static_cast<int>(std::lround(base * width))));
  return ws;
}

namespace {

// Builds parameters in a fixed creation order so a seed fully determines
// every weight.
struct ParamBuilder {
  Rng rng;
  ParamMap params;
  ParamMap buffers;

  explicit ParamBuilder(std::uint64_t seed) : rng(seed) {}

  void conv(const std::string& name, int out_ch, int in_ch, int k, bool bias = false) {
    int fan_in = in_ch * k * k;
    double std = std::sqrt(2.0 / fan_in);
    Tensor w(Shape{out_ch, in_ch, k, k}, true);
    for (double& v : w.data()) v = rng.normal(0.0, std);
    params.emplace(name + ".w", w);
    if (bias) params.emplace(name + ".b", Tensor(Shape{out_ch}, true));
  }

  void bn(const std::string& name, int ch) {
    params.emplace(name + ".gamma", Tensor::full(Shape{ch}, 1.0, true));
    params.emplace(name + ".beta", Tensor(Shape{ch}, true));
    buffers.emplace(name + ".mean", Tensor(Shape{ch}));
    buffers.emplace(name + ".var", Tensor::full(Shape{ch}, 1.0));
  }

  void dense(const std::string& name, int in_f, int out_f) {
    double std = std::sqrt(2.0 / in_f);
    Tensor w(Shape{in_f, out_f}, true);
    for (double& v : w.data()) v = rng.normal(0.0, std);
    params.emplace(name + ".w", w);
    params.emplace(name + ".b", Tensor(Shape{out_f}, true));
  }

  void enc_block(const std::string& prefix, int in_ch, int out_ch) {
    conv(prefix + ".conv1", out_ch, in_ch, 3);
    bn(prefix + ".bn1", out_ch);
    conv(prefix + ".conv2", out_ch, out_ch, 3);
    bn(prefix + ".bn2", out_ch);
    conv(prefix + ".skip", out_ch, in_ch, 1);
    bn(prefix + ".skipbn", out_ch);
  }

  // Encoder: stem conv then 4 residual stages, each downsampling by 2.
  void encoder(int in_ch, const std::vector<int>& ws) {
    conv("enc.stem.conv", ws[0], in_ch, 3);
    bn("enc.stem.bn", ws[0]);
    int prev = ws[0];
    for (int i = 0; i < 4; ++i) {
      enc_block("enc.s" + std::to_string(i + 1), prev, ws[i]);
      prev = ws[i];
    }
  }
};

const Tensor& P(const ParamMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw std::runtime_error("missing parameter: " + name);
  return it->second;
}

Tensor act(const Tensor& x, double leaky_slope) {
  return leaky_slope > 0.0 ? leaky_relu(x, leaky_slope) : relu(x);
}

Tensor bn_fwd(Model& m, const std::string& name, const Tensor& x, bool training) {
  return batchnorm2d(x, P(m.params, name + ".gamma"), P(m.params, name + ".beta"),
                     P(m.buffers, name + ".mean"), P(m.buffers, name + ".var"),
                     training);
}

Tensor residual_block(Model& m, const std::string& prefix, const Tensor& x, int stride,
                      bool training, double slope) {
  Tensor y = conv2d(x, P(m.params, prefix + ".conv1.w"), stride, 1);
  y = act(bn_fwd(m, prefix + ".bn1", y, training), slope);
  y = conv2d(y, P(m.params, prefix + ".conv2.w"), 1, 1);
  y = bn_fwd(m, prefix + ".bn2", y, training);
  Tensor skip = conv2d(x, P(m.params, prefix + ".skip.w"), stride, 0);
  skip = bn_fwd(m, prefix + ".skipbn", skip, training);
  return act(add(y, skip), slope);
}

Tensor encoder_forward(Model& m, const Tensor& x, bool training, double slope) {
  Tensor y = conv2d(x, P(m.params, "enc.stem.conv.w"), 1, 1);
  y = act(bn_fwd(m, "enc.stem.bn", y, training), slope);
  for (int i = 1; i <= 4; ++i)
    y = residual_block(m, "enc.s" + std::to_string(i), y, 2, training, slope);
  return y;
}

void check_input(const Tensor& x, int channels, const char* who) {
  if (x.rank() != 4 || x.dim(1) != channels)
    throw std::invalid_argument(std::string(who) + ": expected Nx" +
                                std::to_string(channels) + "xHxW input");
  int h = x.dim(2), w = x.dim(3);
  if (h != w || h % 16 != 0)
    throw std::invalid_argument(std::string(who) +
                                ": spatial size must be square and divisible by 16");
}

}  // namespace

Model init_generator(double width, std::uint64_t seed) {
  auto ws = stage_widths(width);
  ParamBuilder b(seed);
  b.encoder(3, ws);
  // decoder mirrors the encoder: upsample-2x + residual conv block
  int prev = ws[3];
  const int dec_out[4] = {ws[2], ws[1], ws[0], ws[0]};
  for (int i = 0; i < 4; ++i) {
    std::string prefix = "dec.d" + std::to_string(i + 1);
    b.enc_block(prefix, prev, dec_out[i]);
    prev = dec_out[i];
  }
  b.conv("head.conv", 1, prev, 3, /*bias=*/true);
  Model m;
  m.def = ModelDef{Arch::kGenerator, width, 0, false};
  m.params = std::move(b.params);
  m.buffers = std::move(b.buffers);
  return m;
}

Model init_critic(double width, std::uint64_t seed) {
  auto ws = stage_widths(width);
  ParamBuilder b(seed);
  b.encoder(1, ws);
  b.dense("adv", ws[3], 1);
  b.dense("aux", ws[3], 1);
  Model m;
  m.def = ModelDef{Arch::kCritic, width, 0, false};
  m.params = std::move(b.params);
  m.buffers = std::move(b.buffers);
  return m;
}

int embedding_dim(const ModelDef& def) {
  auto ws = stage_widths(def.width);
  int cells = def.image_size / 16;
  return ws[3] * cells * cells;
}

Model init_classifier(double width, int image_size, bool multihead, std::uint64_t seed) {
  if (image_size % 16 != 0)
    throw std::invalid_argument("classifier image size must be divisible by 16");
  auto ws = stage_widths(width);
  ParamBuilder b(seed);
  b.encoder(3, ws);
  ModelDef def{Arch::kClassifier, width, image_size, multihead};
  b.dense("fc1", embedding_dim(def), 128);
  b.dense("fc2", 128, 32);
  b.dense("out", 32, 1);
  if (multihead) b.dense("mh", 32, 4);
  Model m;
  m.def = def;
  m.params = std::move(b.params);
  m.buffers = std::move(b.buffers);
  return m;
}

Model init_params(const ModelDef& def, std::uint64_t seed) {
  switch (def.arch) {
    case Arch::kGenerator: return init_generator(def.width, seed);
    case Arch::kCritic: return init_critic(def.width, seed);
    case Arch::kClassifier:
      return init_classifier(def.width, def.image_size, def.multihead, seed);
  }
  throw std::logic_error("bad arch");
}

Tensor generator_forward(Model& m, const Tensor& rgb, bool training) {
  if (m.def.arch != Arch::kGenerator) throw std::invalid_argument("not a generator");
  check_input(rgb, 3, "generator_forward");
  Tensor y = encoder_forward(m, rgb, training, 0.0);
  for (int i = 1; i <= 4; ++i) {
    y = upsample_nearest2x(y);
    y = residual_block(m, "dec.d" + std::to_string(i), y, 1, training, 0.0);
  }
  y = conv2d(y, P(m.params, "head.conv.w"), P(m.params, "head.conv.b"), 1, 1);
  return sigmoid(y);
}

Tensor encoder_embed(Model& m, const Tensor& rgb) {
  check_input(rgb, 3, "encoder_embed");
  Tensor y = encoder_forward(m, rgb, /*training=*/false, 0.0);
  const int n = y.dim(0);
  return reshape(y, Shape{n, y.size() / n});
}

CriticOutput critic_forward(Model& m, const Tensor& depth, bool training) {
  if (m.def.arch != Arch::kCritic) throw std::invalid_argument("not a critic");
  check_input(depth, 1, "critic_forward");
  Tensor y = encoder_forward(m, depth, training, 0.2);
  Tensor pooled = global_avg_pool(y);
  const int n = depth.dim(0);
  CriticOutput out;
  out.adv_score = reshape(
      sigmoid(linear(pooled, P(m.params, "adv.w"), P(m.params, "adv.b"))), Shape{n});
  out.class_prob = reshape(
      sigmoid(linear(pooled, P(m.params, "aux.w"), P(m.params, "aux.b"))), Shape{n});
  return out;
}

ClassifierOutput classifier_forward(Model& m, const Tensor& rgb, bool training) {
  if (m.def.arch != Arch::kClassifier) throw std::invalid_argument("not a classifier");
  check_input(rgb, 3, "classifier_forward");
  if (rgb.dim(2) != m.def.image_size)
    throw std::invalid_argument("classifier_forward: image size mismatch");
  Tensor y = encoder_forward(m, rgb, training, 0.0);
  const int n = y.dim(0);
  Tensor flat = reshape(y, Shape{n, y.size() / n});
  Tensor h = relu(linear(flat, P(m.params, "fc1.w"), P(m.params, "fc1.b")));
  h = relu(linear(h, P(m.params, "fc2.w"), P(m.params, "fc2.b")));
  ClassifierOutput out;
  out.liveness = reshape(
      sigmoid(linear(h, P(m.params, "out.w"), P(m.params, "out.b"))), Shape{n});
  if (m.def.multihead)
    out.class_probs = softmax_rows(linear(h, P(m.params, "mh.w"), P(m.params, "mh.b")));
  return out;
}

void transfer_encoder(const Model& generator, Model& classifier) {
  if (generator.def.arch != Arch::kGenerator || classifier.def.arch != Arch::kClassifier)
    throw std::invalid_argument("transfer_encoder: wrong model kinds");
  if (generator.def.width != classifier.def.width)
    throw std::invalid_argument("transfer_encoder: width mismatch");
  for (auto& [name, param] : classifier.params) {
    if (name.rfind("enc.", 0) != 0) continue;
    const Tensor& src = P(generator.params, name);
    if (src.shape() != param.shape())
      throw std::runtime_error("transfer_encoder: shape mismatch for " + name);
    param.data() = src.data();
  }
  for (auto& [name, buf] : classifier.buffers) {
    if (name.rfind("enc.", 0) != 0) continue;
    buf.data() = P(generator.buffers, name).data();
  }
}

long param_count(const Model& model) {
  long n = 0;
  for (const auto& [name, p] : model.params) n += p.size();
  return n;
}

Model clone_model(const Model& model) {
  Model out;
  out.def = model.def;
  for (const auto& [name, t] : model.params)
    out.params.emplace(name, Tensor(t.shape(), t.data(), /*requires_grad=*/true));
  for (const auto& [name, t] : model.buffers)
    out.buffers.emplace(name, Tensor(t.shape(), t.data()));
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const json& extra) {
  std::filesystem::create_directories(dir);
  json index;
  index["arch"] = to_string(model.def.arch);
  index["width"] = model.def.width;
  index["image_size"] = model.def.image_size;
  index["multihead"] = model.def.multihead;
  json names = json::array();
  json shapes = json::object();
  auto dump = [&](const ParamMap& m, const char* kind) {
    for (const auto& [name, t] : m) {
      write_pdt1(dir / (name + ".pdt1"), t);
      names.push_back(name);
      shapes[name] = t.shape();
      (void)kind;
    }
  };
  dump(model.params, "param");
  dump(model.buffers, "buffer");
  json buffer_names = json::array();
  for (const auto& [name, t] : model.buffers) buffer_names.push_back(name);
  index["names"] = names;
  index["shapes"] = shapes;
  index["buffers"] = buffer_names;
  index["extra"] = extra;
  write_text_file(dir / "index.json", index.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  json index = json::parse(read_text_file(dir / "index.json"));
  ModelDef def;
  def.arch = arch_from_string(index.at("arch").get<std::string>());
  def.width = index.at("width").get<double>();
  def.image_size = index.at("image_size").get<int>();
  def.multihead = index.at("multihead").get<bool>();

  Checkpoint ck;
  ck.model.def = def;
  ck.extra = index.value("extra", json::object());
  std::set<std::string> buffer_names;
  for (const auto& b : index.at("buffers")) buffer_names.insert(b.get<std::string>());
  for (const auto& n : index.at("names")) {
    std::string name = n.get<std::string>();
    Tensor t = read_pdt1(dir / (name + ".pdt1"));
    if (buffer_names.count(name)) {
      ck.model.buffers.emplace(name, t);
    } else {
      Tensor p(t.shape(), t.data(), /*requires_grad=*/true);
      ck.model.params.emplace(name, p);
    }
  }
  return ck;
}

}  // namespace pdgan
