#include "evdistill/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/special.hpp"
#include "evdistill/version.hpp"

namespace evdistill::nn {

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation: '" + std::string(name) + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  throw ConfigError("unknown activation enum value");
}

Eigen::VectorXd apply_activation(Activation act, const Eigen::Ref<const Eigen::VectorXd>& u) {
  switch (act) {
    case Activation::identity: return u;
    case Activation::relu: return u.cwiseMax(0.0);
    case Activation::tanh: return u.array().tanh();
    case Activation::softplus: {
      Eigen::VectorXd out(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = softplus(u[i]);
      return out;
    }
  }
  throw ConfigError("unknown activation enum value");
}

Eigen::VectorXd activation_grad(Activation act, const Eigen::Ref<const Eigen::VectorXd>& u) {
  switch (act) {
    case Activation::identity: return Eigen::VectorXd::Ones(u.size());
    case Activation::relu: {
      Eigen::VectorXd out(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = u[i] > 0.0 ? 1.0 : 0.0;
      return out;
    }
    case Activation::tanh: {
      const Eigen::ArrayXd t = u.array().tanh();
      return 1.0 - t * t;
    }
    case Activation::softplus: {
      Eigen::VectorXd out(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = sigmoid(u[i]);
      return out;
    }
  }
  throw ConfigError("unknown activation enum value");
}

DenseLayer make_dense(Eigen::Index in, Eigen::Index out, Activation act, RandomEngine& rng) {
  if (in < 1 || out < 1) throw ShapeError("make_dense: dimensions must be >= 1");
  DenseLayer layer;
  layer.W.resize(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index j = 0; j < in; ++j) {
    for (Eigen::Index i = 0; i < out; ++i) layer.W(i, j) = uniform(rng, -bound, bound);
  }
  layer.b = Eigen::VectorXd::Zero(out);
  layer.act = act;
  return layer;
}

void accumulate(Gradients& into, const Gradients& g) {
  for (const auto& [idx, lg] : g.layers) {
    auto it = into.layers.find(idx);
    if (it == into.layers.end()) {
      into.layers.emplace(idx, lg);
    } else {
      it->second.dW += lg.dW;
      it->second.db += lg.db;
    }
  }
  for (const auto& [idx, ag] : g.adapters) {
    auto it = into.adapters.find(idx);
    if (it == into.adapters.end()) {
      into.adapters.emplace(idx, ag);
    } else {
      it->second.dA += ag.dA;
      it->second.dB += ag.dB;
    }
  }
}

void scale(Gradients& g, double factor) {
  for (auto& [idx, lg] : g.layers) {
    lg.dW *= factor;
    lg.db *= factor;
  }
  for (auto& [idx, ag] : g.adapters) {
    ag.dA *= factor;
    ag.dB *= factor;
  }
}

std::size_t Network::add_layer(DenseLayer layer, bool frozen) {
  if (layer.W.rows() < 1 || layer.W.cols() < 1) {
    throw ShapeError("add_layer: weight matrix must be nonempty");
  }
  if (layer.b.size() != layer.W.rows()) {
    throw ShapeError("add_layer: bias size does not match output dimension");
  }
  if (!layers_.empty() && layer.in_dim() != layers_.back().out_dim()) {
    throw ShapeError("add_layer: input dimension " + std::to_string(layer.in_dim()) +
                     " does not match previous output " +
                     std::to_string(layers_.back().out_dim()));
  }
  layers_.push_back(std::move(layer));
  frozen_.push_back(frozen ? 1 : 0);
  clear_cache();
  return layers_.size() - 1;
}

void Network::attach_adapter(std::size_t layer_index, Eigen::Index rank, double scale,
                             RandomEngine& rng) {
  if (layer_index >= layers_.size()) throw ShapeError("attach_adapter: no such layer");
  if (adapters_.count(layer_index) > 0) {
    throw std::logic_error("attach_adapter: layer already has an adapter");
  }
  const DenseLayer& L = layers_[layer_index];
  const Eigen::Index cap = std::min(L.in_dim(), L.out_dim()) - 1;
  if (cap < 1) {
    throw ShapeError("attach_adapter: layer " + std::to_string(layer_index) +
                     " is too small to host a strictly low-rank adapter");
  }
  if (rank < 1) throw ShapeError("attach_adapter: rank must be >= 1");
  const Eigen::Index r = std::min(rank, cap);

  LoraAdapter ad;
  ad.A.resize(r, L.in_dim());
  const double bound = 1.0 / std::sqrt(static_cast<double>(L.in_dim()));
  for (Eigen::Index j = 0; j < L.in_dim(); ++j) {
    for (Eigen::Index i = 0; i < r; ++i) ad.A(i, j) = uniform(rng, -bound, bound);
  }
  ad.B = Eigen::MatrixXd::Zero(L.out_dim(), r);
  ad.scale = scale;
  ad.trainable = true;
  adapters_.emplace(layer_index, std::move(ad));
}

void Network::set_adapter(std::size_t layer_index, LoraAdapter adapter) {
  if (layer_index >= layers_.size()) throw ShapeError("set_adapter: no such layer");
  const DenseLayer& L = layers_[layer_index];
  if (adapter.A.cols() != L.in_dim() || adapter.B.rows() != L.out_dim() ||
      adapter.A.rows() != adapter.B.cols()) {
    throw ShapeError("set_adapter: adapter dimensions do not match the layer");
  }
  if (adapter.rank() >= std::min(L.in_dim(), L.out_dim())) {
    throw ShapeError("set_adapter: rank must be below min(in, out)");
  }
  adapters_[layer_index] = std::move(adapter);
}

void Network::set_frozen(std::size_t layer_index, bool frozen) {
  if (layer_index >= layers_.size()) throw ShapeError("set_frozen: no such layer");
  frozen_[layer_index] = frozen ? 1 : 0;
}

Eigen::Index Network::input_dim() const {
  if (layers_.empty()) throw ShapeError("network has no layers");
  return layers_.front().in_dim();
}

Eigen::Index Network::output_dim() const {
  if (layers_.empty()) throw ShapeError("network has no layers");
  return layers_.back().out_dim();
}

bool Network::has_adapter(std::size_t layer_index) const {
  return adapters_.count(layer_index) > 0;
}

const LoraAdapter& Network::adapter(std::size_t layer_index) const {
  const auto it = adapters_.find(layer_index);
  if (it == adapters_.end()) throw ShapeError("adapter: layer has no adapter");
  return it->second;
}

DenseLayer& Network::mutable_layer(std::size_t i) {
  clear_cache();
  return layers_.at(i);
}

LoraAdapter& Network::mutable_adapter(std::size_t layer_index) {
  const auto it = adapters_.find(layer_index);
  if (it == adapters_.end()) throw ShapeError("adapter: layer has no adapter");
  clear_cache();
  return it->second;
}

Eigen::MatrixXd Network::effective_weight(std::size_t i) const {
  if (i >= layers_.size()) throw ShapeError("effective_weight: no such layer");
  const auto it = adapters_.find(i);
  if (it == adapters_.end()) return layers_[i].W;
  return layers_[i].W + it->second.delta();
}

Eigen::VectorXd Network::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (layers_.empty()) throw ShapeError("forward: network has no layers");
  if (x.size() != input_dim()) {
    throw ShapeError("forward: input has size " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim()));
  }
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd u = layers_[i].W * h;
    const auto it = adapters_.find(i);
    if (it != adapters_.end()) {
      u.noalias() += it->second.scale * (it->second.B * (it->second.A * h));
    }
    u += layers_[i].b;
    h = apply_activation(layers_[i].act, u);
  }
  return h;
}

Eigen::VectorXd Network::forward_train(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (layers_.empty()) throw ShapeError("forward_train: network has no layers");
  if (x.size() != input_dim()) {
    throw ShapeError("forward_train: input has size " + std::to_string(x.size()) +
                     ", expected " + std::to_string(input_dim()));
  }
  inputs_.assign(layers_.size(), Eigen::VectorXd());
  preacts_.assign(layers_.size(), Eigen::VectorXd());
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    inputs_[i] = h;
    Eigen::VectorXd u = layers_[i].W * h;
    const auto it = adapters_.find(i);
    if (it != adapters_.end()) {
      u.noalias() += it->second.scale * (it->second.B * (it->second.A * h));
    }
    u += layers_[i].b;
    preacts_[i] = u;
    h = apply_activation(layers_[i].act, u);
  }
  has_cache_ = true;
  return h;
}

Gradients Network::backward(const Eigen::Ref<const Eigen::VectorXd>& output_grad) {
  if (!has_cache_) {
    throw std::logic_error("backward: no cached forward pass (call forward_train first)");
  }
  if (output_grad.size() != output_dim()) {
    throw ShapeError("backward: gradient size does not match output dimension");
  }
  Gradients g;
  Eigen::VectorXd gy = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const DenseLayer& L = layers_[k];
    const Eigen::VectorXd gu = gy.cwiseProduct(activation_grad(L.act, preacts_[k]));
    const Eigen::VectorXd& xin = inputs_[k];
    const auto it = adapters_.find(k);

    if (frozen_[k] == 0) {
      LayerGrads lg;
      lg.dW = gu * xin.transpose();
      lg.db = gu;
      g.layers.emplace(k, std::move(lg));
    }
    if (it != adapters_.end() && it->second.trainable) {
      const LoraAdapter& ad = it->second;
      AdapterGrads ag;
      ag.dA = ad.scale * (ad.B.transpose() * gu) * xin.transpose();
      ag.dB = ad.scale * gu * (ad.A * xin).transpose();
      g.adapters.emplace(k, std::move(ag));
    }
    if (k > 0) {
      Eigen::VectorXd gx = L.W.transpose() * gu;
      if (it != adapters_.end()) {
        gx.noalias() += it->second.scale * (it->second.A.transpose() * (it->second.B.transpose() * gu));
      }
      gy = std::move(gx);
    }
  }
  has_cache_ = false;
  return g;
}

void Network::clear_cache() {
  inputs_.clear();
  preacts_.clear();
  has_cache_ = false;
}

namespace {

Eigen::Index flat_size(const Eigen::MatrixXd& m) { return m.rows() * m.cols(); }

void copy_out(const Eigen::MatrixXd& m, Eigen::VectorXd& flat, Eigen::Index& pos) {
  flat.segment(pos, flat_size(m)) = Eigen::Map<const Eigen::VectorXd>(m.data(), flat_size(m));
  pos += flat_size(m);
}

void copy_in(Eigen::MatrixXd& m, const Eigen::Ref<const Eigen::VectorXd>& flat,
             Eigen::Index& pos) {
  Eigen::Map<Eigen::VectorXd>(m.data(), flat_size(m)) = flat.segment(pos, flat_size(m));
  pos += flat_size(m);
}

void copy_out(const Eigen::VectorXd& v, Eigen::VectorXd& flat, Eigen::Index& pos) {
  flat.segment(pos, v.size()) = v;
  pos += v.size();
}

void copy_in(Eigen::VectorXd& v, const Eigen::Ref<const Eigen::VectorXd>& flat,
             Eigen::Index& pos) {
  v = flat.segment(pos, v.size());
  pos += v.size();
}

}  // namespace

Eigen::Index Network::trainable_size() const {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (frozen_[i] == 0) n += flat_size(layers_[i].W) + layers_[i].b.size();
  }
  for (const auto& [idx, ad] : adapters_) {
    if (ad.trainable) n += flat_size(ad.A) + flat_size(ad.B);
  }
  return n;
}

Eigen::VectorXd Network::trainable_parameters() const {
  Eigen::VectorXd flat(trainable_size());
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (frozen_[i] == 0) {
      copy_out(layers_[i].W, flat, pos);
      copy_out(layers_[i].b, flat, pos);
    }
  }
  for (const auto& [idx, ad] : adapters_) {
    if (ad.trainable) {
      copy_out(ad.A, flat, pos);
      copy_out(ad.B, flat, pos);
    }
  }
  return flat;
}

void Network::set_trainable_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != trainable_size()) {
    throw ShapeError("set_trainable_parameters: expected " + std::to_string(trainable_size()) +
                     " values, got " + std::to_string(flat.size()));
  }
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (frozen_[i] == 0) {
      copy_in(layers_[i].W, flat, pos);
      copy_in(layers_[i].b, flat, pos);
    }
  }
  for (auto& [idx, ad] : adapters_) {
    if (ad.trainable) {
      copy_in(ad.A, flat, pos);
      copy_in(ad.B, flat, pos);
    }
  }
  clear_cache();
}

Eigen::VectorXd Network::all_parameters() const {
  Eigen::Index n = 0;
  for (const auto& L : layers_) n += flat_size(L.W) + L.b.size();
  for (const auto& [idx, ad] : adapters_) n += flat_size(ad.A) + flat_size(ad.B);
  Eigen::VectorXd flat(n);
  Eigen::Index pos = 0;
  for (const auto& L : layers_) {
    copy_out(L.W, flat, pos);
    copy_out(L.b, flat, pos);
  }
  for (const auto& [idx, ad] : adapters_) {
    copy_out(ad.A, flat, pos);
    copy_out(ad.B, flat, pos);
  }
  return flat;
}

void Network::set_all_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  Eigen::Index n = 0;
  for (const auto& L : layers_) n += flat_size(L.W) + L.b.size();
  for (const auto& [idx, ad] : adapters_) n += flat_size(ad.A) + flat_size(ad.B);
  if (flat.size() != n) {
    throw ShapeError("set_all_parameters: expected " + std::to_string(n) + " values, got " +
                     std::to_string(flat.size()));
  }
  Eigen::Index pos = 0;
  for (auto& L : layers_) {
    copy_in(L.W, flat, pos);
    copy_in(L.b, flat, pos);
  }
  for (auto& [idx, ad] : adapters_) {
    copy_in(ad.A, flat, pos);
    copy_in(ad.B, flat, pos);
  }
  clear_cache();
}

std::string Network::arch_signature() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& L = layers_[i];
    out << 'L' << i << ':' << L.in_dim() << "->" << L.out_dim() << ':' << to_string(L.act)
        << ':' << (frozen_[i] ? 'f' : 't') << '|';
  }
  for (const auto& [idx, ad] : adapters_) {
    out << 'A' << idx << ":r" << ad.rank() << ":s" << io::format_double(ad.scale) << ':'
        << (ad.trainable ? 't' : 'f') << '|';
  }
  return out.str();
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

void Optimizer::reset() {
  t_ = 0;
  state_.clear();
}

void Optimizer::apply(const std::string& name, Eigen::Map<Eigen::VectorXd> param,
                      const Eigen::Map<const Eigen::VectorXd>& grad) {
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient in " + name + " at element " + std::to_string(i));
    }
  }
  if (cfg_.plain_sgd) {
    param -= cfg_.lr * grad;
    return;
  }
  auto [it, inserted] = state_.try_emplace(name);
  Moments& mo = it->second;
  if (inserted) {
    mo.m = Eigen::VectorXd::Zero(grad.size());
    mo.v = Eigen::VectorXd::Zero(grad.size());
  }
  if (mo.m.size() != grad.size()) {
    throw ShapeError("optimizer state size mismatch for " + name);
  }
  mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * grad;
  mo.v = cfg_.beta2 * mo.v + (1.0 - cfg_.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const Eigen::ArrayXd mhat = mo.m.array() / bc1;
  const Eigen::ArrayXd vhat = mo.v.array() / bc2;
  param.array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.epsilon);
}

void Optimizer::step(Network& net, const Gradients& grads) {
  ++t_;
  for (const auto& [idx, lg] : grads.layers) {
    if (idx >= net.num_layers()) throw ShapeError("optimizer: gradient for missing layer");
    if (net.layer_frozen(idx)) {
      throw std::logic_error("optimizer: gradient supplied for frozen layer " +
                             std::to_string(idx));
    }
    DenseLayer& L = net.mutable_layer(idx);
    if (lg.dW.rows() != L.W.rows() || lg.dW.cols() != L.W.cols() || lg.db.size() != L.b.size()) {
      throw ShapeError("optimizer: gradient shape mismatch for layer " + std::to_string(idx));
    }
    apply("layer[" + std::to_string(idx) + "].W",
          Eigen::Map<Eigen::VectorXd>(L.W.data(), L.W.size()),
          Eigen::Map<const Eigen::VectorXd>(lg.dW.data(), lg.dW.size()));
    apply("layer[" + std::to_string(idx) + "].b",
          Eigen::Map<Eigen::VectorXd>(L.b.data(), L.b.size()),
          Eigen::Map<const Eigen::VectorXd>(lg.db.data(), lg.db.size()));
  }
  for (const auto& [idx, ag] : grads.adapters) {
    if (!net.has_adapter(idx)) throw ShapeError("optimizer: gradient for missing adapter");
    LoraAdapter& ad = net.mutable_adapter(idx);
    if (!ad.trainable) {
      throw std::logic_error("optimizer: gradient supplied for frozen adapter " +
                             std::to_string(idx));
    }
    if (ag.dA.rows() != ad.A.rows() || ag.dA.cols() != ad.A.cols() ||
        ag.dB.rows() != ad.B.rows() || ag.dB.cols() != ad.B.cols()) {
      throw ShapeError("optimizer: gradient shape mismatch for adapter " + std::to_string(idx));
    }
    apply("adapter[" + std::to_string(idx) + "].A",
          Eigen::Map<Eigen::VectorXd>(ad.A.data(), ad.A.size()),
          Eigen::Map<const Eigen::VectorXd>(ag.dA.data(), ag.dA.size()));
    apply("adapter[" + std::to_string(idx) + "].B",
          Eigen::Map<Eigen::VectorXd>(ad.B.data(), ad.B.size()),
          Eigen::Map<const Eigen::VectorXd>(ag.dB.data(), ag.dB.size()));
  }
  net.clear_cache();
}

Checkpoint save_checkpoint(const Network& net, int epoch, double monitor_nll) {
  Checkpoint c;
  c.epoch = epoch;
  c.monitor_nll = monitor_nll;
  c.arch = net.arch_signature();
  c.trainable = net.trainable_parameters();
  return c;
}

void restore_checkpoint(Network& net, const Checkpoint& ckpt) {
  if (ckpt.arch != net.arch_signature()) {
    throw ShapeError("restore_checkpoint: architecture mismatch");
  }
  net.set_trainable_parameters(ckpt.trainable);
}

Network merge_adapters(const Network& net) {
  Network out;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    DenseLayer L = net.layer(i);
    L.W = net.effective_weight(i);
    out.add_layer(std::move(L), true);
  }
  return out;
}

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const DenseLayer& L = net.layer(i);
    nlohmann::json jl;
    jl["in"] = L.in_dim();
    jl["out"] = L.out_dim();
    jl["activation"] = to_string(L.act);
    jl["frozen"] = net.layer_frozen(i);
    layers.push_back(std::move(jl));
  }
  nlohmann::json adapters = nlohmann::json::array();
  for (const auto& [idx, ad] : net.adapters()) {
    nlohmann::json ja;
    ja["layer"] = idx;
    ja["rank"] = ad.rank();
    ja["scale"] = ad.scale;
    ja["trainable"] = ad.trainable;
    adapters.push_back(std::move(ja));
  }
  const Eigen::VectorXd flat = net.all_parameters();
  nlohmann::json params = nlohmann::json::array();
  for (Eigen::Index i = 0; i < flat.size(); ++i) params.push_back(flat[i]);

  nlohmann::json j;
  j["architecture"]["layers"] = std::move(layers);
  j["architecture"]["adapters"] = std::move(adapters);
  j["parameters"] = std::move(params);
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  if (!j.contains("architecture") || !j.contains("parameters")) {
    throw DataError("network json: missing architecture or parameters");
  }
  Network net;
  RandomEngine dummy(0);
  for (const auto& jl : j.at("architecture").at("layers")) {
    DenseLayer L;
    const Eigen::Index in = jl.at("in").get<Eigen::Index>();
    const Eigen::Index out = jl.at("out").get<Eigen::Index>();
    if (in < 1 || out < 1) throw DataError("network json: bad layer dimensions");
    L.W = Eigen::MatrixXd::Zero(out, in);
    L.b = Eigen::VectorXd::Zero(out);
    L.act = activation_from_string(jl.at("activation").get<std::string>());
    net.add_layer(std::move(L), jl.at("frozen").get<bool>());
  }
  for (const auto& ja : j.at("architecture").at("adapters")) {
    const auto idx = ja.at("layer").get<std::size_t>();
    if (idx >= net.num_layers()) throw DataError("network json: adapter on missing layer");
    const DenseLayer& L = net.layer(idx);
    LoraAdapter ad;
    const Eigen::Index rank = ja.at("rank").get<Eigen::Index>();
    if (rank < 1 || rank >= std::min(L.in_dim(), L.out_dim())) {
      throw DataError("network json: adapter rank out of range");
    }
    ad.A = Eigen::MatrixXd::Zero(rank, L.in_dim());
    ad.B = Eigen::MatrixXd::Zero(L.out_dim(), rank);
    ad.scale = ja.at("scale").get<double>();
    ad.trainable = ja.at("trainable").get<bool>();
    net.set_adapter(idx, std::move(ad));
  }
  const auto& params = j.at("parameters");
  Eigen::VectorXd flat(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) flat[i] = params[i].get<double>();
  net.set_all_parameters(flat);
  return net;
}

void save_network_checkpoint(const std::filesystem::path& path, const Network& net, int epoch,
                             double monitor_nll) {
  nlohmann::json j;
  j["format_version"] = kBundleFormatVersion;
  j["kind"] = "network-checkpoint";
  j["epoch"] = epoch;
  j["monitor_nll"] = monitor_nll;
  j["network"] = network_to_json(net);
  io::atomic_write_file(path, j.dump(2) + "\n");
}

NetworkSnapshot load_network_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kBundleFormatVersion) {
    throw DataError("checkpoint " + path.string() + ": unsupported format version");
  }
  NetworkSnapshot snap;
  snap.epoch = j.at("epoch").get<int>();
  snap.monitor_nll = j.at("monitor_nll").get<double>();
  snap.net = network_from_json(j.at("network"));
  return snap;
}

}  // namespace evdistill::nn
