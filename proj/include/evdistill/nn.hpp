#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "evdistill/random.hpp"

#include <nlohmann/json.hpp>

namespace evdistill::nn {

enum class Activation { identity, relu, tanh, softplus };

Activation activation_from_string(std::string_view name);
std::string to_string(Activation act);

Eigen::VectorXd apply_activation(Activation act, const Eigen::Ref<const Eigen::VectorXd>& u);
// Elementwise derivative evaluated at the pre-activation.
Eigen::VectorXd activation_grad(Activation act, const Eigen::Ref<const Eigen::VectorXd>& u);

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
  Activation act = Activation::identity;

  Eigen::Index in_dim() const { return W.cols(); }
  Eigen::Index out_dim() const { return W.rows(); }
};

// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
DenseLayer make_dense(Eigen::Index in, Eigen::Index out, Activation act, RandomEngine& rng);

// Low-rank residual on a dense layer: effective weight W + scale * B * A.
// B starts at zero so the adapter is initially a no-op.
struct LoraAdapter {
  Eigen::MatrixXd A;  // rank x in
  Eigen::MatrixXd B;  // out x rank
  double scale = 1.0;
  bool trainable = true;

  Eigen::Index rank() const { return A.rows(); }
  Eigen::MatrixXd delta() const { return scale * B * A; }
};

struct LayerGrads {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
};

struct AdapterGrads {
  Eigen::MatrixXd dA;
  Eigen::MatrixXd dB;
};

// Gradients for the trainable blocks only, keyed by layer index.
struct Gradients {
  std::map<std::size_t, LayerGrads> layers;
  std::map<std::size_t, AdapterGrads> adapters;

  bool empty() const { return layers.empty() && adapters.empty(); }
};

void accumulate(Gradients& into, const Gradients& g);
void scale(Gradients& g, double factor);

// Feed-forward stack of dense layers with optional per-layer adapters.
// forward() is const and side-effect free; forward_train() caches the
// activations that backward() consumes.
class Network {
 public:
  std::size_t add_layer(DenseLayer layer, bool frozen = true);

  // Requested rank is clamped to min(in, out) - 1 to keep the adapter
  // strictly low-rank; layers with min(in, out) < 2 cannot host one.
  void attach_adapter(std::size_t layer_index, Eigen::Index rank, double scale,
                      RandomEngine& rng);
  void set_adapter(std::size_t layer_index, LoraAdapter adapter);
  void set_frozen(std::size_t layer_index, bool frozen);

  std::size_t num_layers() const { return layers_.size(); }
  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  DenseLayer& mutable_layer(std::size_t i);
  bool layer_frozen(std::size_t i) const { return frozen_.at(i) != 0; }
  const std::map<std::size_t, LoraAdapter>& adapters() const { return adapters_; }
  bool has_adapter(std::size_t layer_index) const;
  const LoraAdapter& adapter(std::size_t layer_index) const;
  LoraAdapter& mutable_adapter(std::size_t layer_index);

  Eigen::MatrixXd effective_weight(std::size_t i) const;

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd forward_train(const Eigen::Ref<const Eigen::VectorXd>& x);
  // Consumes the cached pass; calling it twice throws std::logic_error.
  Gradients backward(const Eigen::Ref<const Eigen::VectorXd>& output_grad);
  void clear_cache();

  // Flat views over the trainable blocks, ordered: unfrozen layers
  // ascending (W column-major, then b), then adapters ascending (A, B).
  Eigen::Index trainable_size() const;
  Eigen::VectorXd trainable_parameters() const;
  void set_trainable_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

  // Every parameter, frozen or not, in layer-then-adapter order; used by
  // serialization.
  Eigen::VectorXd all_parameters() const;
  void set_all_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

  // Compact structural fingerprint: dims, activations, frozen flags,
  // adapter ranks and scales.
  std::string arch_signature() const;

 private:
  std::vector<DenseLayer> layers_;
  std::vector<char> frozen_;
  std::map<std::size_t, LoraAdapter> adapters_;

  std::vector<Eigen::VectorXd> inputs_;
  std::vector<Eigen::VectorXd> preacts_;
  bool has_cache_ = false;
};

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool plain_sgd = false;  // plain gradient step, for tests and diagnostics
};

// Adam with per-block first/second moment state. Throws NumericError
// naming the offending block on non-finite gradients.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {});

  void step(Network& net, const Gradients& grads);
  void reset();

  const OptimizerConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
  };

  void apply(const std::string& name, Eigen::Map<Eigen::VectorXd> param,
             const Eigen::Map<const Eigen::VectorXd>& grad);

  OptimizerConfig cfg_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

// In-memory snapshot of the trainable parameters.
struct Checkpoint {
  int epoch = 0;
  double monitor_nll = 0.0;
  std::string arch;
  Eigen::VectorXd trainable;
};

Checkpoint save_checkpoint(const Network& net, int epoch, double monitor_nll);
// Throws ShapeError when the checkpoint was taken from a different
// architecture.
void restore_checkpoint(Network& net, const Checkpoint& ckpt);

// Folds every adapter into its layer weight (W + scale*B*A) and returns
// the adapter-free network, the usual deployment form once training is
// done. All layers come back frozen.
Network merge_adapters(const Network& net);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

struct NetworkSnapshot {
  int epoch = 0;
  double monitor_nll = 0.0;
  Network net;
};

void save_network_checkpoint(const std::filesystem::path& path, const Network& net, int epoch,
                             double monitor_nll);
NetworkSnapshot load_network_checkpoint(const std::filesystem::path& path);

}  // namespace evdistill::nn
