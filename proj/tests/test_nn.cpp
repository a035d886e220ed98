#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "evdistill/errors.hpp"
#include "evdistill/nn.hpp"
#include "evdistill/random.hpp"
#include "test_support.hpp"

using namespace evdistill;
using testsupport::TempDir;

namespace {

nn::DenseLayer dense(Eigen::MatrixXd W, Eigen::VectorXd b, nn::Activation act) {
  nn::DenseLayer L;
  L.W = std::move(W);
  L.b = std::move(b);
  L.act = act;
  return L;
}

Eigen::MatrixXd random_matrix(RandomEngine& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(rng, -1.0, 1.0);
  }
  return m;
}

Eigen::VectorXd random_vector(RandomEngine& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, -1.0, 1.0);
  return v;
}

// Small random stack with adapters where they fit and an unfrozen head.
// Kink-free activations only, so finite differences stay trustworthy.
nn::Network random_net(RandomEngine& rng, Eigen::Index in, std::vector<Eigen::Index> widths,
                       bool with_adapters, int rank = 2) {
  const nn::Activation smooth[] = {nn::Activation::tanh, nn::Activation::softplus,
                                   nn::Activation::identity};
  nn::Network net;
  Eigen::Index prev = in;
  for (std::size_t li = 0; li < widths.size(); ++li) {
    const bool last = li + 1 == widths.size();
    const nn::Activation act = last ? nn::Activation::identity : smooth[li % 3];
    net.add_layer(dense(random_matrix(rng, widths[li], prev), random_vector(rng, widths[li]),
                        act),
                  !last);
    prev = widths[li];
  }
  if (with_adapters) {
    for (std::size_t i = 0; i < net.num_layers(); ++i) {
      const nn::DenseLayer& L = net.layer(i);
      if (std::min(L.in_dim(), L.out_dim()) >= 2) {
        net.attach_adapter(i, rank, 1.0, rng);
        // Random nonzero B so adapter gradients flow both ways.
        nn::LoraAdapter ad = net.adapter(i);
        ad.B = random_matrix(rng, ad.B.rows(), ad.B.cols());
        net.set_adapter(i, std::move(ad));
      }
    }
  }
  return net;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (a(i, j) != b(i, j)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("forward matches hand-computed affine chains") {
  nn::Network identity_net;
  identity_net.add_layer(dense(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3),
                               nn::Activation::identity),
                         false);
  const Eigen::VectorXd x = testsupport::vec({0.3, -1.2, 4.0});
  const Eigen::VectorXd y = identity_net.forward(x);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(y[i] == x[i]);

  RandomEngine rng(3);
  const Eigen::MatrixXd W1 = random_matrix(rng, 4, 3);
  const Eigen::VectorXd b1 = random_vector(rng, 4);
  const Eigen::MatrixXd W2 = random_matrix(rng, 2, 4);
  const Eigen::VectorXd b2 = random_vector(rng, 2);

  nn::Network affine;
  affine.add_layer(dense(W1, b1, nn::Activation::identity));
  affine.add_layer(dense(W2, b2, nn::Activation::identity));
  const Eigen::VectorXd expect_affine = W2 * (W1 * x + b1) + b2;
  CHECK((affine.forward(x) - expect_affine).cwiseAbs().maxCoeff() <= 1e-12);

  nn::Network curved;
  curved.add_layer(dense(W1, b1, nn::Activation::tanh));
  curved.add_layer(dense(W2, b2, nn::Activation::identity));
  const Eigen::VectorXd expect_curved = W2 * (W1 * x + b1).array().tanh().matrix() + b2;
  CHECK((curved.forward(x) - expect_curved).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(affine.forward(Eigen::VectorXd::Zero(5)), ShapeError);
}

TEST_CASE("activation gradients match finite differences") {
  const double h = 1e-6;
  const double points[] = {-2.3, -0.5, 0.4, 1.7};
  for (const nn::Activation act : {nn::Activation::identity, nn::Activation::tanh,
                                   nn::Activation::softplus, nn::Activation::relu}) {
    for (const double u : points) {
      Eigen::VectorXd up(1), down(1), at(1);
      up << u + h;
      down << u - h;
      at << u;
      const double fd =
          (nn::apply_activation(act, up)[0] - nn::apply_activation(act, down)[0]) / (2 * h);
      CHECK(std::abs(nn::activation_grad(act, at)[0] - fd) <= 1e-6);
    }
  }
}

TEST_CASE("fresh adapters are exact no-ops") {
  RandomEngine rng(17);
  nn::Network net = random_net(rng, 3, {4, 4, 2}, false);
  const Eigen::VectorXd x = random_vector(rng, 3);
  const Eigen::VectorXd before = net.forward(x);

  for (std::size_t i = 0; i < net.num_layers(); ++i) net.attach_adapter(i, 2, 1.0, rng);
  const Eigen::VectorXd after = net.forward(x);
  for (Eigen::Index i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    CHECK(bitwise_equal(net.effective_weight(i), net.layer(i).W));
  }
}

TEST_CASE("adapter rank is clamped strictly below min(in, out)") {
  RandomEngine rng(5);
  nn::Network net;
  net.add_layer(dense(random_matrix(rng, 4, 4), Eigen::VectorXd::Zero(4), nn::Activation::tanh));
  net.add_layer(dense(random_matrix(rng, 1, 4), Eigen::VectorXd::Zero(1),
                      nn::Activation::identity));
  net.attach_adapter(0, 100, 1.0, rng);
  CHECK(net.adapter(0).rank() == 3);
  CHECK_THROWS_AS(net.attach_adapter(1, 1, 1.0, rng), ShapeError);

  nn::Network small;
  small.add_layer(dense(random_matrix(rng, 6, 3), Eigen::VectorXd::Zero(6),
                        nn::Activation::identity));
  small.attach_adapter(0, 2, 1.0, rng);
  CHECK(small.adapter(0).rank() == 2);
}

TEST_CASE("backward matches central finite differences") {
  RandomEngine rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index in = 2 + static_cast<Eigen::Index>(uniform01(rng) * 5);
    std::vector<Eigen::Index> widths;
    const int depth = 1 + static_cast<int>(uniform01(rng) * 3);
    for (int d = 0; d < depth; ++d) {
      widths.push_back(2 + static_cast<Eigen::Index>(uniform01(rng) * 5));
    }
    nn::Network net = random_net(rng, in, widths, trial % 2 == 0);
    const Eigen::VectorXd x = random_vector(rng, in);
    const Eigen::VectorXd c = random_vector(rng, net.output_dim());

    net.forward_train(x);
    const Eigen::VectorXd analytic = testsupport::flatten_trainable(net, net.backward(c));
    const Eigen::VectorXd fd =
        testsupport::fd_trainable(net, [&]() { return c.dot(net.forward(x)); });
    worst = std::max(worst, testsupport::max_rel_err(analytic, fd));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward emits gradients only for trainable blocks") {
  RandomEngine rng(31);
  nn::Network net;
  net.add_layer(dense(random_matrix(rng, 4, 3), random_vector(rng, 4), nn::Activation::tanh));
  net.add_layer(dense(random_matrix(rng, 2, 4), random_vector(rng, 2),
                      nn::Activation::identity));
  const Eigen::VectorXd x = random_vector(rng, 3);
  const Eigen::VectorXd c = testsupport::vec({1.0, -0.5});

  net.forward_train(x);
  CHECK(net.backward(c).empty());

  net.attach_adapter(0, 2, 1.0, rng);
  net.forward_train(x);
  const nn::Gradients g = net.backward(c);
  CHECK(g.layers.empty());
  REQUIRE(g.adapters.count(0) == 1);
  // B starts at zero, so dA = scale * B^T delta x^T vanishes while dB does not.
  CHECK(g.adapters.at(0).dA.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.adapters.at(0).dB.cwiseAbs().maxCoeff() > 0.0);

  net.set_frozen(1, false);
  net.forward_train(x);
  const nn::Gradients g2 = net.backward(c);
  CHECK(g2.layers.size() == 1);
  CHECK(g2.layers.count(1) == 1);
}

TEST_CASE("backward consumes the cached forward pass") {
  RandomEngine rng(37);
  nn::Network net = random_net(rng, 3, {4, 2}, true);
  const Eigen::VectorXd x = random_vector(rng, 3);
  const Eigen::VectorXd c = random_vector(rng, 2);
  CHECK_THROWS_AS(net.backward(c), std::logic_error);
  net.forward_train(x);
  net.backward(c);
  CHECK_THROWS_AS(net.backward(c), std::logic_error);
  net.forward_train(x);
  net.clear_cache();
  CHECK_THROWS_AS(net.backward(c), std::logic_error);
}

TEST_CASE("plain gradient step moves 1.0 to 0.8") {
  nn::Network net;
  net.add_layer(dense(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1),
                      nn::Activation::identity),
                false);
  nn::Gradients g;
  g.layers[0].dW = Eigen::MatrixXd::Constant(1, 1, 2.0);
  g.layers[0].db = Eigen::VectorXd::Zero(1);
  nn::Optimizer opt({.lr = 0.1, .plain_sgd = true});
  opt.step(net, g);
  CHECK(net.layer(0).W(0, 0) == 0.8);
  CHECK(net.layer(0).b[0] == 0.0);
}

TEST_CASE("adam matches a scalar reference to 1e-12") {
  nn::Network net;
  net.add_layer(dense(Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Zero(1),
                      nn::Activation::identity),
                false);
  const nn::OptimizerConfig cfg{};
  nn::Optimizer opt(cfg);

  double theta = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double grad = std::sin(static_cast<double>(t)) + 0.5;
    nn::Gradients g;
    g.layers[0].dW = Eigen::MatrixXd::Constant(1, 1, grad);
    g.layers[0].db = Eigen::VectorXd::Zero(1);
    opt.step(net, g);

    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(cfg.beta1, t));
    const double vhat = v / (1.0 - std::pow(cfg.beta2, t));
    theta -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    CHECK(std::abs(net.layer(0).W(0, 0) - theta) <= 1e-12);
  }
}

TEST_CASE("zero gradients leave parameters unchanged") {
  RandomEngine rng(41);
  nn::Network net = random_net(rng, 3, {4, 2}, true);
  net.set_frozen(1, false);
  const Eigen::VectorXd before = net.trainable_parameters();

  nn::Gradients g;
  g.layers[1].dW = Eigen::MatrixXd::Zero(2, 4);
  g.layers[1].db = Eigen::VectorXd::Zero(2);
  for (const auto& [idx, ad] : net.adapters()) {
    g.adapters[idx].dA = Eigen::MatrixXd::Zero(ad.A.rows(), ad.A.cols());
    g.adapters[idx].dB = Eigen::MatrixXd::Zero(ad.B.rows(), ad.B.cols());
  }
  nn::Optimizer opt;
  opt.step(net, g);
  opt.step(net, g);
  const Eigen::VectorXd after = net.trainable_parameters();
  for (Eigen::Index i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
}

TEST_CASE("frozen layers never move during training") {
  RandomEngine rng(43);
  nn::Network net = random_net(rng, 4, {5, 3}, true);
  std::vector<Eigen::MatrixXd> w_before;
  std::vector<Eigen::VectorXd> b_before;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    w_before.push_back(net.layer(i).W);
    b_before.push_back(net.layer(i).b);
  }
  nn::Optimizer opt;
  for (int step = 0; step < 20; ++step) {
    const Eigen::VectorXd x = random_vector(rng, 4);
    const Eigen::VectorXd c = random_vector(rng, 3);
    net.forward_train(x);
    opt.step(net, net.backward(c));
  }
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    if (net.layer_frozen(i)) {
      CHECK(bitwise_equal(net.layer(i).W, w_before[i]));
      CHECK(bitwise_equal(net.layer(i).b, b_before[i]));
    } else {
      // The unfrozen head must actually have trained.
      CHECK_FALSE(bitwise_equal(net.layer(i).W, w_before[i]));
    }
  }
}

TEST_CASE("non-finite gradients are rejected with the block name") {
  RandomEngine rng(47);
  nn::Network net;
  net.add_layer(dense(random_matrix(rng, 2, 2), random_vector(rng, 2),
                      nn::Activation::identity),
                false);
  nn::Gradients g;
  g.layers[0].dW = Eigen::MatrixXd::Constant(2, 2, std::nan(""));
  g.layers[0].db = Eigen::VectorXd::Zero(2);
  nn::Optimizer opt;
  CHECK_THROWS_AS(opt.step(net, g), NumericError);
  CHECK_THROWS_WITH_AS(opt.step(net, g), doctest::Contains("layer[0].W"), NumericError);
}

TEST_CASE("checkpoints capture and restore the exact trainable state") {
  RandomEngine rng(53);
  nn::Network net = random_net(rng, 3, {4, 2}, true);
  const Eigen::VectorXd snapshot = net.trainable_parameters();
  const nn::Checkpoint ckpt = nn::save_checkpoint(net, 7, 0.321);
  CHECK(ckpt.epoch == 7);
  CHECK(ckpt.monitor_nll == 0.321);

  net.set_trainable_parameters(snapshot.array() + 1.5);
  nn::restore_checkpoint(net, ckpt);
  const Eigen::VectorXd restored = net.trainable_parameters();
  for (Eigen::Index i = 0; i < snapshot.size(); ++i) CHECK(restored[i] == snapshot[i]);

  nn::Network other = random_net(rng, 3, {5, 2}, true);
  CHECK_THROWS_AS(nn::restore_checkpoint(other, ckpt), ShapeError);
}

TEST_CASE("network checkpoints round trip through disk") {
  TempDir dir;
  RandomEngine rng(59);
  nn::Network net = random_net(rng, 3, {4, 2}, true);
  const auto path = dir.path() / "ckpt.json";
  nn::save_network_checkpoint(path, net, 3, 1.25);
  const nn::NetworkSnapshot snap = nn::load_network_checkpoint(path);
  CHECK(snap.epoch == 3);
  CHECK(snap.monitor_nll == 1.25);
  const Eigen::VectorXd a = net.all_parameters();
  const Eigen::VectorXd b = snap.net.all_parameters();
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(snap.net.arch_signature() == net.arch_signature());
}

TEST_CASE("json serialization preserves every parameter and flag") {
  RandomEngine rng(61);
  nn::Network net = random_net(rng, 4, {5, 3}, true);
  net.set_frozen(1, false);
  const nn::Network copy = nn::network_from_json(nn::network_to_json(net));
  CHECK(copy.arch_signature() == net.arch_signature());
  const Eigen::VectorXd a = net.all_parameters();
  const Eigen::VectorXd b = copy.all_parameters();
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  for (int probe = 0; probe < 5; ++probe) {
    const Eigen::VectorXd x = random_vector(rng, 4);
    CHECK((copy.forward(x) - net.forward(x)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("merge_adapters folds deltas without changing the function") {
  RandomEngine rng(67);
  nn::Network net = random_net(rng, 4, {5, 4, 3}, true);
  // Push the adapters away from zero so the fold is not a no-op.
  nn::Optimizer opt;
  for (int step = 0; step < 5; ++step) {
    const Eigen::VectorXd x = random_vector(rng, 4);
    net.forward_train(x);
    opt.step(net, net.backward(random_vector(rng, 3)));
  }
  const nn::Network merged = nn::merge_adapters(net);
  CHECK(merged.adapters().empty());
  for (std::size_t i = 0; i < merged.num_layers(); ++i) CHECK(merged.layer_frozen(i));
  for (int probe = 0; probe < 10; ++probe) {
    const Eigen::VectorXd x = random_vector(rng, 4);
    CHECK((merged.forward(x) - net.forward(x)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("trainable parameter views round trip") {
  RandomEngine rng(71);
  nn::Network net = random_net(rng, 3, {4, 2}, true);
  net.set_frozen(1, false);
  const Eigen::VectorXd theta = net.trainable_parameters();
  const Eigen::VectorXd perturbed = theta.array() * 1.5 - 0.25;
  net.set_trainable_parameters(perturbed);
  const Eigen::VectorXd back = net.trainable_parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) CHECK(back[i] == perturbed[i]);
  CHECK_THROWS_AS(net.set_trainable_parameters(Eigen::VectorXd::Zero(theta.size() + 1)),
                  ShapeError);
}

TEST_CASE("make_dense draws bounded weights and zero bias") {
  RandomEngine rng(73);
  const nn::DenseLayer L = nn::make_dense(9, 6, nn::Activation::tanh, rng);
  CHECK(L.W.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  CHECK(L.b.cwiseAbs().maxCoeff() == 0.0);

  RandomEngine a(99), b(99), c(100);
  const nn::DenseLayer La = nn::make_dense(5, 4, nn::Activation::tanh, a);
  const nn::DenseLayer Lb = nn::make_dense(5, 4, nn::Activation::tanh, b);
  const nn::DenseLayer Lc = nn::make_dense(5, 4, nn::Activation::tanh, c);
  CHECK(bitwise_equal(La.W, Lb.W));
  CHECK_FALSE(bitwise_equal(La.W, Lc.W));
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto run = [](std::uint64_t seed) {
    RandomEngine rng(seed);
    nn::Network net = random_net(rng, 3, {4, 2}, true);
    nn::Optimizer opt;
    for (int step = 0; step < 10; ++step) {
      const Eigen::VectorXd x = random_vector(rng, 3);
      net.forward_train(x);
      opt.step(net, net.backward(random_vector(rng, 2)));
    }
    return net.all_parameters();
  };
  const Eigen::VectorXd a = run(12345);
  const Eigen::VectorXd b = run(12345);
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
