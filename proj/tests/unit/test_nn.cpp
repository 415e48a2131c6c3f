#include <doctest.h>

#include <cmath>
#include <random>

#include "edgetimer/nn.hpp"
#include "gradcheck.hpp"

using namespace edgetimer;
using namespace edgetimer::nn;

namespace {

double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Scalar GRU step written from the gate equations, reading the flat
// parameter layout W_ih | W_hh | b_ih | b_hh | W_o | b_o (column-major).
std::vector<double> gru_oracle(const RecurrentNet& net, const std::vector<double>& x, std::vector<double>& h) {
  const int I = net.input_size(), H = net.hidden_size(), O = net.output_size();
  const auto p = net.params();
  const std::size_t w_ih = 0, w_hh = w_ih + 3 * H * I, b_ih = w_hh + 3 * H * H, b_hh = b_ih + 3 * H,
                    w_o = b_hh + 3 * H, b_o = w_o + O * H;
  auto gi = [&](int row) {
    double s = p[b_ih + row];
    for (int c = 0; c < I; ++c) s += p[w_ih + c * 3 * H + row] * x[c];
    return s;
  };
  auto gh = [&](int row) {
    double s = p[b_hh + row];
    for (int c = 0; c < H; ++c) s += p[w_hh + c * 3 * H + row] * h[c];
    return s;
  };
  std::vector<double> next(H);
  for (int k = 0; k < H; ++k) {
    const double r = sig(gi(k) + gh(k));
    const double z = sig(gi(H + k) + gh(H + k));
    const double n = std::tanh(gi(2 * H + k) + r * gh(2 * H + k));
    next[k] = (1 - z) * n + z * h[k];
  }
  h = next;
  std::vector<double> y(O);
  for (int o = 0; o < O; ++o) {
    y[o] = p[b_o + o];
    for (int k = 0; k < H; ++k) y[o] += p[w_o + k * O + o] * h[k];
  }
  return y;
}

}  // namespace

TEST_CASE("recurrent step matches the gate equations") {
  std::mt19937_64 rng(1);
  RecurrentNet net(3, 5, 2);
  net.init(rng, 1.0);
  std::normal_distribution<double> g;
  Vector h = Vector::Zero(5);
  std::vector<double> ho(5, 0.0);
  for (int t = 0; t < 6; ++t) {
    Vector x(3);
    for (int k = 0; k < 3; ++k) x(k) = g(rng);
    const auto y = net.step(x, h);
    const auto yo = gru_oracle(net, {x(0), x(1), x(2)}, ho);
    for (int k = 0; k < 2; ++k) CHECK(y(k) == doctest::Approx(yo[k]).epsilon(1e-12));
    for (int k = 0; k < 5; ++k) CHECK(h(k) == doctest::Approx(ho[k]).epsilon(1e-12));
  }
}

TEST_CASE("batched forward equals per-sample steps") {
  std::mt19937_64 rng(2);
  RecurrentNet net(2, 4, 3);
  net.init(rng);
  auto seq = reftest::random_sequence(2, 4, 5, 3, rng);
  const auto out = net.forward(seq);
  for (int b = 0; b < 3; ++b) {
    Vector h = seq.h0.col(b);
    for (int t = 0; t < 5; ++t) {
      const auto y = net.step(seq.inputs[t].col(b), h);
      for (int k = 0; k < 3; ++k) CHECK(y(k) == doctest::Approx(out[t](k, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("backpropagation through time matches finite differences") {
  std::mt19937_64 rng(3);
  RecurrentNet net(3, 4, 2);
  net.init(rng, 1.0);
  const auto seq = reftest::random_sequence(3, 4, 6, 2, rng);
  std::vector<Matrix> w;
  std::normal_distribution<double> g;
  for (int t = 0; t < 6; ++t) {
    Matrix m(2, 2);
    for (int k = 0; k < 4; ++k) m.data()[k] = g(rng);
    w.push_back(m);
  }
  auto loss = [&](std::span<double> grad) {
    RecurrentNet::Cache c;
    const auto out = net.forward(seq, &c);
    double s = 0;
    for (int t = 0; t < 6; ++t) s += out[t].cwiseProduct(w[t]).sum();
    if (!grad.empty()) net.backward(seq, c, w, grad);
    return s;
  };
  CHECK(reftest::relative_gradient_error(net, loss) < 1e-6);
}

TEST_CASE("actor and critic losses have correct gradients") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    RecurrentNet actor(3, 4, 2), critic(5, 4, 1);
    actor.init(rng, 1.0);
    critic.init(rng, 1.0);
    const auto ab = reftest::random_actor_batch(actor, 4, 3, rng);
    const auto cb = reftest::random_critic_batch(critic, 4, 3, rng);
    CHECK(reftest::relative_gradient_error(
              actor, [&](std::span<double> g) { return actor_loss(actor, ab, 0.2, 0.01, -1e9, g).loss; }) < 1e-4);
    CHECK(reftest::relative_gradient_error(critic, [&](std::span<double> g) { return critic_loss(critic, cb, g); }) <
          1e-4);
  }
}

TEST_CASE("Adam and gradient clipping") {
  std::vector<double> p{1.0, -2.0}, g{0.5, -3.0};
  Adam opt(2, 0.1);
  opt.step(p, g);
  // First bias-corrected step is lr * sign(g) up to eps.
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-4));
  CHECK(opt.steps() == 1);

  std::vector<double> big{3.0, 4.0};
  CHECK(clip_grad_norm(big, 1.0) == doctest::Approx(5.0));
  CHECK(big[0] == doctest::Approx(0.6));
  CHECK(big[1] == doctest::Approx(0.8));
  std::vector<double> small{0.3, 0.4};
  clip_grad_norm(small, 1.0);
  CHECK(small[0] == 0.3);
}

TEST_CASE("value normalizer") {
  ValueNorm vn;
  CHECK(vn.normalize(3.0) == 3.0);
  std::vector<double> batch{1.0, 3.0, 5.0};
  vn.update(batch);
  CHECK(vn.mean() == doctest::Approx(3.0));
  CHECK(vn.variance() == doctest::Approx(8.0 / 3.0));
  for (double v : {-4.0, 0.0, 2.5}) CHECK(vn.denormalize(vn.normalize(v)) == doctest::Approx(v));
  std::vector<double> flat{7.0, 7.0};
  for (int k = 0; k < 2000; ++k) vn.update(flat);
  CHECK(vn.mean() == doctest::Approx(7.0).epsilon(1e-6));
  CHECK(vn.variance() == doctest::Approx(1e-2));   // floor
}
