#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hgv/battn.hpp"
#include "hgv/errors.hpp"
#include "support.hpp"

using namespace hgv;
using tensor::Tensor;
using tensor::Var;

namespace {
struct Channel {
  tensor::ParamStore store;
  seqenc::ChannelLSTM lstm;
  battn::BetaAttnParams attn;
  Channel(std::size_t d1, std::size_t d2, std::uint64_t seed) {
    seqenc::register_params(store, 0, d1, seed);
    battn::register_params(store, 1, d1, d2, true, seed);
    lstm = seqenc::bind(store, 0);
    attn = battn::bind(store, 1, true, 1.0);
  }
};

}  // namespace

TEST_CASE("decay and significance") {
  CHECK(battn::time_decay(8, 8) == 1.0);
  CHECK(battn::time_decay(2, 8) == 0.25);
  for (std::size_t steps = 1; steps <= 64; ++steps)
    for (std::size_t t = 1; t <= steps; ++t)
      CHECK(battn::harmonic_weight(battn::time_decay(t, steps), 0.6, 0.0) ==
            static_cast<double>(t) / static_cast<double>(steps));
  CHECK_THROWS_AS(battn::time_decay(0, 8), DomainError);
  std::vector<double> row{0.3, -2.0, 1.1};
  auto o = battn::significance_row(row);
  CHECK(o[1] == battn::significance(-2.0, 2.0));
  std::vector<double> peak{0.5, 3.0, -1.0};
  CHECK(battn::significance_row(peak)[1] == 1.0);
  for (double v : battn::significance_row(row)) CHECK(v > 0.0);
}

TEST_CASE("harmonic weight examples") {
  CHECK(battn::harmonic_weight(0.5, 0.5, 1.0) == 0.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng), o = u(rng);
    CHECK(battn::harmonic_weight(d, o, 0.0) == d);
    CHECK(std::abs(battn::harmonic_weight(d, o, 1e6) - o) < 1e-4);
  }
  CHECK_THROWS_AS(battn::harmonic_weight(0.5, 0.5, -1.0), DomainError);
}

TEST_CASE("harmonic weight lies between decay and significance") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-3, 1.0), b(0.0, 50.0);
  for (int i = 0; i < 10000; ++i) {
    const double d = u(rng), o = u(rng), beta = b(rng);
    const double w = battn::harmonic_weight(d, o, beta);
    CHECK(w >= std::min(d, o));
    CHECK(w <= std::max(d, o));
  }
}

TEST_CASE("beta zero gives increasing decay weights") {
  tensor::Tape tape;
  const std::size_t T = 6;
  std::vector<double> row{0.5, -1.0, 2.0, 0.0, 1.5, -0.3};
  auto d = battn::decay_row(T);
  auto w = battn::harmonic_weights(tape, tape.constant(Tensor::scalar(0.0)), d, battn::significance_row(row));
  for (std::size_t t = 0; t < T; ++t) CHECK(w.value()[t] == d[t]);
  for (std::size_t t = 1; t < T; ++t) CHECK(w.value()[t] > w.value()[t - 1]);
}

TEST_CASE("tape harmonic weights match the scalar form") {
  tensor::Tape tape;
  std::vector<double> row{0.5, -1.0, 2.0, 0.0};
  auto d = battn::decay_row(4);
  auto o = battn::significance_row(row);
  auto w = battn::harmonic_weights(tape, tape.constant(Tensor::scalar(0.7)), d, o);
  for (std::size_t t = 0; t < 4; ++t) CHECK(w.value()[t] == battn::harmonic_weight(d[t], o[t], 0.7));
}

TEST_CASE("trade-off starts at softplus(0)") {
  Channel ch(4, 2, 1);
  tensor::Tape tape;
  CHECK(battn::trade_off(tape, ch.attn).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ch.store.get("battn/ch0/gamma").value.item() == 1.0);
}

TEST_CASE("attention weights form a distribution") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Channel ch(4, 2, trial);
    for (auto& v : ch.store.get("battn/ch0/Wq").value.data()) v *= 5.0;
    std::vector<double> s(7);
    for (auto& v : s) v = std::uniform_real_distribution<double>(-2, 2)(rng);
    tensor::Tape tape;
    auto h = seqenc::lstm_channel_forward(tape, s, ch.lstm);
    auto betas = battn::harmonic_weights(tape, battn::trade_off(tape, ch.attn), battn::decay_row(7),
                                         battn::significance_row(s));
    auto alpha = battn::battn_alpha(tape, h, betas, ch.attn.channels[0], 1.0);
    double total = 0.0;
    for (double a : alpha.value().values()) {
      CHECK(a > 0.0);
      total += a;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    auto plain = battn::plain_alpha(tape, h, ch.attn.channels[0]);
    total = 0.0;
    for (double a : plain.value().values()) total += a;
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("attention edge cases") {
  Channel ch(3, 2, 5);
  ch.store.get("battn/ch0/Wq").value.fill(0.0);
  tensor::Tape tape;
  std::vector<double> s{0.2, 0.4, -0.1, 0.9};
  auto h = seqenc::lstm_channel_forward(tape, s, ch.lstm);
  auto betas = battn::harmonic_weights(tape, battn::trade_off(tape, ch.attn), battn::decay_row(4),
                                       battn::significance_row(s));
  auto alpha = battn::battn_alpha(tape, h, betas, ch.attn.channels[0], 1.0);
  for (double a : alpha.value().values()) CHECK(a == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<double> one{0.7};
  auto h1 = seqenc::lstm_channel_forward(tape, one, ch.lstm);
  auto b1 = battn::harmonic_weights(tape, battn::trade_off(tape, ch.attn), battn::decay_row(1),
                                    battn::significance_row(one));
  CHECK(battn::battn_alpha(tape, h1, b1, ch.attn.channels[0], 1.0).value() == Tensor::matrix(1, 1, {1.0}));
}

TEST_CASE("saturated scores stay finite") {
  for (double target : {50.0, -50.0}) {
    tensor::ParamStore store;
    battn::register_params(store, 1, 1, 1, true, 0);
    auto attn = battn::bind(store, 1, true, 1.0);
    store.get("battn/ch0/Wq").value.fill(1.0);
    store.get("battn/ch0/Wk").value.fill(target);
    tensor::Tape tape;
    Tensor states = Tensor::matrix(1, 3, {1.0, 1.0, 1.0});
    seqenc::HiddenSeq h{tape.constant(states), tape.constant(Tensor::matrix(1, 1, {1.0}))};
    auto betas = tape.constant(Tensor::matrix(1, 3, {0.5, 0.7, 1.0}));
    auto alpha = battn::battn_alpha(tape, h, betas, attn.channels[0], 1.0);
    CHECK(alpha.value().all_finite());
    auto scores = tensor::matmul(tensor::transpose(tensor::matmul(tape.param(*attn.channels[0].w_query), h.last)),
                                 tensor::matmul(tape.param(*attn.channels[0].w_key), h.states));
    CHECK(scores.value()[0] == target);
  }
}

TEST_CASE("channel representation") {
  tensor::Tape tape;
  Tensor states = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  seqenc::HiddenSeq h{tape.constant(states), tape.constant(Tensor::matrix(2, 1, {3, 6}))};
  auto last = battn::channel_represent(h, tape.constant(Tensor::matrix(1, 3, {0, 0, 1})));
  CHECK(last.value() == Tensor::matrix(2, 1, {3, 6}));

  Tensor same = Tensor::from_rows({{0.3, 0.3, 0.3}, {-1, -1, -1}});
  seqenc::HiddenSeq hs{tape.constant(same), tape.constant(Tensor::matrix(2, 1, {0.3, -1}))};
  auto u = battn::channel_represent(hs, tape.constant(Tensor::matrix(1, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3})));
  CHECK(u.value()[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(u.value()[1] == doctest::Approx(-1.0).epsilon(1e-15));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor st = support::random_tensor({3, 5}, rng);
    Tensor a = tensor::softmax(support::random_tensor({1, 5}, rng, -3, 3), 1);
    seqenc::HiddenSeq hh{tape.constant(st), tape.constant(Tensor({3, 1}))};
    auto e = battn::channel_represent(hh, tape.constant(a));
    for (std::size_t i = 0; i < 3; ++i) {
      double lo = st.at(i, 0), hi = st.at(i, 0);
      for (std::size_t t = 1; t < 5; ++t) {
        lo = std::min(lo, st.at(i, t));
        hi = std::max(hi, st.at(i, t));
      }
      CHECK(e.value()[i] >= lo - 1e-15);
      CHECK(e.value()[i] <= hi + 1e-15);
    }
  }
}

TEST_CASE("alpha is invariant to shifting theta") {
  std::mt19937_64 rng(9);
  Tensor theta = support::random_tensor({1, 6}, rng);
  Tensor shifted = theta;
  for (auto& v : shifted.data()) v += 0.37;
  Tensor a = tensor::softmax(theta, 1), b = tensor::softmax(shifted, 1);
  for (std::size_t i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("gradients match central differences") {
  Channel ch(4, 2, 11);
  for (auto& v : ch.store.get("battn/ch0/Wq").value.data()) v *= 4.0;
  std::vector<double> s{0.4, -1.3, 0.8, 1.9, -0.2};
  auto f = [&](tensor::Tape& tape) {
    auto h = seqenc::lstm_channel_forward(tape, s, ch.lstm);
    auto betas = battn::harmonic_weights(tape, battn::trade_off(tape, ch.attn), battn::decay_row(5),
                                         battn::significance_row(s));
    auto alpha = battn::battn_alpha(tape, h, betas, ch.attn.channels[0], 1.0);
    auto e = battn::channel_represent(h, alpha);
    return tensor::sum(tensor::mul(e, tape.constant(Tensor::matrix(4, 1, {1.0, -2.0, 0.5, 3.0}))));
  };
  auto ps = ch.store.all();
  auto report = tensor::grad_check(f, ps);
  CHECK(report.checked > 0);
  CHECK(report.max_rel_error < 1e-6);
}
