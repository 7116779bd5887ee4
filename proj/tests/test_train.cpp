#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace motionfc;

namespace {

Dataset small_data(std::uint64_t seed, std::size_t sequences = 6) {
  SynthSpec spec;
  spec.num_sequences = sequences;
  spec.frames = 36;
  spec.seed = seed;
  return generate_dataset(spec);
}

TrainConfig small_config() {
  TrainConfig c = TrainConfig::defaults_for(13, 3);
  c.model.num_blocks = 1;
  c.model.hidden_channels = 16;
  c.epochs = 3;
  c.batch_size = 8;
  return c;
}

std::vector<double> epoch_losses(const TrainReport& r) {
  std::vector<double> out;
  for (const auto& e : r.epochs) out.push_back(e.loss);
  return out;
}

}  // namespace

TEST_CASE("smooth l1") {
  CHECK(smooth_l1(0.5, 0.0, 1.0) == doctest::Approx(0.125));
  CHECK(smooth_l1(-3.0, 0.0, 1.0) == doctest::Approx(2.5));
  CHECK(smooth_l1(2.0, 2.0, 1.0) == 0.0);
  CHECK(smooth_l1(1.0, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(smooth_l1_grad(0.5, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(smooth_l1_grad(-4.0, 0.0, 1.0) == -1.0);
  CHECK(smooth_l1(0.2, 0.0, 0.5) == doctest::Approx(0.04));
}

TEST_CASE("joint losses average over active visible frames") {
  PoseSequence pred(3, 2, 2), target(3, 2, 2);
  pred.at(0, 0, 0) = 0.5;   // 0.125
  pred.at(1, 0, 1) = 3.0;   // 2.5
  pred.at(2, 1, 0) = 10.0;  // masked out below
  target.visibility(1, 1) = 0;
  const auto l = joint_losses(pred, target, {1, 1, 0});
  REQUIRE(l.size() == 2);
  CHECK(l[0] == doctest::Approx((0.125 + 2.5) / 4.0));
  CHECK(l[1] == 0.0);

  target.visibility(0, 0) = 0;
  CHECK(joint_losses(pred, target, {1, 1, 0})[0] == doctest::Approx(2.5 / 2.0));
  CHECK_THROWS_AS(joint_losses(pred, target, {0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(joint_losses(pred, target, {1, 1}), ValidationError);
}

TEST_CASE("ohkm selects the hardest joints") {
  const std::vector<double> l{0.1, 0.9, 0.4, 0.9, 0.2};
  CHECK(ohkm(l, 2) == doctest::Approx(0.9));
  CHECK(ohkm_select(l, 3) == std::vector<std::size_t>{1, 3, 2});
  CHECK(ohkm(l, 5) == doctest::Approx((0.1 + 0.9 + 0.4 + 0.9 + 0.2) / 5.0));
  CHECK(ohkm_select({0.3, 0.3, 0.3}, 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(ohkm(l, 0), ValidationError);
  CHECK_THROWS_AS(ohkm(l, 6), ValidationError);
}

TEST_CASE("ohkm agrees with a full sort on random inputs") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 20), level(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> l(static_cast<std::size_t>(size(rng)));
    // Coarse levels make ties common.
    for (auto& x : l) x = 0.25 * level(rng);
    std::uniform_int_distribution<std::size_t> kd(1, l.size());
    const std::size_t k = kd(rng);
    CHECK(ohkm(l, k) == doctest::Approx(testing::sorted_ohkm(l, k)).epsilon(1e-15));
    const auto sel = ohkm_select(l, k);
    double smallest_kept = l[sel.back()];
    for (std::size_t i = 0; i < l.size(); ++i)
      if (std::find(sel.begin(), sel.end(), i) == sel.end()) CHECK(l[i] <= smallest_kept);
  }
}

TEST_CASE("curriculum mask") {
  CurriculumConfig c;
  auto m = curriculum_mask(0, 3, 4, c);
  CHECK(m == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0, 0});
  CHECK(curriculum_mask(2, 3, 4, c) == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0});
  CHECK(curriculum_mask(5, 3, 4, c) == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0});
  CHECK(curriculum_mask(8, 3, 4, c) == std::vector<std::uint8_t>(7, 1));
  c.enabled = false;
  CHECK(curriculum_mask(0, 3, 4, c) == std::vector<std::uint8_t>(7, 1));

  m = std::vector<std::uint8_t>(7, 1);
  restrict_to_short_term(m, 3, 2);
  CHECK(m == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0});
  // Active forecast frames are monotone in the epoch.
  c.enabled = true;
  std::size_t prev = 0;
  for (std::size_t e = 0; e < 40; ++e) {
    const auto mk = curriculum_mask(e, 16, 14, c);
    const auto active = static_cast<std::size_t>(std::count(mk.begin(), mk.end(), 1));
    CHECK(active >= prev);
    prev = active;
  }
  CHECK(prev == 30);
}

TEST_CASE("learning rate decays per epoch") {
  OptimizerConfig c;
  CHECK(learning_rate(0, c) == doctest::Approx(1e-3));
  CHECK(learning_rate(3, c) == doctest::Approx(1e-3 * 0.95 * 0.95 * 0.95));
}

TEST_CASE("adam") {
  OptimizerConfig cfg;
  SUBCASE("zero gradients leave parameters unchanged") {
    Matrix w = Matrix::Constant(2, 2, 0.7);
    Matrix* p[] = {&w};
    OptimizerState s;
    adam_step(p, Gradients{Matrix::Zero(2, 2)}, s, 0.1, cfg);
    CHECK(w == Matrix::Constant(2, 2, 0.7));
  }
  SUBCASE("minimizes a quadratic") {
    Matrix w = Matrix::Constant(1, 1, 1.0);
    Matrix* p[] = {&w};
    OptimizerState s;
    for (int i = 0; i < 200; ++i) adam_step(p, Gradients{2.0 * w}, s, 0.1, cfg);
    CHECK(std::abs(w(0)) < 1e-3);
  }
  SUBCASE("first step moves by the learning rate") {
    Matrix w = Matrix::Constant(1, 1, 1.0);
    Matrix* p[] = {&w};
    OptimizerState s;
    adam_step(p, Gradients{Matrix::Constant(1, 1, 5.0)}, s, 0.01, cfg);
    CHECK(w(0) == doctest::Approx(0.99).epsilon(1e-6));
  }
  SUBCASE("non-finite gradient") {
    Matrix w = Matrix::Zero(1, 1);
    Matrix* p[] = {&w};
    OptimizerState s;
    CHECK_THROWS_AS(adam_step(p, Gradients{Matrix::Constant(1, 1, NAN)}, s, 0.1, cfg),
                    DivergenceError);
  }
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.loss.ohkm_k = 14;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.short_term_frames = 15;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.optimizer.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset data = small_data(1);
  const TrainConfig cfg = small_config();
  const auto a = train(data, cfg, 42);
  const auto b = train(data, cfg, 42);
  const auto c = train(data, cfg, 43);
  CHECK(epoch_losses(a.report) == epoch_losses(b.report));
  CHECK(epoch_losses(a.report) != epoch_losses(c.report));
  const auto pa = a.forecaster.model.parameters();
  const auto pb = b.forecaster.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
}

TEST_CASE("curriculum changes the mask but not the batch order") {
  const Dataset data = small_data(2);
  TrainConfig on = small_config();
  TrainConfig off = on;
  off.curriculum.enabled = false;
  std::vector<std::vector<std::size_t>> order_on, order_off;
  TrainHooks h_on, h_off;
  h_on.on_batch = [&](std::size_t, std::span<const std::size_t> b) {
    order_on.emplace_back(b.begin(), b.end());
  };
  h_off.on_batch = [&](std::size_t, std::span<const std::size_t> b) {
    order_off.emplace_back(b.begin(), b.end());
  };
  const auto a = train(data, on, 7, nullptr, h_on);
  const auto b = train(data, off, 7, nullptr, h_off);
  CHECK(!order_on.empty());
  CHECK(order_on == order_off);
  CHECK(a.report.epochs[0].active_frames == 16);
  CHECK(b.report.epochs[0].active_frames == 30);
  CHECK(a.report.epochs[0].loss != b.report.epochs[0].loss);
}

TEST_CASE("short-term training with k equal to the horizon is ordinary training") {
  const Dataset data = small_data(3);
  const TrainConfig cfg = small_config();
  const auto a = train(data, cfg, 9);
  const auto b = train_short_term(data, cfg, 9, 14);
  CHECK(epoch_losses(a.report) == epoch_losses(b.report));
  CHECK_THROWS_AS(train_short_term(data, cfg, 9, 0), ValidationError);
}

TEST_CASE("report records every epoch and the best validation epoch") {
  const Dataset data = small_data(4);
  const Dataset val = small_data(5, 2);
  TrainConfig cfg = small_config();
  cfg.epochs = 4;
  const auto r = train(data, cfg, 11, &val);
  REQUIRE(r.report.epochs.size() == 4);
  double best = INFINITY;
  std::size_t best_epoch = 0;
  for (const auto& e : r.report.epochs) {
    REQUIRE(e.val_metric.has_value());
    if (*e.val_metric < best) {
      best = *e.val_metric;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.report.best_epoch == best_epoch);
  CHECK(r.report.epochs[1].learning_rate ==
        doctest::Approx(cfg.optimizer.learning_rate * cfg.optimizer.decay));
  const MetricReport v = validate_forecaster(r.forecaster, val, cfg.metric, cfg.eval_stride);
  CHECK(v.average == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.report.to_csv().find("epoch") == 0);
}

TEST_CASE("training loss decreases on a small problem") {
  const Dataset data = small_data(6, 12);
  TrainConfig cfg = small_config();
  cfg.curriculum.enabled = false;
  cfg.epochs = 8;
  const auto r = train(data, cfg, 1);
  CHECK(r.report.epochs.back().loss < r.report.epochs.front().loss);
}

TEST_CASE("mismatched dataset shape is rejected") {
  TrainConfig cfg = small_config();
  cfg.model.joints = 12;
  CHECK_THROWS_AS(train(small_data(7), cfg, 1), ValidationError);
}
