#include <doctest.h>

#include <filesystem>

#include "support.hpp"

using namespace motionfc;
namespace fs = std::filesystem;

namespace {

Forecaster zero_forecaster(std::size_t dims, InputRepr repr) {
  GcnConfig c;
  c.dims = dims;
  c.num_blocks = 1;
  c.hidden_channels = 8;
  Forecaster f;
  f.model = init_model(c, 3);
  zero_output_path(f.model);
  f.preprocess = PreprocessConfig::defaults_for(dims);
  f.input_repr = repr;
  return f;
}

Forecaster random_forecaster(std::uint64_t seed) {
  GcnConfig c;
  c.num_blocks = 1;
  c.hidden_channels = 8;
  Forecaster f;
  f.model = init_model(c, seed);
  f.preprocess = PreprocessConfig::defaults_for(3);
  f.input_repr = InputRepr::velocity;
  return f;
}

Dataset synth(std::size_t dims, std::size_t sequences, std::uint64_t seed) {
  SynthSpec spec = SynthSpec::defaults_for(dims);
  spec.num_sequences = sequences;
  spec.seed = seed;
  return generate_dataset(spec);
}

}  // namespace

TEST_CASE("fusion splits at the short horizon") {
  std::mt19937_64 rng(51);
  PoseSequence s = testing::random_sequence(14, 3, 3, rng);
  PoseSequence l = testing::random_sequence(14, 3, 3, rng);
  l.visibility(2, 1) = 0;
  l.visibility(9, 1) = 0;

  const PoseSequence f = fuse(s, l, FusionConfig{4});
  for (std::size_t t = 0; t < 14; ++t) {
    const PoseSequence& src = t < 4 ? s : l;
    CHECK(f.position(t, 2) == src.position(t, 2));
    CHECK(f.visibility(t, 1) == src.visibility(t, 1));
  }
  CHECK(fuse(s, l, FusionConfig{14}) == s);
  CHECK(fuse(s, s, FusionConfig{4}) == s);
  CHECK_THROWS_AS(fuse(s, l, FusionConfig{0}), ValidationError);
  CHECK_THROWS_AS(fuse(s, l, FusionConfig{15}), ValidationError);
  CHECK_THROWS_AS(fuse(s, l.slice(0, 13), FusionConfig{4}), ValidationError);
}

TEST_CASE("averaging predictions") {
  std::mt19937_64 rng(52);
  PoseSequence a = testing::random_sequence(2, 2, 2, rng);
  PoseSequence b = testing::random_sequence(2, 2, 2, rng);
  PoseSequence c = testing::random_sequence(2, 2, 2, rng);
  a.visibility(0, 0) = b.visibility(0, 0) = 0;  // 1 of 3 visible
  a.visibility(1, 1) = 0;                       // 2 of 3 visible
  const PoseSequence m = average_predictions({a, b, c});
  CHECK((m.position(1, 0) - (a.position(1, 0) + b.position(1, 0) + c.position(1, 0)) / 3.0)
            .norm() < 1e-15);
  CHECK(m.visibility(0, 0) == 0);
  CHECK(m.visibility(1, 1) == 1);
  // A tie counts as visible.
  CHECK(average_predictions({a, c}).visibility(0, 0) == 1);
  CHECK(average_predictions({a}) == a);
  CHECK_THROWS_AS(average_predictions({}), ValidationError);
}

TEST_CASE("report fusion keeps the best value per offset") {
  MetricReport a, b;
  a.offsets_ms = b.offsets_ms = {100, 500};
  a.values = {1.0, 9.0};
  b.values = {2.0, 5.0};
  const FusedReport f = fuse_reports({{"short", a}, {"long", b}});
  CHECK(f.values == std::vector<double>{1.0, 5.0});
  CHECK(f.provenance == std::vector<std::string>{"short", "long"});
  CHECK(f.average == doctest::Approx(3.0));
  b.offsets_ms = {100, 400};
  CHECK_THROWS_AS(fuse_reports({{"short", a}, {"long", b}}), ValidationError);
}

TEST_CASE("zero network repeats the last observed pose") {
  const Dataset d = synth(3, 1, 53);
  const PoseSequence input = d.sequences[0].slice(3, 16);
  for (auto repr : {InputRepr::position}) {
    const PoseSequence out = run_inference(zero_forecaster(3, repr), input, d.skeleton);
    REQUIRE(out.frames() == 14);
    for (std::size_t t = 0; t < 14; ++t)
      for (std::size_t j = 0; j < 13; ++j)
        CHECK((out.position(t, j) - input.position(15, j)).cwiseAbs().maxCoeff() < 1e-9);
  }
  // Velocity input continues the final step instead.
  const PoseSequence vel = run_inference(zero_forecaster(3, InputRepr::velocity), input, d.skeleton);
  const Vector step = input.position(15, 0) - input.position(14, 0);
  CHECK((vel.position(13, 0) - (input.position(15, 0) + 14.0 * step)).cwiseAbs().maxCoeff() <
        1e-9);
  CHECK_THROWS_AS(run_inference(zero_forecaster(3, InputRepr::position), input.slice(0, 15),
                                d.skeleton),
                  ValidationError);
}

TEST_CASE("2D inference pads visibility and drops out-of-image joints") {
  Dataset d = synth(2, 1, 54);
  d.skeleton.image_bounds = std::pair{100.0, 80.0};
  PoseSequence input(16, 13, 2, 64.3);
  for (std::size_t f = 0; f < 16; ++f)
    for (std::size_t j = 0; j < 13; ++j) {
      input.at(f, j, 0) = 50.0 + static_cast<double>(j);
      input.at(f, j, 1) = 40.0;
    }
  // Joint 3 walks off the right edge; joint 5 is hidden in the last frame.
  for (std::size_t f = 0; f < 16; ++f) input.at(f, 3, 0) = 20.0 + 4.0 * static_cast<double>(f);
  input.visibility(15, 5) = 0;
  Forecaster f = zero_forecaster(2, InputRepr::velocity);
  const PoseSequence out = run_inference(f, input, d.skeleton);
  CHECK(out.visibility(3, 3) == 1);  // x = 96
  CHECK(out.visibility(4, 3) == 0);  // x = 100
  CHECK(out.visibility(13, 3) == 0);
  for (std::size_t t = 0; t < 14; ++t) {
    CHECK(out.visibility(t, 5) == 0);
    CHECK(out.visibility(t, 0) == 1);
  }
  f.preprocess.boundary_filter = false;
  CHECK(run_inference(f, input, d.skeleton).visibility(13, 3) == 1);
}

TEST_CASE("dataset inference is deterministic and keyed by window") {
  const Dataset d = synth(3, 3, 55);
  const Forecaster f = random_forecaster(56);
  const PredictionSet a = predict_dataset(f, d, 5);
  const PredictionSet b = predict_dataset(f, d, 5);
  REQUIRE(a.predictions.size() == b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) CHECK(a.predictions[i] == b.predictions[i]);
  // 30-frame sequences, stride 5: one window each.
  CHECK(a.predictions.size() == 3);
  CHECK(a.predictions[0].forecast_start == 16);
  CHECK(a.predictions[2].source_input_id == d.sequences[2].sequence_id);
  const MetricReport r = evaluate(a, d, MetricConfig{});
  CHECK(r.average > 0.0);
}

TEST_CASE("fused dataset prediction") {
  const Dataset d = synth(3, 2, 57);
  const Forecaster s = random_forecaster(58), l = random_forecaster(59);
  const PredictionSet same = predict_dataset_fused(s, s, {}, d, 1, FusionConfig{4});
  const PredictionSet plain = predict_dataset(s, d, 1);
  REQUIRE(same.predictions.size() == plain.predictions.size());
  for (std::size_t i = 0; i < same.predictions.size(); ++i)
    CHECK(same.predictions[i] == plain.predictions[i]);

  const PredictionSet fused = predict_dataset_fused(s, l, {}, d, 1, FusionConfig{4});
  const PredictionSet long_only = predict_dataset(l, d, 1);
  const auto& p = fused.predictions[0].forecast;
  CHECK(p.position(3, 0) == plain.predictions[0].forecast.position(3, 0));
  CHECK(p.position(4, 0) == long_only.predictions[0].forecast.position(4, 0));

  // Extra models are averaged into the long part.
  const PredictionSet with_extra = predict_dataset_fused(s, l, {l}, d, 1, FusionConfig{4});
  CHECK((with_extra.predictions[0].forecast.position(9, 2) - p.position(9, 2)).norm() < 1e-12);
}

TEST_CASE("forecaster checkpoints keep the pipeline") {
  const fs::path dir = fs::temp_directory_path() / "motionfc_unit_predict";
  fs::create_directories(dir);
  Forecaster f = random_forecaster(60);
  f.preprocess.scale = 50.0;
  f.preprocess.interpolate_invisible = false;
  save_forecaster(f, dir / "f.ckpt");
  const Forecaster g = load_forecaster(dir / "f.ckpt");
  CHECK(g.preprocess.scale == 50.0);
  CHECK_FALSE(g.preprocess.interpolate_invisible);
  CHECK(g.input_repr == InputRepr::velocity);
  const Dataset d = synth(3, 1, 61);
  const PoseSequence in = d.sequences[0].slice(0, 16);
  CHECK(run_inference(f, in, d.skeleton) == run_inference(g, in, d.skeleton));
  CHECK_THROWS_AS(load_forecaster(dir / "missing.ckpt"), ValidationError);
}
