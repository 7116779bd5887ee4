#include <doctest.h>

#include "motionfc/preprocess.hpp"
#include "motionfc/synth.hpp"
#include "support.hpp"

using namespace motionfc;

namespace {

SkeletonSpec two_joint_skeleton() {
  SkeletonSpec sk;
  sk.joint_names = {"neck", "hand"};
  sk.neck_index = 0;
  return sk;
}

PreprocessConfig unit_scale() {
  PreprocessConfig c;
  c.scale = 1.0;
  return c;
}

}  // namespace

TEST_CASE("centering on the first-frame neck") {
  PoseSequence s(2, 2, 2);
  s.at(0, 0, 0) = 3; s.at(0, 0, 1) = 4;
  s.at(0, 1, 0) = 7; s.at(0, 1, 1) = 1;
  s.at(1, 0, 0) = 3.5; s.at(1, 0, 1) = 4;
  const auto c = center_and_scale(s, two_joint_skeleton(), unit_scale());
  CHECK(c.sequence.at(0, 0, 0) == 0.0);
  CHECK(c.sequence.at(0, 0, 1) == 0.0);
  CHECK(c.sequence.at(0, 1, 0) == 4.0);
  CHECK(c.sequence.at(0, 1, 1) == -3.0);
  CHECK(c.sequence.at(1, 0, 0) == 0.5);
  CHECK_FALSE(c.flagged);
}

TEST_CASE("scale 100 turns meters into centimeters") {
  PoseSequence s(1, 2, 3);
  s.at(0, 1, 2) = 0.25;
  PreprocessConfig c;
  c.scale = 100.0;
  CHECK(center_and_scale(s, two_joint_skeleton(), c).sequence.at(0, 1, 2) == 25.0);
}

TEST_CASE("centering falls back when the neck is hidden") {
  PoseSequence s(3, 2, 2);
  s.at(0, 0, 0) = 100;  // hidden neck value must not be used
  s.visibility(0, 0) = 0;
  s.at(1, 0, 0) = 2; s.at(1, 0, 1) = 2;
  const auto c = center_and_scale(s, two_joint_skeleton(), unit_scale());
  CHECK(c.center_offset(0) == 2.0);
  CHECK_FALSE(c.flagged);

  PoseSequence never(2, 2, 2);
  never.visibility(0, 0) = never.visibility(1, 0) = 0;
  never.at(0, 1, 0) = 2; never.at(1, 1, 0) = 4;
  const auto f = center_and_scale(never, two_joint_skeleton(), unit_scale());
  CHECK(f.flagged);
  CHECK(f.center_offset(0) == 3.0);
}

TEST_CASE("centering is invertible") {
  std::mt19937_64 rng(1);
  const PoseSequence s = testing::random_sequence(16, 13, 3, rng, 3.0);
  PreprocessConfig c;
  c.scale = 100.0;
  const auto cs = center_and_scale(s, synthetic_skeleton(13, std::nullopt), c);
  const PoseSequence back = undo_center(cs.sequence, cs.center_offset, cs.scale);
  for (std::size_t i = 0; i < s.coords().size(); ++i)
    CHECK(std::abs(back.coords()[i] - s.coords()[i]) <= 1e-9 * std::max(1.0, std::abs(s.coords()[i])));
}

TEST_CASE("interpolation of invisible frames") {
  SUBCASE("interior gap") {
    PoseSequence s(4, 1, 1);
    s.at(0, 0, 0) = 2; s.at(3, 0, 0) = 8;
    s.at(1, 0, 0) = -50; s.at(2, 0, 0) = 99;
    s.visibility(1, 0) = s.visibility(2, 0) = 0;
    const auto r = interpolate_invisible(s);
    CHECK(r.sequence.at(1, 0, 0) == 4.0);
    CHECK(r.sequence.at(2, 0, 0) == 6.0);
    CHECK(r.sequence.visibility(1, 0) == 0);  // flags unchanged
  }
  SUBCASE("leading gap repeats the first visible frame") {
    PoseSequence s(4, 1, 1);
    s.at(2, 0, 0) = 5; s.at(3, 0, 0) = 7;
    s.visibility(0, 0) = s.visibility(1, 0) = 0;
    const auto r = interpolate_invisible(s);
    CHECK(r.sequence.at(0, 0, 0) == 5.0);
    CHECK(r.sequence.at(1, 0, 0) == 5.0);
    CHECK(r.sequence.at(3, 0, 0) == 7.0);
  }
  SUBCASE("fully visible is the identity") {
    std::mt19937_64 rng(2);
    const PoseSequence s = testing::random_sequence(10, 3, 2, rng);
    CHECK(interpolate_invisible(s).sequence == s);
  }
  SUBCASE("never-visible joints are reported and untouched") {
    PoseSequence s(3, 2, 2);
    s.at(1, 1, 0) = 9;
    for (std::size_t f = 0; f < 3; ++f) s.visibility(f, 1) = 0;
    const auto r = interpolate_invisible(s);
    CHECK(r.never_visible == std::vector<std::size_t>{1});
    CHECK(r.sequence.at(1, 1, 0) == 9.0);
  }
}

TEST_CASE("visibility padding repeats the last frame") {
  CHECK(pad_visibility({1, 0, 1}, 2) == std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1});
  PoseSequence in(3, 2, 2), out(4, 2, 2);
  in.visibility(2, 1) = 0;
  apply_visibility_padding(out, in);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(out.visibility(t, 0) == 1);
    CHECK(out.visibility(t, 1) == 0);
  }
}

TEST_CASE("boundary filter") {
  PoseSequence s(1, 3, 2);
  s.at(0, 0, 0) = 105; s.at(0, 0, 1) = 50;
  s.at(0, 1, 0) = 99.9; s.at(0, 1, 1) = 0;
  s.at(0, 2, 0) = 50; s.at(0, 2, 1) = -0.1;
  const auto out = boundary_filter(s, {100, 100});
  CHECK(out.visibility(0, 0) == 0);
  CHECK(out.visibility(0, 1) == 1);
  CHECK(out.visibility(0, 2) == 0);
  CHECK(out.at(0, 0, 0) == 105.0);
  CHECK_THROWS_AS(boundary_filter(PoseSequence(1, 1, 3), {100, 100}), ValidationError);
}

TEST_CASE("windows from concatenated videos") {
  SynthSpec spec;
  spec.num_sequences = 2;
  spec.frames = 30;
  std::mt19937_64 rng(0);
  WindowSpec w;

  spec.sequences_per_video = 1;
  CHECK(extend_and_window(generate_dataset(spec), w, rng).size() == 2);
  spec.sequences_per_video = 2;
  const Dataset joined = generate_dataset(spec);
  const auto windows = extend_and_window(joined, w, rng);
  CHECK(windows.size() == 31);
  // The window starting at frame 10 spans the seam between the two pieces.
  CHECK(windows[10].input.position(0, 3) == joined.sequences[0].position(10, 3));
  CHECK(windows[10].target.position(13, 3) == joined.sequences[1].position(9, 3));

  // Evaluation windows never cross sequence boundaries.
  CHECK(evaluation_windows(joined, w).size() == 2);

  spec.frames = 20;
  spec.sequences_per_video = 1;
  CHECK(extend_and_window(generate_dataset(spec), w, rng).empty());
}

TEST_CASE("random window starts stay in range") {
  SynthSpec spec;
  spec.num_sequences = 3;
  spec.frames = 40;
  spec.sequences_per_video = 3;
  const Dataset d = generate_dataset(spec);
  WindowSpec w;
  w.random_start = true;
  std::mt19937_64 rng(4);
  const auto windows = extend_and_window(d, w, rng);
  CHECK(windows.size() == 91);
  for (const auto& s : windows) CHECK(s.start_frame + 30 <= 120);
}

TEST_CASE("reversal") {
  MotionSample m;
  m.input = PoseSequence(2, 1, 1);
  m.target = PoseSequence(1, 1, 1);
  m.input.at(0, 0, 0) = 1; m.input.at(1, 0, 0) = 2; m.target.at(0, 0, 0) = 3;
  const auto r = reverse_augment(m);
  CHECK(r.input.at(0, 0, 0) == 3.0);
  CHECK(r.input.at(1, 0, 0) == 2.0);
  CHECK(r.target.at(0, 0, 0) == 1.0);

  std::mt19937_64 rng(5);
  MotionSample big;
  big.input = testing::random_sequence(16, 4, 2, rng);
  big.target = testing::random_sequence(14, 4, 2, rng);
  big.input.visibility(5, 1) = 0;
  const auto twice = reverse_augment(reverse_augment(big));
  CHECK(twice.input == big.input);
  CHECK(twice.target == big.target);
}

TEST_CASE("flip") {
  SkeletonSpec sk;
  sk.joint_names = {"neck", "l", "r"};
  sk.left_right_swap = {{1, 2}};
  MotionSample m;
  m.input = PoseSequence(1, 3, 3);
  m.target = PoseSequence(1, 3, 3);
  m.input.at(0, 0, 0) = 1; m.input.at(0, 0, 1) = 2; m.input.at(0, 0, 2) = 3;
  m.input.at(0, 1, 0) = 0.5;
  m.input.at(0, 2, 0) = -0.7;
  m.input.visibility(0, 1) = 0;
  const auto f = flip_augment(m, sk, 0);
  CHECK(f.input.at(0, 0, 0) == -1.0);
  CHECK(f.input.at(0, 0, 1) == 2.0);
  CHECK(f.input.at(0, 0, 2) == 3.0);
  CHECK(f.input.at(0, 1, 0) == 0.7);
  CHECK(f.input.at(0, 2, 0) == -0.5);
  CHECK(f.input.visibility(0, 2) == 0);
  CHECK(f.input.visibility(0, 1) == 1);
  const auto ff = flip_augment(f, sk, 0);
  CHECK(ff.input == m.input);
  CHECK_THROWS_AS(flip_augment(m, sk, 3), ValidationError);
}

TEST_CASE("flipping a mirror-symmetric pose only relabels joints") {
  SkeletonSpec sk = synthetic_skeleton(13, std::nullopt);
  MotionSample m;
  m.input = PoseSequence(1, 13, 3);
  m.target = PoseSequence(1, 13, 3);
  for (auto [a, b] : sk.left_right_swap) {
    m.input.at(0, a, 0) = 0.3 * static_cast<double>(a);
    m.input.at(0, b, 0) = -0.3 * static_cast<double>(a);
    m.input.at(0, a, 1) = m.input.at(0, b, 1) = static_cast<double>(a);
  }
  SkeletonSpec no_swap = sk;
  no_swap.left_right_swap.clear();
  const auto f = flip_augment(m, no_swap, 0);
  for (auto [a, b] : sk.left_right_swap) {
    CHECK(f.input.position(0, a) == m.input.position(0, b));
    CHECK(f.input.position(0, b) == m.input.position(0, a));
  }
  CHECK(flip_augment(m, sk, 0).input == m.input);
}

TEST_CASE("normalize and denormalize") {
  std::mt19937_64 rng(6);
  MotionSample m;
  m.input = testing::random_sequence(16, 13, 3, rng);
  m.target = testing::random_sequence(14, 13, 3, rng);
  m.center_offset = Vector::Zero(3);
  PreprocessConfig c;
  c.scale = 100.0;
  const auto n = normalize_sample(m, synthetic_skeleton(13, std::nullopt), c);
  CHECK(n.input.position(0, 0).norm() == 0.0);
  const PoseSequence back = denormalize(n.target, n);
  for (std::size_t i = 0; i < back.coords().size(); ++i)
    CHECK(back.coords()[i] == doctest::Approx(m.target.coords()[i]).epsilon(1e-12));
}
