#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "motionfc/core.hpp"
#include "support.hpp"

using namespace motionfc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "motionfc_unit";
  fs::create_directories(dir);
  return dir / name;
}

Dataset one_sequence_dataset() {
  Dataset ds;
  ds.skeleton = synthetic_skeleton(13, std::nullopt);
  ds.dims = 3;
  ds.frame_interval_ms = 64.3;
  std::mt19937_64 rng(2);
  PoseSequence s = testing::random_sequence(30, 13, 3, rng);
  s.frame_interval_ms = 64.3;
  s.sequence_id = "a";
  s.video_id = "v";
  ds.sequences.push_back(s);
  return ds;
}

void write(const fs::path& p, const std::string& body) {
  std::ofstream(p) << body;
}

}  // namespace

TEST_CASE("pose sequence slicing and concatenation") {
  std::mt19937_64 rng(1);
  const PoseSequence s = testing::random_sequence(10, 3, 2, rng);
  const PoseSequence head = s.slice(0, 4), tail = s.slice(4, 6);
  CHECK(head.frames() == 4);
  CHECK(head.concat(tail) == s);
  CHECK_THROWS_AS(s.slice(8, 3), ValidationError);
}

TEST_CASE("3D sequences must be fully visible") {
  PoseSequence s(2, 2, 3);
  s.validate();
  s.visibility(1, 1) = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("dataset load of a minimal file") {
  const Dataset ds = one_sequence_dataset();
  const auto path = scratch("one.jsonl");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  REQUIRE(back.sequences.size() == 1);
  CHECK(back.sequences[0].frames() == 30);
  CHECK(back.skeleton.joints() == 13);
  for (auto v : back.sequences[0].visibility()) CHECK(v == 1);
}

TEST_CASE("dataset round trip is bit-identical") {
  const Dataset ds = one_sequence_dataset();
  const auto path = scratch("roundtrip.jsonl");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
}

TEST_CASE("empty dataset writes only the header") {
  Dataset ds = one_sequence_dataset();
  ds.sequences.clear();
  const auto path = scratch("empty.jsonl");
  save_dataset(ds, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1);
  CHECK(load_dataset(path).sequences.empty());
}

TEST_CASE("non-finite coordinates are refused on write") {
  Dataset ds = one_sequence_dataset();
  ds.sequences[0].at(3, 2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_dataset(ds, scratch("nan.jsonl")), ValidationError);
}

TEST_CASE("bad visibility value names the line") {
  const auto path = scratch("badvis.jsonl");
  write(path,
        R"({"joints":["a","b"],"neck_index":0,"dims":2,"frame_interval_ms":40})"
        "\n"
        R"({"sequence_id":"s","video_id":"v","frames":[[[0,0],[1,1]]],"visibility":[[1,1]]})"
        "\n"
        R"({"sequence_id":"t","video_id":"v","frames":[[[0,0],[1,1]]],"visibility":[[1,2]]})"
        "\n");
  try {
    load_dataset(path);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("visibility") != std::string::npos);
  }
}

TEST_CASE("malformed records are rejected") {
  const std::string header =
      R"({"joints":["a","b"],"neck_index":0,"dims":2,"frame_interval_ms":40})"
      "\n";
  SUBCASE("wrong joint count") {
    write(scratch("bad.jsonl"),
          header + R"({"sequence_id":"s","video_id":"v","frames":[[[0,0]]],"visibility":[[1]]})");
    CHECK_THROWS_AS(load_dataset(scratch("bad.jsonl")), ValidationError);
  }
  SUBCASE("not JSON") {
    write(scratch("bad.jsonl"), header + "{oops\n");
    CHECK_THROWS_AS(load_dataset(scratch("bad.jsonl")), ValidationError);
  }
  SUBCASE("neck out of range") {
    write(scratch("bad.jsonl"),
          R"({"joints":["a"],"neck_index":4,"dims":2,"frame_interval_ms":40})");
    CHECK_THROWS_AS(load_dataset(scratch("bad.jsonl")), ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(scratch("does_not_exist.jsonl")), ValidationError);
  }
}

TEST_CASE("prediction files round trip") {
  PredictionSet ps;
  ps.skeleton = synthetic_skeleton(13, std::make_pair(1280.0, 720.0));
  ps.dims = 2;
  ps.frame_interval_ms = 40.0;
  std::mt19937_64 rng(5);
  Prediction p;
  p.forecast = testing::random_sequence(14, 13, 2, rng);
  p.forecast.visibility(2, 3) = 0;
  p.forecast.sequence_id = "x";
  p.source_input_id = "x";
  p.forecast_start = 16;
  ps.predictions.push_back(p);
  const auto path = scratch("pred.jsonl");
  save_predictions(ps, path);
  const PredictionSet back = load_predictions(path);
  CHECK(back.skeleton == ps.skeleton);
  REQUIRE(back.predictions.size() == 1);
  CHECK(back.predictions[0] == p);
}
