#include <doctest.h>

#include <set>

#include "lymebench/augment.hpp"
#include "lymebench/manifest.hpp"
#include "helpers.hpp"

using namespace lymebench;
using testutil::fresh_dir;

TEST_CASE("the standard recipe pins seven op families at probability 0.5") {
  const AugmentationSpec spec = standard_augmentation_spec();
  CHECK(spec.ops.size() == 7);
  for (const auto& op : spec.ops) CHECK(op.probability == 0.5);
  CHECK(spec.expansion_factor == 20);
  std::set<AugKind> kinds;
  for (const auto& op : spec.ops) {
    kinds.insert(op.kind);
    if (op.kind == AugKind::SmallRotation) CHECK(op.max_deg == 5.0);
    if (op.kind == AugKind::Brightness || op.kind == AugKind::Contrast ||
        op.kind == AugKind::Saturation) {
      CHECK(op.min_f == 0.7);
      CHECK(op.max_f == 1.3);
    }
  }
  CHECK(kinds.size() == 7);
  spec.validate();
}

TEST_CASE("spec validation rejects bad probabilities and factor ranges") {
  AugmentationSpec spec = standard_augmentation_spec();
  spec.ops[0].probability = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = standard_augmentation_spec();
  spec.ops[3].min_f = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = standard_augmentation_spec();
  spec.expansion_factor = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("probability zero passes pixels through untouched") {
  AugmentationSpec spec = standard_augmentation_spec();
  for (auto& op : spec.ops) op.probability = 0.0;
  const Image img = testutil::noise_image(20, 30, 4);
  Rng rng(9);
  const ApplyResult r = apply_once(img, spec, rng);
  CHECK(r.ops_applied.empty());
  REQUIRE(r.image.px.size() == img.px.size());
  CHECK(r.image.px == img.px);
}

TEST_CASE("horizontal flip is an involution") {
  const Image img = testutil::noise_image(17, 11, 8);
  const Image twice = flip_horizontal(flip_horizontal(img));
  CHECK(twice.px == img.px);
  const Image vtwice = flip_vertical(flip_vertical(img));
  CHECK(vtwice.px == img.px);
}

TEST_CASE("brightness matches the per-pixel oracle at factor 1.3") {
  const Image img = testutil::solid_image(8, 8, 128, 128, 128);
  const Image out = adjust_brightness(img, 1.3);
  for (uint8_t v : out.px) CHECK(int(v) == int(std::min(255.0, 128 * 1.3 + 0.5)));

  // clamping at the top of the range
  const Image bright = testutil::solid_image(4, 4, 250, 250, 250);
  for (uint8_t v : adjust_brightness(bright, 1.3).px) CHECK(int(v) == 255);
}

TEST_CASE("contrast and saturation match their closed forms") {
  Image img(2, 1);
  img.at(0, 0, 0) = 100; img.at(0, 0, 1) = 150; img.at(0, 0, 2) = 200;
  img.at(0, 1, 0) = 50;  img.at(0, 1, 1) = 60;  img.at(0, 1, 2) = 70;

  const double luma0 = 0.299 * 100 + 0.587 * 150 + 0.114 * 200;
  const double luma1 = 0.299 * 50 + 0.587 * 60 + 0.114 * 70;
  const double mean = (luma0 + luma1) / 2.0;
  const Image c = adjust_contrast(img, 0.8);
  CHECK(int(c.at(0, 0, 0)) == int(std::clamp(mean + 0.8 * (100 - mean) + 0.5, 0.0, 255.0)));
  CHECK(int(c.at(0, 1, 2)) == int(std::clamp(mean + 0.8 * (70 - mean) + 0.5, 0.0, 255.0)));

  const Image s = adjust_saturation(img, 1.2);
  CHECK(int(s.at(0, 0, 1)) == int(std::clamp(luma0 + 1.2 * (150 - luma0) + 0.5, 0.0, 255.0)));
}

TEST_CASE("right-angle rotations permute pixels exactly and 90+270 compose to identity") {
  const Image img = testutil::noise_image(9, 13, 21);
  const Image r90 = rotate_right_angle(img, 90);
  CHECK(r90.width == img.height);
  CHECK(r90.height == img.width);
  const Image back = rotate_right_angle(r90, 270);
  CHECK(back.px == img.px);
  const Image r180 = rotate_right_angle(rotate_right_angle(img, 180), 180);
  CHECK(r180.px == img.px);
}

TEST_CASE("small rotations keep the canvas size") {
  const Image img = testutil::noise_image(24, 18, 3);
  const Image rot = rotate_small(img, 4.2);
  CHECK(rot.width == img.width);
  CHECK(rot.height == img.height);
}

TEST_CASE("perspective skew keeps dimensions and zero shift is near-identity") {
  const Image img = testutil::gradient_image(16, 16);
  std::array<std::pair<double, double>, 4> zero{};
  const Image same = perspective_skew(img, zero);
  CHECK(same.width == img.width);
  int max_diff = 0;
  for (size_t i = 0; i < img.px.size(); ++i)
    max_diff = std::max(max_diff, std::abs(int(same.px[i]) - int(img.px[i])));
  CHECK(max_diff <= 1);  // identity homography up to rounding
}

TEST_CASE("factor draws always land inside the configured range") {
  AugmentationSpec spec = standard_augmentation_spec();
  for (auto& op : spec.ops) op.probability = 1.0;  // force every op
  const Image img = testutil::noise_image(16, 16, 12);
  for (uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const ApplyResult r = apply_once(img, spec, rng);
    for (const auto& kv : split(r.ops_applied, ';')) {
      const auto eq = kv.find('=');
      REQUIRE(eq != std::string::npos);
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      if (key == "brightness" || key == "contrast" || key == "saturation") {
        const double f = std::stod(value);
        CHECK(f >= 0.7);
        CHECK(f <= 1.3);
      } else if (key == "small_rotation") {
        CHECK(std::abs(std::stod(value)) <= 5.0);
      } else if (key == "right_angle_rotation") {
        const int deg = std::stoi(value);
        CHECK((deg == 90 || deg == 180 || deg == 270));
      }
    }
  }
}

TEST_CASE("expand produces exactly factor replicas per source with lineage") {
  const auto root = testutil::write_two_class_dataset("expand_basic", 2, 2, 20);
  const Manifest m = ingest_directory(root).manifest;
  AugmentationSpec spec = standard_augmentation_spec();  // factor 20
  const auto out_dir = fresh_dir("expand_basic_out");

  std::vector<std::string> train_ids = {m.records[0].id, m.records[1].id, m.records[2].id};
  const AugmentedSet set = expand(train_ids, m, spec, 11, out_dir);
  CHECK(set.items.size() == 60);
  std::map<std::string, int> per_source;
  for (const auto& item : set.items) {
    ++per_source[item.source_id];
    CHECK(fs::exists(item.out_path));
  }
  for (const auto& id : train_ids) CHECK(per_source[id] == 20);

  write_lineage_csv(out_dir / "lineage.csv", set);
  const AugmentedSet back = read_lineage_csv(out_dir / "lineage.csv");
  REQUIRE(back.items.size() == set.items.size());
  CHECK(back.items[5].source_id == set.items[5].source_id);
  CHECK(back.items[5].replica == set.items[5].replica);
  CHECK(back.items[5].ops_applied == set.items[5].ops_applied);

  // scope: every output belongs to a requested train id
  std::set<std::string> requested(train_ids.begin(), train_ids.end());
  for (const auto& item : set.items) CHECK(requested.count(item.source_id) == 1);
}

TEST_CASE("expand of an empty id list is empty and missing ids are fatal") {
  const auto root = testutil::write_two_class_dataset("expand_empty", 1, 1, 12);
  const Manifest m = ingest_directory(root).manifest;
  const auto out_dir = fresh_dir("expand_empty_out");
  CHECK(expand({}, m, standard_augmentation_spec(), 1, out_dir).items.empty());
  CHECK_THROWS_WITH_AS(expand({"nope"}, m, standard_augmentation_spec(), 1, out_dir),
                       doctest::Contains("nope"), Error);
}

TEST_CASE("a fixed seed reproduces byte-identical replica sets") {
  const auto root = testutil::write_two_class_dataset("expand_det", 2, 1, 16);
  const Manifest m = ingest_directory(root).manifest;
  AugmentationSpec spec = standard_augmentation_spec();
  spec.expansion_factor = 4;

  const auto dir_a = fresh_dir("expand_det_a");
  const auto dir_b = fresh_dir("expand_det_b");
  std::vector<std::string> ids = {m.records[0].id, m.records[1].id};
  const AugmentedSet a = expand(ids, m, spec, 99, dir_a);
  const AugmentedSet b = expand(ids, m, spec, 99, dir_b);
  REQUIRE(a.items.size() == b.items.size());
  for (size_t i = 0; i < a.items.size(); ++i) {
    CHECK(read_text_file(a.items[i].out_path) == read_text_file(b.items[i].out_path));
    CHECK(a.items[i].ops_applied == b.items[i].ops_applied);
  }
  // a different seed changes at least one replica
  const auto dir_c = fresh_dir("expand_det_c");
  const AugmentedSet c = expand(ids, m, spec, 100, dir_c);
  bool any_diff = false;
  for (size_t i = 0; i < a.items.size(); ++i)
    if (read_text_file(a.items[i].out_path) != read_text_file(c.items[i].out_path))
      any_diff = true;
  CHECK(any_diff);
}
