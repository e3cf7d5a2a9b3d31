#include <doctest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "dataset_oracles.hpp"
#include "pacsr/dataset.hpp"
#include "pacsr/distance_transform.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/scene.hpp"
#include "test_util.hpp"

using namespace pacsr;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene(std::uint64_t seed, Background bg = Background::gradient) {
  SceneConfig cfg;
  cfg.height = cfg.width = 64;
  cfg.seed = seed;
  cfg.background = bg;
  return cfg;
}

ShadowMask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
  ShadowMask m({1, h, w});
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.at(0, y, x) = 1.0f;
  return m;
}

bool records_equal(const SampleRecord& a, const SampleRecord& b) {
  if (!(a.shadow_image == b.shadow_image) || !(a.shadow_free_image == b.shadow_free_image)) return false;
  if (a.subjects.size() != b.subjects.size() || a.shadow_blur_sigma != b.shadow_blur_sigma) return false;
  for (std::size_t k = 0; k < a.subjects.size(); ++k) {
    const auto &s = a.subjects[k], &t = b.subjects[k];
    if (!(s.subject_mask == t.subject_mask) || !(s.shadow_mask == t.shadow_mask) || !(s.dot == t.dot) ||
        !(s.line == t.line) || !(s.mask_prompt == t.mask_prompt) || s.darkening != t.darkening)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("dataset_gen") {

TEST_CASE("scene synthesis is deterministic in the seed") {
  for (auto bg : {Background::gradient, Background::noise, Background::flat}) {
    const auto a = synth_scene(small_scene(5, bg)), b = synth_scene(small_scene(5, bg));
    CHECK(records_equal(a, b));
    CHECK_FALSE(records_equal(a, synth_scene(small_scene(6, bg))));
  }
}

TEST_CASE("scene record invariants") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto cfg = small_scene(seed, static_cast<Background>(seed % 3));
    const auto r = synth_scene(cfg);
    CHECK(r.shadow_image.shape() == Shape{3, 64, 64});
    CHECK(r.subjects.size() >= 2);
    CHECK(r.subjects.size() <= 4);
    CHECK(r.shadow_blur_sigma == cfg.shadow_blur_sigma);

    // Union of feathered shadows: outside it nothing changes.
    ShadowMask any({1, 64, 64});
    for (const auto& s : r.subjects) {
      CHECK(s.darkening >= 0.35);
      CHECK(s.darkening <= 0.65);
      const auto f = feather(s.shadow_mask, r.shadow_blur_sigma);
      for (std::size_t i = 0; i < any.size(); ++i) any[i] = std::max(any[i], f[i]);
      // Shadows never cover their own subject.
      for (std::size_t i = 0; i < any.size(); ++i) CHECK_FALSE((s.subject_mask[i] == 1.0f && s.shadow_mask[i] == 1.0f));
      CHECK(s.mask_prompt.kind == PromptKind::subject_mask);
      CHECK(s.mask_prompt.mask == s.subject_mask);
    }
    int changed = 0;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 64 * 64; ++i) {
        const float x = r.shadow_image[c * 4096 + i], y = r.shadow_free_image[c * 4096 + i];
        CHECK(x <= y);
        if (any[i] == 0.0f) CHECK(x == y);
        changed += x != y;
        CHECK(std::abs(x * 255.0f - std::round(x * 255.0f)) < 1e-3f);
      }
    CHECK(changed > 0);
    CHECK(composite_shadows(r) == r.shadow_image);
  }
}

TEST_CASE("opaque shadow core darkens multiplicatively") {
  SampleRecord r;
  r.shadow_free_image = Image({3, 32, 32}, 200.0f / 255.0f);
  r.shadow_blur_sigma = 2.0;
  SubjectRecord s;
  s.subject_mask = rect_mask(32, 32, 0, 0, 2, 2);
  s.shadow_mask = rect_mask(32, 32, 8, 8, 27, 27);
  s.darkening = 0.5;
  r.subjects.push_back(s);
  const auto f = feather(s.shadow_mask, 2.0);
  CHECK(f.at(0, 17, 17) == 1.0f);
  CHECK(f.at(0, 0, 0) == 0.0f);
  const auto out = composite_shadows(r);
  CHECK(out.at(1, 17, 17) == 100.0f / 255.0f);
  CHECK(out.at(0, 0, 0) == 200.0f / 255.0f);
  CHECK(composite_shadows(r, 0) == r.shadow_free_image);
}

TEST_CASE("derive_dot examples") {
  const auto full = derive_dot(ShadowMask({1, 64, 64}, 1.0f));
  CHECK(full.points.at(0) == Point{31, 31});

  const auto single = derive_dot(rect_mask(16, 16, 9, 4, 9, 4));
  CHECK(single.points.at(0) == Point{4, 9});

  // 3x11 bar: rows 10..12, columns 5..15.
  const auto bar = rect_mask(24, 24, 10, 5, 12, 15);
  const auto d = derive_dot(bar);
  const auto o = oracle::deepest_point(bar);
  CHECK(o.x == 6);
  CHECK(o.y == 11);
  CHECK(d.points.at(0) == Point{o.x, o.y});
  const auto depth = chamfer_distance(bar);
  CHECK(depth[11 * 24 + 6] == 6);

  CHECK_THROWS_AS(derive_dot(ShadowMask({1, 8, 8})), ArgumentError);
}

TEST_CASE("derive_line examples") {
  const auto bar = rect_mask(20, 40, 8, 4, 10, 34);
  const auto line = derive_line(bar);
  CHECK(line.kind == PromptKind::line);
  CHECK(line.points.size() >= 2);
  CHECK(line.points.size() <= 8);
  for (const auto& p : line.points) CHECK(p.y == 9);

  ShadowMask disk({1, 41, 41});
  for (int y = 0; y < 41; ++y)
    for (int x = 0; x < 41; ++x)
      if ((x - 20) * (x - 20) + (y - 20) * (y - 20) <= 144) disk.at(0, y, x) = 1.0f;
  const auto dl = derive_line(disk);
  CHECK(dl.points.size() >= 2);
  bool through_centre = false;
  for (const auto& p : dl.points) {
    CHECK(disk.at(0, p.y, p.x) == 1.0f);
    through_centre = through_centre || (std::abs(p.x - 20) <= 1 && std::abs(p.y - 20) <= 1);
  }
  // The centre is either a vertex or lies on the stroke.
  CHECK((through_centre || rasterize(dl, 41, 41).at(0, 20, 20) == 1.0f));

  CHECK_THROWS_AS(derive_line(ShadowMask({1, 8, 8})), ArgumentError);
  CHECK_THROWS_AS(derive_line(rect_mask(8, 8, 3, 3, 3, 3)), ArgumentError);
}

TEST_CASE("generated prompts stay inside their subjects") {
  int subjects = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto r = synth_scene(small_scene(seed));
    for (const auto& s : r.subjects) {
      ++subjects;
      const Point p = s.dot.points.at(0);
      CHECK(s.subject_mask.at(0, p.y, p.x) == 1.0f);
      const auto grown = dilate(s.subject_mask, 1);
      const auto stroke = rasterize(s.line, 64, 64);
      for (std::size_t i = 0; i < stroke.size(); ++i)
        if (stroke[i] == 1.0f) CHECK(grown[i] == 1.0f);
      for (const auto& v : s.line.points) CHECK(s.subject_mask.at(0, v.y, v.x) == 1.0f);
    }
  }
  CHECK(subjects >= 40);
}

TEST_CASE("chamfer argmax is close to the exact deepest point") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> size(12, 40);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = size(rng), w = size(rng);
    ShadowMask m({1, h, w});
    // Union of a few random ellipses.
    std::uniform_real_distribution<double> u(0, 1);
    for (int e = 0; e < 3; ++e) {
      const double cy = u(rng) * h, cx = u(rng) * w, ry = 2 + u(rng) * h / 3, rx = 2 + u(rng) * w / 3;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (std::pow((y - cy) / ry, 2) + std::pow((x - cx) / rx, 2) <= 1) m.at(0, y, x) = 1.0f;
    }
    bool any = false;
    for (float v : m.values()) any = any || v == 1.0f;
    if (!any) continue;
    const auto d = derive_dot(m).points.at(0);
    CHECK(m.at(0, d.y, d.x) == 1.0f);
    CHECK(oracle::exact_depth(m, d.y, d.x) >= 0.9 * oracle::deepest_point(m).depth);
  }
}

TEST_CASE("record round trip through disk") {
  testutil::TempDir tmp("pacsr_ds");
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < 3; ++i) entries.push_back({"r" + std::to_string(i), 50u + i, synth_scene(small_scene(50 + i))});
  write_dataset(entries, tmp.path(), "train");
  const auto back = read_dataset(tmp.path(), "train");
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].id == entries[i].id);
    CHECK(back[i].seed == entries[i].seed);
    CHECK(records_equal(back[i].record, entries[i].record));
  }
  CHECK(fs::exists(tmp / "train/r0/subject_0_shadow.png"));
  const auto prompts = nlohmann::json::parse(std::ifstream(tmp / "train/r0/prompts.json"));
  CHECK(prompts.at("subjects").at(0).at("mask") == "subject_0_mask.png");
  CHECK(prompts.at("subjects").at(0).at("dot").size() == 2);

  fs::remove(tmp / "train/r1/shadow_free.png");
  try {
    read_dataset(tmp.path(), "train");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("shadow_free.png") != std::string::npos);
  }
  {
    std::ofstream(tmp / "train/r2/prompts.json") << "{not json";
  }
  CHECK_THROWS_AS(read_record(tmp / "train/r2"), FormatError);
  CHECK_THROWS_AS(read_dataset(tmp.path(), "val"), FormatError);
}

TEST_CASE("generate_split writes disjoint deterministic splits") {
  testutil::TempDir a("pacsr_split_a"), b("pacsr_split_b");
  SplitSpec spec;
  spec.num_train = 10;
  spec.num_val = 2;
  spec.num_test = 3;
  spec.base_seed = 7;
  spec.scene = small_scene(0);
  generate_split(spec, a.path());
  generate_split(spec, b.path());
  CHECK(dataset_ids(a.path(), "train").size() == 10);
  CHECK(dataset_ids(a.path(), "val").size() == 2);
  CHECK(dataset_ids(a.path(), "test").size() == 3);

  const auto index = nlohmann::json::parse(std::ifstream(a / "index.json"));
  std::vector<std::pair<long, long>> ranges;
  for (const char* split : {"train", "val", "test"})
    ranges.emplace_back(index["splits"][split]["seed_range"][0].get<long>(),
                        index["splits"][split]["seed_range"][1].get<long>());
  CHECK(ranges[0] == std::pair<long, long>{7, 17});
  CHECK(ranges[0].second <= ranges[1].first);
  CHECK(ranges[1].second <= ranges[2].first);

  // Byte-identical trees.
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path());
    std::ifstream fa(e.path(), std::ios::binary), fb(b.path() / rel, std::ios::binary);
    REQUIRE(fb.good());
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
  }

  const auto train = read_dataset(a.path(), "train");
  CHECK(train.front().seed == 7);
  CHECK(records_equal(train.front().record, synth_scene(small_scene(7))));
}

}  // TEST_SUITE
